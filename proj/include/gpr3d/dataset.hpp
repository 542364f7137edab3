#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "gpr3d/config.hpp"
#include "gpr3d/scene.hpp"

namespace gpr3d {

/// One generated sample: the scene description, its group label, the
/// shared normalization frame, and the three volume files.
struct ManifestRecord {
  int id = 0;
  std::uint64_t scene_seed = 0;
  int n_objects = 0;
  std::string group;  // "i" | "ii" | "iii" | "other"
  Scene scene;
  double norm_min = 0, norm_max = 0;
  std::string noisy_path, clean_path, map_path;
};

struct Manifest {
  std::string fingerprint;
  nlohmann::json config_echo;
  std::vector<ManifestRecord> records;
};

void save_manifest(const Manifest& manifest, const std::string& path);
Manifest load_manifest(const std::string& path);

/// Builds `dataset.count` scenes and writes {noisy, clean, map} float32
/// volume triples plus manifest.json under out_dir. Every sampled artifact
/// derives from (dataset.seed, scene index) alone, so output is
/// bit-identical for any worker count.
Manifest generate_dataset(const RunConfig& cfg, const std::string& out_dir);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

}  // namespace gpr3d
