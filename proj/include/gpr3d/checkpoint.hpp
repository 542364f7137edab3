#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gpr3d/adam.hpp"
#include "gpr3d/denoiser.hpp"
#include "gpr3d/inverter.hpp"
#include "gpr3d/network.hpp"
#include "gpr3d/volume_io.hpp"

namespace gpr3d {

// GPRC checkpoint format: magic "GPRC", version u16 LE, u32-length-prefixed
// UTF-8 JSON header, entry count u32, then per entry: name length u16 +
// UTF-8 name, ndim u8, dims u32 each, float32 little-endian payload.
// Entries hold parameters, BN running-statistic buffers (".running_*") and
// optimizer moments (".adam_m" / ".adam_v").

struct Checkpoint {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor<float>>> entries;

  const Tensor<float>* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Captures parameters, buffers and (optionally) Adam moments.
Checkpoint checkpoint_from_network(const Network<float>& net, nlohmann::json header,
                                   const AdamState<float>* adam = nullptr);

/// Restores parameters and buffers into an already-built network; every
/// entry must match the declared shape or an architecture-mismatch error
/// is raised.
void apply_checkpoint(const Checkpoint& ckpt, Network<float>& net,
                      AdamState<float>* adam = nullptr);

// Architecture headers. kind is "denoiser" or "inverter".
nlohmann::json arch_header(const DenoiserConfig& cfg);
nlohmann::json arch_header(const InverterConfig& cfg);
std::string checkpoint_kind(const Checkpoint& ckpt);
DenoiserConfig denoiser_config_from_header(const nlohmann::json& header);
InverterConfig inverter_config_from_header(const nlohmann::json& header);

/// Rebuilds the network described by the checkpoint header and loads the
/// stored parameters into it.
Network<float> network_from_checkpoint(const Checkpoint& ckpt, AdamState<float>* adam = nullptr);

}  // namespace gpr3d
