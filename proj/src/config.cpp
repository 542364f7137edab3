#include "gpr3d/config.hpp"

#include <fstream>

namespace gpr3d {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  fail("config: key '" + key + "' " + why);
}

void check_known(const json& obj, const std::string& prefix,
                 std::initializer_list<const char*> known) {
  if (!obj.is_object()) bad_key(prefix.empty() ? "<root>" : prefix, "must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) bad_key(prefix.empty() ? key : prefix + "." + key, "is not a recognized key");
  }
}

template <typename T>
void get_scalar(const json& obj, const std::string& prefix, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  try {
    out = v.get<T>();
  } catch (const json::exception&) {
    bad_key(prefix + "." + key, "has the wrong type");
  }
}

void get_range(const json& obj, const std::string& prefix, const char* key, double& lo, double& hi) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 2) bad_key(prefix + "." + key, "must be a [lo, hi] pair");
  lo = v[0].get<double>();
  hi = v[1].get<double>();
  if (!(lo <= hi)) bad_key(prefix + "." + key, "has lo > hi");
}

void get_vec3(const json& obj, const std::string& prefix, const char* key, Vec3& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 3) bad_key(prefix + "." + key, "must be a 3-element array");
  out = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

void get_dims(const json& obj, const std::string& prefix, const char* key,
              std::array<std::size_t, 3>& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 3) bad_key(prefix + "." + key, "must be a 3-element array");
  for (int i = 0; i < 3; ++i) {
    const long d = v[static_cast<std::size_t>(i)].get<long>();
    if (d <= 0) bad_key(prefix + "." + key, "must hold positive extents");
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(d);
  }
}

void require_range(bool ok, const char* key) {
  if (!ok) fail(std::string("config: key '") + key + "' is out of range");
}

}  // namespace

RunConfig parse_config_json(const json& doc) {
  RunConfig cfg;
  check_known(doc, "", {"scene", "survey", "clutter", "forward", "grid", "dataset", "denoiser",
                        "inverter", "train", "fine_tune", "eval"});

  if (doc.contains("scene")) {
    const json& s = doc["scene"];
    check_known(s, "scene",
                {"min_objects", "max_objects", "soil_epsilon_r", "soil_conductivity",
                 "epsilon_r_range", "cylinder_radius_range", "cylinder_length_range",
                 "sphere_radius_range", "box_edge_range", "placement_origin", "placement_size"});
    get_scalar(s, "scene", "min_objects", cfg.min_objects);
    get_scalar(s, "scene", "max_objects", cfg.max_objects);
    get_scalar(s, "scene", "soil_epsilon_r", cfg.soil_epsilon_r);
    get_scalar(s, "scene", "soil_conductivity", cfg.soil_conductivity);
    get_range(s, "scene", "epsilon_r_range", cfg.ranges.eps_lo, cfg.ranges.eps_hi);
    get_range(s, "scene", "cylinder_radius_range", cfg.ranges.cylinder_radius_lo,
              cfg.ranges.cylinder_radius_hi);
    get_range(s, "scene", "cylinder_length_range", cfg.ranges.cylinder_length_lo,
              cfg.ranges.cylinder_length_hi);
    get_range(s, "scene", "sphere_radius_range", cfg.ranges.sphere_radius_lo,
              cfg.ranges.sphere_radius_hi);
    get_range(s, "scene", "box_edge_range", cfg.ranges.box_edge_lo, cfg.ranges.box_edge_hi);
    Vec3 origin = cfg.ranges.placement_lo;
    Vec3 size = cfg.ranges.placement_hi - cfg.ranges.placement_lo;
    get_vec3(s, "scene", "placement_origin", origin);
    get_vec3(s, "scene", "placement_size", size);
    cfg.ranges.placement_lo = origin;
    cfg.ranges.placement_hi = origin + size;
    require_range(cfg.min_objects >= 0 && cfg.min_objects <= 3, "scene.min_objects");
    require_range(cfg.max_objects >= cfg.min_objects && cfg.max_objects <= 3, "scene.max_objects");
    require_range(cfg.soil_epsilon_r > 0, "scene.soil_epsilon_r");
  }

  if (doc.contains("survey")) {
    const json& s = doc["survey"];
    check_known(s, "survey",
                {"domain", "lines", "points_per_line", "tx_rx_offset", "antenna_height",
                 "center_frequency_hz", "time_window_s", "time_samples"});
    get_vec3(s, "survey", "domain", cfg.survey.domain);
    get_scalar(s, "survey", "lines", cfg.survey.lines);
    get_scalar(s, "survey", "points_per_line", cfg.survey.points_per_line);
    get_scalar(s, "survey", "tx_rx_offset", cfg.survey.tx_rx_offset);
    get_scalar(s, "survey", "antenna_height", cfg.survey.antenna_height);
    get_scalar(s, "survey", "center_frequency_hz", cfg.survey.center_frequency);
    get_scalar(s, "survey", "time_window_s", cfg.survey.time_window);
    get_scalar(s, "survey", "time_samples", cfg.survey.time_samples);
    require_range(cfg.survey.lines > 0, "survey.lines");
    require_range(cfg.survey.points_per_line > 0, "survey.points_per_line");
    require_range(cfg.survey.center_frequency > 0, "survey.center_frequency_hz");
    require_range(cfg.survey.time_window > 0, "survey.time_window_s");
    require_range(cfg.survey.time_samples > 0, "survey.time_samples");
    require_range(cfg.survey.tx_rx_offset >= 0 && cfg.survey.tx_rx_offset < cfg.survey.domain.x,
                  "survey.tx_rx_offset");
    require_range(cfg.survey.antenna_height >= 0, "survey.antenna_height");
  }

  if (doc.contains("clutter")) {
    const json& s = doc["clutter"];
    check_known(s, "clutter",
                {"family", "amplitude_ratio", "correlation_lengths", "background_epsilon_r"});
    get_scalar(s, "clutter", "family", cfg.clutter.family);
    get_scalar(s, "clutter", "amplitude_ratio", cfg.clutter.amplitude_ratio);
    if (s.contains("correlation_lengths")) {
      const json& v = s["correlation_lengths"];
      if (!v.is_array() || v.size() != 3) bad_key("clutter.correlation_lengths", "must be a 3-element array");
      for (int i = 0; i < 3; ++i)
        cfg.clutter.correlation_lengths[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)].get<double>();
    }
    get_scalar(s, "clutter", "background_epsilon_r", cfg.clutter.background_epsilon_r);
    require_range(cfg.clutter.amplitude_ratio >= 0, "clutter.amplitude_ratio");
    require_range(cfg.clutter.family >= 0, "clutter.family");
    require_range(cfg.clutter.background_epsilon_r > 0, "clutter.background_epsilon_r");
  } else {
    cfg.clutter.background_epsilon_r = cfg.soil_epsilon_r;
  }

  if (doc.contains("forward")) {
    const json& s = doc["forward"];
    check_known(s, "forward",
                {"scatter_voxel_m", "scatterer_cap", "time_zero_correction", "mean_subtraction"});
    get_scalar(s, "forward", "scatter_voxel_m", cfg.scatter_voxel_m);
    long cap = static_cast<long>(cfg.scatterer_cap);
    get_scalar(s, "forward", "scatterer_cap", cap);
    require_range(cap > 0, "forward.scatterer_cap");
    cfg.scatterer_cap = static_cast<std::size_t>(cap);
    get_scalar(s, "forward", "time_zero_correction", cfg.apply_time_zero);
    get_scalar(s, "forward", "mean_subtraction", cfg.apply_mean_subtraction);
    require_range(cfg.scatter_voxel_m > 0, "forward.scatter_voxel_m");
  }

  if (doc.contains("grid")) {
    const json& s = doc["grid"];
    check_known(s, "grid", {"cscan_dims", "map_dims", "map_origin", "map_size", "raster_supersample"});
    get_dims(s, "grid", "cscan_dims", cfg.cscan_dims);
    get_dims(s, "grid", "map_dims", cfg.map_dims);
    get_vec3(s, "grid", "map_origin", cfg.map_origin);
    get_vec3(s, "grid", "map_size", cfg.map_size);
    get_scalar(s, "grid", "raster_supersample", cfg.raster_supersample);
    require_range(cfg.raster_supersample >= 1 && cfg.raster_supersample <= 8, "grid.raster_supersample");
    require_range(cfg.map_size.x > 0 && cfg.map_size.y > 0 && cfg.map_size.z > 0, "grid.map_size");
  }

  if (doc.contains("dataset")) {
    const json& s = doc["dataset"];
    check_known(s, "dataset", {"count", "seed"});
    get_scalar(s, "dataset", "count", cfg.dataset_count);
    get_scalar(s, "dataset", "seed", cfg.dataset_seed);
    require_range(cfg.dataset_count >= 0, "dataset.count");
  }

  if (doc.contains("denoiser")) {
    const json& s = doc["denoiser"];
    check_known(s, "denoiser", {"m", "c1", "r"});
    get_scalar(s, "denoiser", "m", cfg.denoiser.m);
    get_scalar(s, "denoiser", "c1", cfg.denoiser.c1);
    get_scalar(s, "denoiser", "r", cfg.denoiser.r);
    require_range(cfg.denoiser.m >= 0, "denoiser.m");
    require_range(cfg.denoiser.c1 >= 1, "denoiser.c1");
    require_range(cfg.denoiser.r >= 1 && cfg.denoiser.c1 % cfg.denoiser.r == 0, "denoiser.r");
  }

  if (doc.contains("inverter")) {
    const json& s = doc["inverter"];
    check_known(s, "inverter", {"n", "c2", "msfa"});
    get_scalar(s, "inverter", "n", cfg.inverter.n);
    get_scalar(s, "inverter", "c2", cfg.inverter.c2);
    get_scalar(s, "inverter", "msfa", cfg.inverter.msfa_enabled);
    require_range(cfg.inverter.n >= 1, "inverter.n");
    require_range(cfg.inverter.c2 >= 1, "inverter.c2");
  }

  if (doc.contains("train")) {
    const json& s = doc["train"];
    check_known(s, "train", {"lr0", "decay_factor", "epochs", "batch_size", "split", "seed", "input"});
    get_scalar(s, "train", "lr0", cfg.train_lr0);
    get_scalar(s, "train", "decay_factor", cfg.train_decay);
    get_scalar(s, "train", "epochs", cfg.train_epochs);
    get_scalar(s, "train", "batch_size", cfg.train_batch);
    get_scalar(s, "train", "split", cfg.train_split);
    get_scalar(s, "train", "seed", cfg.train_seed);
    get_scalar(s, "train", "input", cfg.train_input);
    require_range(cfg.train_lr0 > 0, "train.lr0");
    require_range(cfg.train_decay > 0 && cfg.train_decay <= 1, "train.decay_factor");
    require_range(cfg.train_epochs >= 0, "train.epochs");
    require_range(cfg.train_batch >= 1, "train.batch_size");
    require_range(cfg.train_split > 0 && cfg.train_split < 1, "train.split");
    require_range(cfg.train_input == "clean" || cfg.train_input == "noisy", "train.input");
  }

  if (doc.contains("fine_tune")) {
    const json& s = doc["fine_tune"];
    check_known(s, "fine_tune", {"lr0", "decay_factor", "epochs"});
    get_scalar(s, "fine_tune", "lr0", cfg.ft_lr0);
    get_scalar(s, "fine_tune", "decay_factor", cfg.ft_decay);
    get_scalar(s, "fine_tune", "epochs", cfg.ft_epochs);
    require_range(cfg.ft_lr0 > 0, "fine_tune.lr0");
    require_range(cfg.ft_decay > 0 && cfg.ft_decay <= 1, "fine_tune.decay_factor");
    require_range(cfg.ft_epochs >= 0, "fine_tune.epochs");
  }

  if (doc.contains("eval")) {
    const json& s = doc["eval"];
    check_known(s, "eval", {"mape_floor"});
    get_scalar(s, "eval", "mape_floor", cfg.mape_floor);
    require_range(cfg.mape_floor > 0, "eval.mape_floor");
  }

  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "config: cannot open '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  require(!doc.is_discarded(), "config: '" + path + "' is not valid JSON");
  return parse_config_json(doc);
}

nlohmann::json serialize_config(const RunConfig& cfg) {
  json doc;
  doc["scene"] = {
      {"min_objects", cfg.min_objects},
      {"max_objects", cfg.max_objects},
      {"soil_epsilon_r", cfg.soil_epsilon_r},
      {"soil_conductivity", cfg.soil_conductivity},
      {"epsilon_r_range", {cfg.ranges.eps_lo, cfg.ranges.eps_hi}},
      {"cylinder_radius_range", {cfg.ranges.cylinder_radius_lo, cfg.ranges.cylinder_radius_hi}},
      {"cylinder_length_range", {cfg.ranges.cylinder_length_lo, cfg.ranges.cylinder_length_hi}},
      {"sphere_radius_range", {cfg.ranges.sphere_radius_lo, cfg.ranges.sphere_radius_hi}},
      {"box_edge_range", {cfg.ranges.box_edge_lo, cfg.ranges.box_edge_hi}},
      {"placement_origin", {cfg.ranges.placement_lo.x, cfg.ranges.placement_lo.y, cfg.ranges.placement_lo.z}},
      {"placement_size",
       {cfg.ranges.placement_hi.x - cfg.ranges.placement_lo.x,
        cfg.ranges.placement_hi.y - cfg.ranges.placement_lo.y,
        cfg.ranges.placement_hi.z - cfg.ranges.placement_lo.z}},
  };
  doc["survey"] = {
      {"domain", {cfg.survey.domain.x, cfg.survey.domain.y, cfg.survey.domain.z}},
      {"lines", cfg.survey.lines},
      {"points_per_line", cfg.survey.points_per_line},
      {"tx_rx_offset", cfg.survey.tx_rx_offset},
      {"antenna_height", cfg.survey.antenna_height},
      {"center_frequency_hz", cfg.survey.center_frequency},
      {"time_window_s", cfg.survey.time_window},
      {"time_samples", cfg.survey.time_samples},
  };
  doc["clutter"] = {
      {"family", cfg.clutter.family},
      {"amplitude_ratio", cfg.clutter.amplitude_ratio},
      {"correlation_lengths",
       {cfg.clutter.correlation_lengths[0], cfg.clutter.correlation_lengths[1],
        cfg.clutter.correlation_lengths[2]}},
      {"background_epsilon_r", cfg.clutter.background_epsilon_r},
  };
  doc["forward"] = {
      {"scatter_voxel_m", cfg.scatter_voxel_m},
      {"scatterer_cap", cfg.scatterer_cap},
      {"time_zero_correction", cfg.apply_time_zero},
      {"mean_subtraction", cfg.apply_mean_subtraction},
  };
  doc["grid"] = {
      {"cscan_dims", {cfg.cscan_dims[0], cfg.cscan_dims[1], cfg.cscan_dims[2]}},
      {"map_dims", {cfg.map_dims[0], cfg.map_dims[1], cfg.map_dims[2]}},
      {"map_origin", {cfg.map_origin.x, cfg.map_origin.y, cfg.map_origin.z}},
      {"map_size", {cfg.map_size.x, cfg.map_size.y, cfg.map_size.z}},
      {"raster_supersample", cfg.raster_supersample},
  };
  doc["dataset"] = {{"count", cfg.dataset_count}, {"seed", cfg.dataset_seed}};
  doc["denoiser"] = {{"m", cfg.denoiser.m}, {"c1", cfg.denoiser.c1}, {"r", cfg.denoiser.r}};
  doc["inverter"] = {{"n", cfg.inverter.n}, {"c2", cfg.inverter.c2}, {"msfa", cfg.inverter.msfa_enabled}};
  doc["train"] = {
      {"lr0", cfg.train_lr0},         {"decay_factor", cfg.train_decay},
      {"epochs", cfg.train_epochs},   {"batch_size", cfg.train_batch},
      {"split", cfg.train_split},     {"seed", cfg.train_seed},
      {"input", cfg.train_input},
  };
  doc["fine_tune"] = {{"lr0", cfg.ft_lr0}, {"decay_factor", cfg.ft_decay}, {"epochs", cfg.ft_epochs}};
  doc["eval"] = {{"mape_floor", cfg.mape_floor}};
  return doc;
}

std::string config_fingerprint(const RunConfig& cfg) {
  // FNV-1a 64 over the canonical dump (nlohmann::json orders object keys).
  const std::string text = serialize_config(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace gpr3d
