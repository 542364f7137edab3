#include "gpr3d/checkpoint.hpp"

#include <cstring>

#include "io_detail.hpp"

namespace gpr3d {

namespace {
constexpr std::uint8_t kMagic[4] = {0x47, 0x50, 0x52, 0x43};  // "GPRC"
constexpr std::uint16_t kVersion = 1;
}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  using namespace io_detail;
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kVersion);
  const std::string header = ckpt.header.dump();
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  put_u32(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [name, t] : ckpt.entries) {
    require(name.size() <= 0xFFFF, "checkpoint: entry name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data) put_f32(out, v);
  }
  atomic_write(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  using namespace io_detail;
  Reader r = read_file(path);
  r.need(4, "magic");
  if (std::memcmp(r.bytes.data(), kMagic, 4) != 0)
    throw IoError(IoErrorKind::BadMagic, path + ": bad magic (not a GPRC checkpoint)");
  r.pos = 4;
  const std::uint16_t version = r.u16("version");
  if (version != kVersion)
    throw IoError(IoErrorKind::BadVersion, path + ": unsupported version " + std::to_string(version));
  const std::uint32_t header_len = r.u32("header length");
  r.need(header_len, "header");
  std::string header_text(r.bytes.begin() + static_cast<long>(r.pos),
                          r.bytes.begin() + static_cast<long>(r.pos + header_len));
  r.pos += header_len;
  Checkpoint ckpt;
  ckpt.header = nlohmann::json::parse(header_text, nullptr, false);
  if (ckpt.header.is_discarded())
    throw IoError(IoErrorKind::Corrupt, path + ": header is not valid JSON");
  const std::uint32_t count = r.u32("entry count");
  std::vector<std::string> seen;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint16_t name_len = r.u16("entry name length");
    r.need(name_len, "entry name");
    std::string name(r.bytes.begin() + static_cast<long>(r.pos),
                     r.bytes.begin() + static_cast<long>(r.pos + name_len));
    r.pos += name_len;
    for (const std::string& s : seen)
      if (s == name) throw IoError(IoErrorKind::Corrupt, path + ": duplicate entry '" + name + "'");
    seen.push_back(name);
    const std::uint8_t ndim = r.u8("entry ndim");
    Shape shape(ndim);
    std::uint64_t total = 1;
    for (std::uint8_t i = 0; i < ndim; ++i) {
      shape[i] = r.u32("entry dims");
      total *= shape[i];
      if (total > (std::uint64_t(1) << 40))
        throw IoError(IoErrorKind::DimOverflow, path + ": entry '" + name + "' dims overflow");
    }
    Tensor<float> t(shape);
    for (std::uint64_t i = 0; i < total; ++i) t.data[i] = r.f32("entry payload");
    ckpt.entries.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

Checkpoint checkpoint_from_network(const Network<float>& net, nlohmann::json header,
                                   const AdamState<float>* adam) {
  Checkpoint ckpt;
  header["bn_batches_seen"] = net.bn_batches_seen;
  if (adam) {
    header["adam"] = {{"t", adam->t},
                      {"beta1", adam->beta1},
                      {"beta2", adam->beta2},
                      {"eps", adam->eps}};
  }
  ckpt.header = std::move(header);
  for (const Param<float>& p : net.params) ckpt.entries.emplace_back(p.name, p.value);
  for (const Param<float>& b : net.buffers) ckpt.entries.emplace_back(b.name, b.value);
  if (adam) {
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      ckpt.entries.emplace_back(net.params[i].name + ".adam_m", adam->m[i]);
      ckpt.entries.emplace_back(net.params[i].name + ".adam_v", adam->v[i]);
    }
  }
  return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, Network<float>& net, AdamState<float>* adam) {
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor<float>& {
    const Tensor<float>* t = ckpt.find(name);
    require(t != nullptr, "checkpoint: architecture mismatch, missing entry '" + name + "'");
    require(t->shape == shape, "checkpoint: architecture mismatch, entry '" + name + "' has shape " +
                                   shape_str(t->shape) + " but the network declares " + shape_str(shape));
    return *t;
  };
  for (Param<float>& p : net.params) p.value.data = fetch(p.name, p.value.shape).data;
  for (Param<float>& b : net.buffers) b.value.data = fetch(b.name, b.value.shape).data;
  if (ckpt.header.contains("bn_batches_seen"))
    net.bn_batches_seen = ckpt.header["bn_batches_seen"].get<std::int64_t>();
  if (adam) {
    require(ckpt.header.contains("adam") && !ckpt.header["adam"].is_null(),
            "checkpoint: no optimizer state stored");
    *adam = AdamState<float>::for_network(net);
    adam->t = ckpt.header["adam"]["t"].get<std::int64_t>();
    adam->beta1 = ckpt.header["adam"]["beta1"].get<float>();
    adam->beta2 = ckpt.header["adam"]["beta2"].get<float>();
    adam->eps = ckpt.header["adam"]["eps"].get<float>();
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      adam->m[i].data = fetch(net.params[i].name + ".adam_m", adam->m[i].shape).data;
      adam->v[i].data = fetch(net.params[i].name + ".adam_v", adam->v[i].shape).data;
    }
  }
}

nlohmann::json arch_header(const DenoiserConfig& cfg) {
  return {{"net", {{"kind", "denoiser"}, {"m", cfg.m}, {"c1", cfg.c1}, {"r", cfg.r}}}};
}

nlohmann::json arch_header(const InverterConfig& cfg) {
  return {{"net", {{"kind", "inverter"}, {"n", cfg.n}, {"c2", cfg.c2}, {"msfa", cfg.msfa_enabled}}}};
}

std::string checkpoint_kind(const Checkpoint& ckpt) {
  require(ckpt.header.contains("net") && ckpt.header["net"].contains("kind"),
          "checkpoint: header lacks a net.kind field");
  return ckpt.header["net"]["kind"].get<std::string>();
}

DenoiserConfig denoiser_config_from_header(const nlohmann::json& header) {
  const nlohmann::json& n = header.at("net");
  require(n.at("kind") == "denoiser", "checkpoint: expected a denoiser checkpoint");
  return DenoiserConfig{n.at("m").get<int>(), n.at("c1").get<int>(), n.at("r").get<int>()};
}

InverterConfig inverter_config_from_header(const nlohmann::json& header) {
  const nlohmann::json& n = header.at("net");
  require(n.at("kind") == "inverter", "checkpoint: expected an inverter checkpoint");
  return InverterConfig{n.at("n").get<int>(), n.at("c2").get<int>(), n.at("msfa").get<bool>()};
}

Network<float> network_from_checkpoint(const Checkpoint& ckpt, AdamState<float>* adam) {
  const std::string kind = checkpoint_kind(ckpt);
  Network<float> net;
  if (kind == "denoiser")
    net = build_denoiser<float>(denoiser_config_from_header(ckpt.header), 0);
  else if (kind == "inverter")
    net = build_inverter<float>(inverter_config_from_header(ckpt.header), 0);
  else
    fail("checkpoint: unknown network kind '" + kind + "'");
  apply_checkpoint(ckpt, net, adam);
  return net;
}

}  // namespace gpr3d
