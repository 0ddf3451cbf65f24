#include "rainseg/model/checkpoint.hpp"

#include <charconv>
#include <map>

#include "rainseg/core/binary_io.hpp"
#include "rainseg/core/error.hpp"

namespace rainseg {

namespace {

// Shortest decimal that round-trips through float, read back as double (0.3f -> 0.3).
double widen(float v) {
  char buf[32];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  double out = 0.0;
  std::from_chars(buf, end, out);
  return out;
}

constexpr std::string_view kMagic = "MUNW";
constexpr std::string_view kMeta = "meta.";

void put_tensor(io::Writer& w, const std::string& name, const Shape& shape, std::span<const float> values) {
  if (name.size() > 0xFFFF) throw ConfigError("checkpoint entry name too long: " + name);
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.text(name);
  w.u8(static_cast<std::uint8_t>(shape.size()));
  for (auto e : shape) w.u32(static_cast<std::uint32_t>(e));
  for (float v : values) w.f32(v);
}

}  // namespace

const Tensor* Checkpoint::extra(const std::string& name) const {
  for (const auto& [n, t] : extras) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  const ModelConfig& cfg = p.config();
  std::vector<std::pair<std::string, Tensor>> meta = {
      {"dropout_p", Tensor({1}, {static_cast<float>(cfg.dropout_p)})},
      {"patch_size", Tensor({1}, {static_cast<float>(cfg.patch_size)})},
  };
  for (const auto& e : ckpt.extras) meta.push_back(e);

  io::Writer w;
  w.text(kMagic);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(p.size() + 2 * p.batchnorms().size() + meta.size()));
  for (std::size_t i = 0; i < p.size(); ++i) put_tensor(w, p.name(i), p.tensor(i).shape(), p.tensor(i).data());
  for (const auto& [layer, state] : p.batchnorms()) {
    put_tensor(w, layer + ".running_mean", {state.running_mean.size()}, state.running_mean);
    put_tensor(w, layer + ".running_var", {state.running_var.size()}, state.running_var);
  }
  for (const auto& [name, t] : meta) put_tensor(w, std::string(kMeta) + name, t.shape(), t.data());
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  io::Reader r(bytes, "checkpoint");
  if (r.text(4, "magic") != kMagic) throw FormatError("checkpoint: bad magic, expected MUNW", 0);
  const auto version = r.u16("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version), 4);
  }
  const auto count = r.u32("entry count");
  std::vector<std::pair<std::string, Tensor>> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.u16("name length");
    std::string name = r.text(len, "name");
    const auto rank = r.u8("rank");
    if (rank > 4) throw FormatError("checkpoint: rank " + std::to_string(rank) + " for " + name, r.pos() - 1);
    Shape shape(rank);
    for (auto& e : shape) {
      e = r.u32("extent");
      if (e == 0) throw FormatError("checkpoint: zero extent in " + name, r.pos() - 4);
    }
    const std::size_t n = shape_numel(shape);
    r.need(n * 4, "payload");
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32("payload");
    entries.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes", r.pos());

  std::map<std::string, Tensor> by_name(entries.begin(), entries.end());
  auto take = [&](const std::string& name) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing entry " + name, bytes.size());
    return it->second;
  };

  ModelConfig cfg;
  cfg.in_channels = take("enc1.conv1.w").dim(1);
  cfg.encoder_features.clear();
  for (std::size_t l = 1; by_name.count("enc" + std::to_string(l) + ".conv1.w"); ++l) {
    cfg.encoder_features.push_back(take("enc" + std::to_string(l) + ".conv1.w").dim(0));
  }
  cfg.num_classes = take("head.w").dim(0);
  cfg.dropout_p = widen(take("meta.dropout_p").item());
  cfg.patch_size = static_cast<std::size_t>(take("meta.patch_size").item());
  cfg.validate();

  Checkpoint ckpt{ModelParams(cfg), {}};
  for (const auto& spec : layer_inventory(cfg)) {
    Tensor t = take(spec.name);
    if (t.shape() != spec.shape) {
      throw FormatError("checkpoint: " + spec.name + " has shape " + to_string(t.shape()) + ", expected " +
                            to_string(spec.shape),
                        bytes.size());
    }
    t.set_requires_grad(true);
    ckpt.params.add(spec.name, std::move(t));
  }
  for (const auto& [layer, channels] : batchnorm_inventory(cfg)) {
    const Tensor& mean = take(layer + ".running_mean");
    const Tensor& var = take(layer + ".running_var");
    if (mean.numel() != channels || var.numel() != channels) {
      throw FormatError("checkpoint: running statistics of " + layer + " have the wrong length", bytes.size());
    }
    ckpt.params.add_batchnorm(layer, BatchNormState<float>{{mean.data().begin(), mean.data().end()},
                                                            {var.data().begin(), var.data().end()}});
  }
  for (const auto& [name, t] : entries) {
    if (name.starts_with(kMeta) && name != "meta.dropout_p" && name != "meta.patch_size") {
      ckpt.extras.emplace_back(name.substr(kMeta.size()), t);
    }
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace rainseg
