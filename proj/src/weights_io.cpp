#include "lfdeocc/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace lfdeocc {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw WeightsError(WeightsErrorKind::Format, what, std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw WeightsError(WeightsErrorKind::Format, what,
                         std::string("weights file truncated while reading ") + what);
    }
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32(const char* what) {
    auto b = take(4, what);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Keys compared when loading into an existing network; in_channels first so a
// view-count mismatch is reported under that name.
constexpr const char* kConfigKeys[] = {"in_channels", "angular_rows", "angular_cols", "base_depth",    "encoder_levels",
                                       "aspp_rates",  "aspp_groups",  "leaky_slope",  "no_aspp",       "drop_outer_skip"};

void check_config(const NetworkConfig& expected, const nlohmann::json& stored) {
  if (!stored.is_object()) throw WeightsError(WeightsErrorKind::Format, "network", "weights header has no network config");
  const nlohmann::json want = expected;
  for (const char* key : kConfigKeys) {
    if (!stored.contains(key)) continue;
    if (stored.at(key) != want.at(key)) {
      throw WeightsError(WeightsErrorKind::ConfigMismatch, key,
                         std::string("config mismatch in '") + key + "': file has " + stored.at(key).dump() +
                             ", network has " + want.at(key).dump());
    }
  }
}

bool is_optimizer_entry(const std::string& name) { return name.rfind("optim.", 0) == 0; }

}  // namespace

const char* to_string(WeightsErrorKind kind) {
  switch (kind) {
    case WeightsErrorKind::Io:
      return "io";
    case WeightsErrorKind::Format:
      return "format";
    case WeightsErrorKind::ConfigMismatch:
      return "config_mismatch";
  }
  return "unknown";
}

const nn::Tensor* WeightsFile::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_weights(const WeightsFile& file) {
  std::vector<std::uint8_t> out(std::begin(kWeightsMagic), std::end(kWeightsMagic));
  put_u32(out, kWeightsVersion);
  const std::string header = file.header.dump();
  put_u32(out, checked_u32(header.size(), "header"));
  out.insert(out.end(), header.begin(), header.end());
  for (const auto& [name, t] : file.tensors) {
    put_u32(out, checked_u32(name.size(), "name"));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, checked_u32(t.rank(), "ndim"));
    for (std::size_t d : t.shape()) put_u32(out, checked_u32(d, "dims"));
    for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

WeightsFile decode_weights(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kWeightsMagic, 4) != 0) {
    throw WeightsError(WeightsErrorKind::Format, "magic", "not a weights file (bad magic)");
  }
  const std::uint32_t version = in.u32("version");
  if (version != kWeightsVersion) {
    throw WeightsError(WeightsErrorKind::Format, "version", "unsupported weights version " + std::to_string(version));
  }
  WeightsFile file;
  const std::uint32_t header_len = in.u32("header length");
  auto header = in.take(header_len, "header");
  try {
    file.header = nlohmann::json::parse(header.begin(), header.end());
  } catch (const nlohmann::json::exception& e) {
    throw WeightsError(WeightsErrorKind::Format, "header", std::string("malformed weights header: ") + e.what());
  }

  std::set<std::string> seen;
  while (!in.done()) {
    auto name_bytes = in.take(in.u32("name length"), "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    if (!seen.insert(name).second) throw WeightsError(WeightsErrorKind::Format, name, "duplicate tensor '" + name + "'");
    const std::uint32_t ndim = in.u32("ndim");
    if (ndim > 8) throw WeightsError(WeightsErrorKind::Format, name, "tensor '" + name + "' has implausible rank");
    nn::Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      shape.push_back(in.u32("dims"));
      if (shape.back() != 0 && numel > bytes.size() / shape.back()) {
        throw WeightsError(WeightsErrorKind::Format, name, "weights file truncated in '" + name + "'");
      }
      numel *= shape.back();
    }
    nn::Tensor t(shape);
    for (float& v : t.data()) v = std::bit_cast<float>(in.u32("tensor data"));
    file.tensors.emplace_back(std::move(name), std::move(t));
  }
  return file;
}

void write_weights_file(const std::filesystem::path& path, const WeightsFile& file) {
  const std::vector<std::uint8_t> bytes = encode_weights(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightsError(WeightsErrorKind::Io, "", "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw WeightsError(WeightsErrorKind::Io, "", "failed writing " + path.string());
}

WeightsFile read_weights_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightsError(WeightsErrorKind::Io, "", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw WeightsError(WeightsErrorKind::Io, "", "failed reading " + path.string());
  try {
    return decode_weights(bytes);
  } catch (const WeightsError& e) {
    throw WeightsError(e.kind(), e.field(), path.string() + ": " + e.what());
  }
}

WeightsFile snapshot(DeOccNet& net) {
  WeightsFile file;
  file.header["network"] = net.config();
  for (const StateEntry& e : net.state()) file.tensors.emplace_back(e.name, *e.tensor);
  return file;
}

void restore(DeOccNet& net, const WeightsFile& file) {
  if (!file.header.contains("network")) {
    throw WeightsError(WeightsErrorKind::Format, "network", "weights header has no network config");
  }
  check_config(net.config(), file.header.at("network"));

  std::vector<StateEntry> state = net.state();
  std::set<std::string> expected;
  for (const StateEntry& e : state) {
    expected.insert(e.name);
    const nn::Tensor* t = file.find(e.name);
    if (t == nullptr) throw WeightsError(WeightsErrorKind::ConfigMismatch, e.name, "missing tensor '" + e.name + "'");
    if (t->shape() != e.tensor->shape()) {
      throw WeightsError(WeightsErrorKind::ConfigMismatch, e.name,
                         "tensor '" + e.name + "' has shape " + nn::shape_string(t->shape()) + ", expected " +
                             nn::shape_string(e.tensor->shape()));
    }
  }
  for (const auto& [name, t] : file.tensors) {
    if (!expected.contains(name) && !is_optimizer_entry(name)) {
      throw WeightsError(WeightsErrorKind::ConfigMismatch, name, "unexpected tensor '" + name + "'");
    }
  }
  for (StateEntry& e : state) *e.tensor = *file.find(e.name);
}

void save_weights(DeOccNet& net, const std::filesystem::path& path) { write_weights_file(path, snapshot(net)); }

void load_weights(DeOccNet& net, const std::filesystem::path& path) { restore(net, read_weights_file(path)); }

DeOccNet load_network(const std::filesystem::path& path) {
  const WeightsFile file = read_weights_file(path);
  if (!file.header.contains("network")) {
    throw WeightsError(WeightsErrorKind::Format, "network", path.string() + ": weights header has no network config");
  }
  NetworkConfig cfg;
  try {
    cfg = file.header.at("network").get<NetworkConfig>();
    cfg.validate();
  } catch (const std::exception& e) {
    throw WeightsError(WeightsErrorKind::Format, "network", path.string() + ": invalid network config: " + e.what());
  }
  DeOccNet net = DeOccNet::build(cfg);
  restore(net, file);
  return net;
}

}  // namespace lfdeocc
