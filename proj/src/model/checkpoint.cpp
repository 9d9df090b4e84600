#include "fcanet/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "fcanet/common/errors.hpp"

namespace fcanet::model {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'F', 'C', 'A', 'N'};
constexpr std::uint32_t kVersion = 1;

struct Stored {
  numerics::Shape dims;
  std::vector<float> values;
};

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }

class Cursor {
 public:
  explicit Cursor(const std::string& b) : bytes_(b) {}
  void take(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ConfigError("checkpoint is truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    take(&v, 4);
    return v;
  }
  std::string str() {
    std::string s(u32(), '\0');
    take(s.data(), s.size());
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

template <class V>
void put_tensor(std::string& out, const std::string& name, const numerics::Shape& dims, const V& values) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (std::size_t d : dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (auto v : values) {
    const float f = static_cast<float>(v);
    out.append(reinterpret_cast<const char*>(&f), 4);
  }
}

std::pair<std::map<std::string, Stored>, ModelConfig> parse(const std::string& bytes) {
  Cursor c(bytes);
  char magic[4];
  c.take(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("not an FCA-Net checkpoint");
  if (const auto v = c.u32(); v != kVersion) throw ConfigError("unsupported checkpoint version " + std::to_string(v));
  std::map<std::string, Stored> tensors;
  const std::uint32_t count = c.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = c.str();
    Stored s;
    s.dims.resize(c.u32());
    for (auto& d : s.dims) d = c.u32();
    s.values.resize(numerics::shape_numel(s.dims));
    c.take(s.values.data(), s.values.size() * 4);
    tensors.emplace(std::move(name), std::move(s));
  }
  const ModelConfig cfg = ModelConfig::from_kv(c.str());
  if (!c.done()) throw ConfigError("trailing bytes after checkpoint");
  return {std::move(tensors), cfg};
}

template <class V>
void assign(const std::map<std::string, Stored>& tensors, const std::string& name, const numerics::Shape& dims,
            V& dst) {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("checkpoint lacks tensor '" + name + "'");
  if (it->second.dims != dims) {
    throw ConfigError("checkpoint tensor '" + name + "' has shape " + numerics::shape_str(it->second.dims) +
                      ", network expects " + numerics::shape_str(dims));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<std::remove_reference_t<decltype(dst[i])>>(it->second.values[i]);
}

}  // namespace

template <std::floating_point T>
std::string serialize_checkpoint(const Network<T>& net) {
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(net.parameters().size() + 2 * net.batch_norms().size()));
  for (const auto& [name, t] : net.parameters()) put_tensor(out, name, t.dims(), t.values());
  for (const auto& [name, bn] : net.batch_norms()) {
    put_tensor(out, name + ".running_mean", {bn->channels()}, bn->running_mean);
    put_tensor(out, name + ".running_var", {bn->channels()}, bn->running_var);
  }
  const std::string cfg = net.config().to_kv();
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  return out;
}

template <std::floating_point T>
void restore_checkpoint(Network<T>& net, const std::string& bytes) {
  const auto [tensors, cfg] = parse(bytes);
  if (!(cfg == net.config())) throw ConfigError("checkpoint config does not match the network");
  const std::size_t expected = net.parameters().size() + 2 * net.batch_norms().size();
  if (tensors.size() != expected) throw ConfigError("checkpoint tensor count does not match the network");
  for (const auto& [name, t] : net.parameters()) {
    auto dst = Tensor<T>(t).mutable_values();
    assign(tensors, name, t.dims(), dst);
  }
  for (const auto& [name, bn] : net.batch_norms()) {
    assign(tensors, name + ".running_mean", {bn->channels()}, bn->running_mean);
    assign(tensors, name + ".running_var", {bn->channels()}, bn->running_var);
  }
}

ModelConfig checkpoint_config(const std::string& bytes) { return parse(bytes).second; }

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <std::floating_point T>
void save_checkpoint(const Network<T>& net, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(net);
  std::ofstream out(path, std::ios::binary);
  if (!out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw ConfigError("cannot write checkpoint " + path.string());
  }
}

template <std::floating_point T>
Network<T> load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  Network<T> net(checkpoint_config(bytes), 0);
  restore_checkpoint(net, bytes);
  return net;
}

#define FCANET_CHECKPOINT(T)                                                       \
  template std::string serialize_checkpoint<T>(const Network<T>&);                 \
  template void restore_checkpoint<T>(Network<T>&, const std::string&);            \
  template void save_checkpoint<T>(const Network<T>&, const std::filesystem::path&); \
  template Network<T> load_checkpoint<T>(const std::filesystem::path&);

FCANET_CHECKPOINT(float)
FCANET_CHECKPOINT(double)

}  // namespace fcanet::model
