#include "catgeo/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace catgeo {

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <typename T>
  void put(T v) {
    std::uint64_t bits = 0;
    if constexpr (std::is_floating_point_v<T>) {
      bits = std::bit_cast<std::uint64_t>(static_cast<double>(v));
    } else {
      bits = static_cast<std::uint64_t>(v);
    }
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
    os_.write(reinterpret_cast<const char*>(buf), sizeof(T));
  }
  void raw(const char* p, std::size_t n) { os_.write(p, static_cast<std::streamsize>(n)); }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}
  template <typename T>
  T get() {
    unsigned char buf[sizeof(T)];
    if (!is_.read(reinterpret_cast<char*>(buf), sizeof(T)))
      throw FormatError("truncated checkpoint", offset_);
    offset_ += sizeof(T);
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t(buf[i]) << (8 * i);
    if constexpr (std::is_floating_point_v<T>) {
      return std::bit_cast<double>(bits);
    } else {
      return static_cast<T>(bits);
    }
  }
  std::uint64_t offset() const { return offset_; }

 private:
  std::istream& is_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const Network& net, std::ostream& os) {
  Writer w(os);
  w.raw("CGL1", 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(net.seed());
  const Shape in = net.input_shape();
  w.put<std::uint32_t>(std::uint32_t(in.h));
  w.put<std::uint32_t>(std::uint32_t(in.w));
  w.put<std::uint32_t>(std::uint32_t(in.c));
  w.put<std::uint32_t>(in.spatial ? 1u : 0u);
  w.put<std::uint32_t>(std::uint32_t(net.depth()));
  for (const auto& L : net.layers()) {
    const LayerSpec& s = L.spec;
    w.put<std::uint32_t>(std::uint32_t(s.kind));
    w.put<std::int32_t>(s.units);
    w.put<std::int32_t>(s.kernel_h);
    w.put<std::int32_t>(s.kernel_w);
    w.put<std::int32_t>(s.stride);
    w.put<std::uint32_t>(std::uint32_t(s.padding));
    w.put<std::int32_t>(s.pool);
    w.put<std::uint32_t>(std::uint32_t(s.activation));
    w.put<std::uint32_t>(std::uint32_t(s.noise.kind));
    w.put<double>(s.noise.rate);
    w.put<std::uint64_t>(std::uint64_t(L.weights.rows()));
    w.put<std::uint64_t>(std::uint64_t(L.weights.cols()));
    w.put<std::uint64_t>(std::uint64_t(L.bias.size()));
  }
  for (const auto& L : net.layers()) {
    for (Index i = 0; i < L.weights.size(); ++i) w.put<double>(L.weights.data()[i]);
    for (Index i = 0; i < L.bias.size(); ++i) w.put<double>(L.bias.data()[i]);
  }
  if (!os) throw std::runtime_error("failed to write checkpoint");
}

void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  save_checkpoint(net, os);
}

Network load_checkpoint(std::istream& is) {
  Reader r(is);
  char magic[4];
  for (char& c : magic) c = static_cast<char>(r.get<std::uint8_t>());
  if (std::memcmp(magic, "CGL1", 4) != 0) throw FormatError("bad checkpoint magic", 0);
  if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(v), 4);
  const auto seed = r.get<std::uint64_t>();
  Shape in;
  in.h = int(r.get<std::uint32_t>());
  in.w = int(r.get<std::uint32_t>());
  in.c = int(r.get<std::uint32_t>());
  in.spatial = r.get<std::uint32_t>() != 0;
  const auto n_layers = r.get<std::uint32_t>();
  std::vector<LayerSpec> specs;
  std::vector<std::array<std::uint64_t, 3>> dims;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    const std::uint64_t at = r.offset();
    LayerSpec s;
    const auto kind = r.get<std::uint32_t>();
    if (kind > std::uint32_t(LayerKind::Identity)) throw FormatError("bad layer kind", at);
    s.kind = LayerKind(kind);
    s.units = r.get<std::int32_t>();
    s.kernel_h = r.get<std::int32_t>();
    s.kernel_w = r.get<std::int32_t>();
    s.stride = r.get<std::int32_t>();
    s.padding = Padding(r.get<std::uint32_t>());
    s.pool = r.get<std::int32_t>();
    const auto act = r.get<std::uint32_t>();
    const auto noise = r.get<std::uint32_t>();
    if (act > std::uint32_t(Activation::Softmax) || noise > std::uint32_t(NoiseKind::Gaussian))
      throw FormatError("bad activation or noise tag", at);
    s.activation = Activation(act);
    s.noise.kind = NoiseKind(noise);
    s.noise.rate = r.get<double>();
    dims.push_back({r.get<std::uint64_t>(), r.get<std::uint64_t>(), r.get<std::uint64_t>()});
    specs.push_back(s);
  }
  Network net;
  try {
    net = Network::build(specs, in, seed);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("inconsistent layer table: ") + e.what(), r.offset());
  }
  for (int l = 0; l < net.depth(); ++l) {
    Layer& L = net.layer(l);
    const auto& d = dims[static_cast<std::size_t>(l)];
    if (d[0] != std::uint64_t(L.weights.rows()) || d[1] != std::uint64_t(L.weights.cols()) ||
        d[2] != std::uint64_t(L.bias.size()))
      throw FormatError("parameter shape mismatch in layer " + std::to_string(l), r.offset());
    for (Index i = 0; i < L.weights.size(); ++i) L.weights.data()[i] = r.get<double>();
    for (Index i = 0; i < L.bias.size(); ++i) L.bias.data()[i] = r.get<double>();
  }
  return net;
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_checkpoint(is);
}

}  // namespace catgeo
