#pragma once

// Bit-exact DBN model files.
//
//   magic "SSDBN\x01"
//   u32 layer count, f64 norm mean, f64 norm std
//   per layer: u32 type tag, u32 geometry fields, u32 array count,
//              arrays as (u32 name length, name, u32 rank, u64 dims..., f64 data...)
//
// All integers and floats are little-endian.

#include <string>
#include <vector>

#include "binary_io.hpp"
#include "data.hpp"
#include "dbn.hpp"

namespace tssrbm {

inline constexpr std::string_view kModelMagic{"SSDBN\x01", 6};

enum class LayerTag : std::uint32_t { ssrbm = 1, ssvis = 2, binary = 3 };

namespace detail {

struct ArraySpec {
  std::string name;
  std::vector<std::uint64_t> dims;
};

inline std::vector<ArraySpec> array_specs(const SsRbmParams& p) {
  const std::uint64_t q = p.num_filters(), k = p.kernel;
  return {{"W", {q, k, k}}, {"b", {q}}, {"mu", {q}}, {"alpha", {q}}, {"phi", {q}}, {"lambda", {1}}};
}
inline std::vector<ArraySpec> array_specs(const SsVisRbmParams& p) {
  const std::uint64_t f = p.filters, c = p.input_maps, k = p.kernel;
  return {{"U", {f, c, k, k}}, {"rho", {f}}, {"alpha", {c}}, {"mu", {c}}, {"b", {c}}};
}
inline std::vector<ArraySpec> array_specs(const BinaryRbmParams& p) {
  const std::uint64_t f = p.filters, c = p.input_maps, k = p.kernel;
  return {{"W", {f, c, k, k}}, {"vbias", {c}}, {"hbias", {f}}};
}

template <class P>
void write_arrays(bin::Writer& w, const P& p) {
  const auto specs = array_specs(p);
  w.u32(static_cast<std::uint32_t>(specs.size()));
  std::size_t i = 0;
  p.visit([&](std::string_view name, std::span<const double> a) {
    const ArraySpec& s = specs[i++];
    if (s.name != name) throw FormatError("array order mismatch while saving");
    w.str(name);
    w.u32(static_cast<std::uint32_t>(s.dims.size()));
    for (auto d : s.dims) w.u64(d);
    for (double x : a) w.f64(x);
  });
}

template <class P>
void read_arrays(bin::Reader& r, P& p) {
  const auto specs = array_specs(p);
  if (r.u32() != specs.size()) throw FormatError("unexpected array count");
  std::size_t i = 0;
  p.visit([&](std::string_view name, std::span<double> a) {
    const ArraySpec& s = specs[i++];
    if (r.str() != name) throw FormatError("unexpected array name, wanted '" + std::string(name) + "'");
    if (r.u32() != s.dims.size()) throw FormatError("unexpected rank for '" + std::string(name) + "'");
    for (auto d : s.dims) {
      if (r.u64() != d) throw FormatError("unexpected dimension for '" + std::string(name) + "'");
    }
    for (auto& x : a) x = r.f64();
  });
}

}  // namespace detail

inline std::string encode_model(const DbnModel& m) {
  m.validate();
  bin::Writer w;
  w.bytes(kModelMagic);
  w.u32(static_cast<std::uint32_t>(m.depth()));
  w.f64(m.norm_mean);
  w.f64(m.norm_std);
  w.u32(static_cast<std::uint32_t>(LayerTag::ssrbm));
  w.u32(static_cast<std::uint32_t>(m.layer1.kernel));
  w.u32(static_cast<std::uint32_t>(m.layer1.num_tilings));
  w.u32(static_cast<std::uint32_t>(m.layer1.filters_per_tiling));
  detail::write_arrays(w, m.layer1);
  if (m.layer2) {
    w.u32(static_cast<std::uint32_t>(LayerTag::ssvis));
    w.u32(static_cast<std::uint32_t>(m.layer2->input_maps));
    w.u32(static_cast<std::uint32_t>(m.layer2->kernel));
    w.u32(static_cast<std::uint32_t>(m.layer2->filters));
    w.u32(m.layer2->bias_shift ? 1U : 0U);
    detail::write_arrays(w, *m.layer2);
  }
  if (m.layer3) {
    w.u32(static_cast<std::uint32_t>(LayerTag::binary));
    w.u32(static_cast<std::uint32_t>(m.layer3->input_maps));
    w.u32(static_cast<std::uint32_t>(m.layer3->kernel));
    w.u32(static_cast<std::uint32_t>(m.layer3->filters));
    detail::write_arrays(w, *m.layer3);
  }
  return w.data();
}

inline DbnModel decode_model(const std::string& bytes) {
  bin::Reader r(bytes);
  if (bytes.size() < kModelMagic.size() || r.bytes(kModelMagic.size()) != kModelMagic) {
    throw VersionError("not a model file or unsupported format version");
  }
  const std::uint32_t layers = r.u32();
  if (layers < 1 || layers > 3) throw FormatError("layer count must be 1, 2 or 3");
  DbnModel m;
  m.norm_mean = r.f64();
  m.norm_std = r.f64();
  auto tag = [&](LayerTag want) {
    if (r.u32() != static_cast<std::uint32_t>(want)) throw FormatError("unexpected layer type tag");
  };
  auto dim = [&] {
    const std::uint32_t x = r.u32();
    if (x == 0 || x > (1u << 16)) throw FormatError("implausible geometry field");
    return static_cast<std::size_t>(x);
  };
  tag(LayerTag::ssrbm);
  const std::size_t k = dim(), t = dim(), f = dim();
  m.layer1 = make_ssrbm_params(k, t, f);
  detail::read_arrays(r, m.layer1);
  if (layers >= 2) {
    tag(LayerTag::ssvis);
    const std::size_t c = dim(), k2 = dim(), f2 = dim();
    SsVisRbmParams p = make_ssvis_params(c, k2, f2);
    const std::uint32_t shift = r.u32();
    if (shift > 1) throw FormatError("bias_shift flag must be 0 or 1");
    p.bias_shift = shift == 1;
    detail::read_arrays(r, p);
    m.layer2 = std::move(p);
  }
  if (layers >= 3) {
    tag(LayerTag::binary);
    const std::size_t c = dim(), k3 = dim(), f3 = dim();
    BinaryRbmParams p = make_brbm_params(c, k3, f3);
    detail::read_arrays(r, p);
    m.layer3 = std::move(p);
  }
  if (!r.done()) throw FormatError("trailing bytes in model file");
  m.validate();
  return m;
}

inline void save_model(const DbnModel& m, const std::string& path) { write_file(path, encode_model(m)); }
inline DbnModel load_model(const std::string& path) { return decode_model(read_file(path)); }

}  // namespace tssrbm
