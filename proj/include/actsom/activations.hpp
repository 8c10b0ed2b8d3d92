#pragma once

// Per-layer activation tensors: the ACTV dump format and the reductions that
// turn rank > 2 dumps into one vector per example.
//
// ACTV layout (all little-endian):
//   "ACTV" | u32 version (=1) | u32 rank | rank x u32 shape | float32 payload
// The payload is row-major and shape[0] is the example count.

#include <actsom/error.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace actsom {

struct ActivationSet {
  std::string layer_name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  [[nodiscard]] std::size_t rank() const noexcept { return shape.size(); }
  [[nodiscard]] std::size_t n_examples() const noexcept { return shape.empty() ? 0 : shape[0]; }

  /// Width of one example's slice, i.e. the product of shape[1:].
  [[nodiscard]] std::size_t dim() const noexcept {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin() + 1, shape.end(), std::size_t{1}, std::multiplies<>());
  }

  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    const std::size_t d = dim();
    return std::span<const double>(values).subspan(i * d, d);
  }
};

/// Builds a rank-2 set from row-major values.
inline ActivationSet make_activation_set(std::string layer, std::size_t n_examples, std::size_t dim,
                                         std::vector<double> values) {
  if (values.size() != n_examples * dim) {
    fail(ErrorKind::shape, "expected " + std::to_string(n_examples * dim) + " values, got " +
                               std::to_string(values.size()));
  }
  return ActivationSet{std::move(layer), {n_examples, dim}, std::move(values)};
}

struct AggregationSpec {
  enum class Kind { none, mean, flatten };
  Kind kind = Kind::none;
  std::vector<std::size_t> axes;  // for mean; never contains 0

  static AggregationSpec mean(std::vector<std::size_t> axes) { return {Kind::mean, std::move(axes)}; }
  static AggregationSpec flatten() { return {Kind::flatten, {}}; }
};

inline const char* to_string(AggregationSpec::Kind kind) noexcept {
  switch (kind) {
    case AggregationSpec::Kind::none: return "none";
    case AggregationSpec::Kind::mean: return "mean";
    case AggregationSpec::Kind::flatten: return "flatten";
  }
  return "none";
}

inline AggregationSpec::Kind parse_aggregation_kind(const std::string& s) {
  if (s == "mean") return AggregationSpec::Kind::mean;
  if (s == "flatten") return AggregationSpec::Kind::flatten;
  if (s == "none" || s.empty()) return AggregationSpec::Kind::none;
  fail(ErrorKind::spec, "unknown aggregation kind '" + s + "'");
}

namespace detail {

inline constexpr std::array<char, 4> kActvMagic{'A', 'C', 'T', 'V'};
inline constexpr std::uint32_t kActvVersion = 1;

inline std::uint32_t load_u32_le(const unsigned char* p) noexcept {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

inline void store_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::io, "failed reading '" + path.string() + "'");
  return bytes;
}

}  // namespace detail

/// Decodes an in-memory ACTV buffer.
inline ActivationSet parse_actv(std::span<const unsigned char> bytes, std::string layer_name = {}) {
  using detail::load_u32_le;
  if (bytes.size() < 4 || !std::equal(detail::kActvMagic.begin(), detail::kActvMagic.end(), bytes.begin(),
                                      [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
    fail(ErrorKind::format, "bad magic, not an ACTV file");
  }
  if (bytes.size() < 12) fail(ErrorKind::corruption, "truncated ACTV header");
  const std::uint32_t version = load_u32_le(bytes.data() + 4);
  if (version != detail::kActvVersion) {
    fail(ErrorKind::format, "unsupported ACTV version " + std::to_string(version));
  }
  const std::uint32_t rank = load_u32_le(bytes.data() + 8);
  if (rank == 0) fail(ErrorKind::header, "rank 0");
  std::size_t offset = 12;
  if ((bytes.size() - offset) / 4 < rank) fail(ErrorKind::corruption, "truncated ACTV shape");

  ActivationSet set;
  set.layer_name = std::move(layer_name);
  set.shape.reserve(rank);
  const std::size_t max_count = (bytes.size() - offset - 4 * std::size_t{rank}) / 4;
  std::size_t count = 1;
  for (std::uint32_t r = 0; r < rank; ++r, offset += 4) {
    const std::size_t extent = load_u32_le(bytes.data() + offset);
    set.shape.push_back(extent);
    if (extent != 0 && count > max_count / extent) {
      fail(ErrorKind::corruption, "payload shorter than declared shape");
    }
    count *= extent;
  }
  if (set.shape[0] == 0) fail(ErrorKind::header, "zero examples");
  if (bytes.size() - offset != count * 4) {
    fail(ErrorKind::corruption, "payload holds " + std::to_string(bytes.size() - offset) + " bytes, shape needs " +
                                    std::to_string(count * 4));
  }
  set.values.resize(count);
  for (std::size_t i = 0; i < count; ++i, offset += 4) {
    set.values[i] = static_cast<double>(std::bit_cast<float>(load_u32_le(bytes.data() + offset)));
  }
  return set;
}

inline ActivationSet read_actv(const std::filesystem::path& path, std::string layer_name = {}) {
  const std::string bytes = detail::read_file_bytes(path);
  try {
    return parse_actv(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()),
                      std::move(layer_name));
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " in '" + path.string() + "'");
  }
}

/// Encodes values as float32; values outside float range saturate per IEEE conversion.
inline std::string encode_actv(const ActivationSet& set) {
  if (set.rank() == 0) fail(ErrorKind::header, "rank 0");
  std::string out(detail::kActvMagic.begin(), detail::kActvMagic.end());
  detail::store_u32_le(out, detail::kActvVersion);
  detail::store_u32_le(out, static_cast<std::uint32_t>(set.rank()));
  for (std::size_t extent : set.shape) detail::store_u32_le(out, static_cast<std::uint32_t>(extent));
  out.reserve(out.size() + 4 * set.values.size());
  for (double v : set.values) detail::store_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

inline void write_actv(const std::filesystem::path& path, const ActivationSet& set) {
  const std::string bytes = encode_actv(set);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "failed writing '" + path.string() + "'");
}

/// Reduces a dump to rank 2. `mean` averages out the listed axes (axis 0 is
/// the example axis and is always kept); `flatten` reshapes to (n, prod(rest)).
/// `none` only accepts sets that are already rank 1 or 2.
inline ActivationSet aggregate(const ActivationSet& a, const AggregationSpec& spec) {
  const std::size_t rank = a.rank();
  if (rank == 0) fail(ErrorKind::header, "rank 0");

  switch (spec.kind) {
    case AggregationSpec::Kind::none:
      if (rank > 2) {
        fail(ErrorKind::spec, "layer '" + a.layer_name + "' has rank " + std::to_string(rank) +
                                  " and needs an aggregation");
      }
      [[fallthrough]];
    case AggregationSpec::Kind::flatten:
      return ActivationSet{a.layer_name, {a.n_examples(), a.dim()}, a.values};
    case AggregationSpec::Kind::mean:
      break;
  }

  if (rank < 2) fail(ErrorKind::spec, "mean aggregation needs rank >= 2");
  if (spec.axes.empty()) fail(ErrorKind::spec, "mean aggregation needs at least one axis");
  std::vector<bool> reduced(rank, false);
  for (std::size_t axis : spec.axes) {
    if (axis == 0) fail(ErrorKind::spec, "axis 0 (examples) cannot be aggregated");
    if (axis >= rank) {
      fail(ErrorKind::spec, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
    }
    reduced[axis] = true;
  }

  // Output index of each input element: drop reduced axes, keep the rest in order.
  std::size_t out_dim = 1;
  std::size_t group = 1;
  for (std::size_t ax = 1; ax < rank; ++ax) (reduced[ax] ? group : out_dim) *= a.shape[ax];

  const std::size_t n = a.n_examples();
  const std::size_t in_dim = a.dim();
  std::vector<double> sums(n * out_dim, 0.0);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < a.values.size(); ++flat) {
    std::size_t out = 0;
    for (std::size_t ax = 1; ax < rank; ++ax) {
      if (!reduced[ax]) out = out * a.shape[ax] + idx[ax];
    }
    sums[(flat / in_dim) * out_dim + out] += a.values[flat];
    for (std::size_t ax = rank; ax-- > 0;) {
      if (++idx[ax] < a.shape[ax]) break;
      idx[ax] = 0;
    }
  }
  for (double& s : sums) s /= static_cast<double>(group);
  return ActivationSet{a.layer_name, {n, out_dim}, std::move(sums)};
}

}  // namespace actsom
