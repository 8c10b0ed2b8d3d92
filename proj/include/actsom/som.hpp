#pragma once

// Self-organizing map over cosine distance with a Mexican-hat neighborhood.
//
// Units live on a height x width lattice addressed by (row, col); the linear
// index row * width + col orders units for tie-breaking and storage.

#include <actsom/activations.hpp>
#include <actsom/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace actsom {

struct SomConfig {
  std::size_t width = 15;
  std::size_t height = 15;
  double sigma0 = 8.0;
  double learning_rate0 = 0.5;
  std::size_t n_iterations = 1000;
  std::uint64_t seed = 0;
  bool decay_sigma = true;  // false keeps sigma fixed at sigma0

  void validate() const {
    if (width < 1 || height < 1) fail(ErrorKind::invalid_input, "grid must be at least 1x1");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) fail(ErrorKind::invalid_input, "sigma0 must be > 0");
    if (!(learning_rate0 > 0.0) || !std::isfinite(learning_rate0)) {
      fail(ErrorKind::invalid_input, "learning_rate0 must be > 0");
    }
    if (n_iterations < 1) fail(ErrorKind::invalid_input, "n_iterations must be >= 1");
  }

  bool operator==(const SomConfig&) const = default;
};

struct GridCoord {
  std::size_t row = 0;
  std::size_t col = 0;

  bool operator==(const GridCoord&) const = default;
};

struct SomGrid {
  SomConfig config;
  std::size_t dim = 0;
  std::vector<double> weights;  // height * width * dim, row-major

  [[nodiscard]] std::size_t unit_count() const noexcept { return config.width * config.height; }

  [[nodiscard]] std::size_t linear_index(GridCoord c) const noexcept { return c.row * config.width + c.col; }

  [[nodiscard]] GridCoord coord(std::size_t linear) const noexcept {
    return {linear / config.width, linear % config.width};
  }

  [[nodiscard]] std::span<const double> weight(std::size_t linear) const {
    return std::span<const double>(weights).subspan(linear * dim, dim);
  }
  [[nodiscard]] std::span<double> weight(std::size_t linear) {
    return std::span<double>(weights).subspan(linear * dim, dim);
  }
  [[nodiscard]] std::span<const double> weight(GridCoord c) const { return weight(linear_index(c)); }

  bool operator==(const SomGrid&) const = default;
};

namespace detail {

inline constexpr double kMinWeightNorm = 1e-12;
inline constexpr std::uint64_t kSamplingStream = 0x9e3779b97f4a7c15ULL;

/// [0, 1) with 53 random bits; mt19937_64 output is fully specified, so grids
/// are reproducible across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased draw from [0, n) by rejection.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r = 0;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

inline double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline void require_dim(const SomGrid& grid, std::size_t n) {
  if (n != grid.dim) {
    fail(ErrorKind::shape, "input has dimension " + std::to_string(n) + ", grid expects " + std::to_string(grid.dim));
  }
}

}  // namespace detail

/// Random unit-norm weights, uniform on [-1, 1) per component before scaling.
inline SomGrid init_som(const SomConfig& config, std::size_t dim) {
  config.validate();
  if (dim == 0) fail(ErrorKind::invalid_input, "invalid dimension 0");

  SomGrid grid{config, dim, std::vector<double>(config.width * config.height * dim)};
  std::mt19937_64 rng(config.seed);
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    auto w = grid.weight(u);
    double n = 0.0;
    // A draw of exactly zero in every component is astronomically unlikely
    // but would leave the cosine undefined, so redraw.
    while (n < detail::kMinWeightNorm) {
      for (double& c : w) c = 2.0 * detail::unit_uniform(rng) - 1.0;
      n = detail::norm(w);
    }
    for (double& c : w) c /= n;
  }
  return grid;
}

/// 1 - cos(x, w), in [0, 2]. A zero-norm operand yields 1.
inline double cosine_dist(std::span<const double> x, std::span<const double> w) {
  if (x.size() != w.size()) {
    fail(ErrorKind::shape, "length mismatch " + std::to_string(x.size()) + " vs " + std::to_string(w.size()));
  }
  double dot = 0.0;
  double xx = 0.0;
  double ww = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    dot += x[k] * w[k];
    xx += x[k] * x[k];
    ww += w[k] * w[k];
  }
  if (xx == 0.0 || ww == 0.0) return 1.0;
  const double d = 1.0 - dot / (std::sqrt(xx) * std::sqrt(ww));
  return std::clamp(d, 0.0, 2.0);
}

/// Best matching unit as a linear index; lowest index wins ties.
inline std::size_t bmu_index(const SomGrid& grid, std::span<const double> x) {
  detail::require_dim(grid, x.size());
  if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) {
    fail(ErrorKind::invalid_input, "input vector has non-finite components");
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    const double d = cosine_dist(x, grid.weight(u));
    if (d < best_d) {
      best_d = d;
      best = u;
    }
  }
  return best;
}

inline GridCoord bmu(const SomGrid& grid, std::span<const double> x) { return grid.coord(bmu_index(grid, x)); }

/// h(p) = exp(-p / (2 sigma^2)) * (1 - p / sigma^2) for squared lattice
/// distance p; row-major height x width.
inline std::vector<double> neighborhood_mexican_hat(std::size_t width, std::size_t height, GridCoord center,
                                                    double sigma) {
  if (!(sigma > 0.0)) fail(ErrorKind::invalid_input, "sigma must be > 0");
  const double s2 = sigma * sigma;
  std::vector<double> h(width * height);
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const double di = static_cast<double>(i) - static_cast<double>(center.row);
      const double dj = static_cast<double>(j) - static_cast<double>(center.col);
      const double p = di * di + dj * dj;
      h[i * width + j] = std::exp(-p / (2.0 * s2)) * (1.0 - p / s2);
    }
  }
  return h;
}

/// f0 / (1 + 2t / T): halves at t = T/2, reaches f0/3 at t = T.
inline double decayed(double initial, std::size_t t, std::size_t n_iterations) {
  return initial / (1.0 + 2.0 * static_cast<double>(t) / static_cast<double>(n_iterations));
}

/// One competitive-learning update toward x at step t.
inline void train_step(SomGrid& grid, std::span<const double> x, std::size_t t) {
  const SomConfig& cfg = grid.config;
  const double eta = decayed(cfg.learning_rate0, t, cfg.n_iterations);
  const double sigma = cfg.decay_sigma ? decayed(cfg.sigma0, t, cfg.n_iterations) : cfg.sigma0;
  const GridCoord winner = bmu(grid, x);
  const std::vector<double> h = neighborhood_mexican_hat(cfg.width, cfg.height, winner, sigma);

  std::vector<double> previous(grid.dim);
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    const double g = eta * h[u];
    if (g == 0.0) continue;
    auto w = grid.weight(u);
    std::copy(w.begin(), w.end(), previous.begin());
    for (std::size_t k = 0; k < grid.dim; ++k) w[k] += g * (x[k] - w[k]);

    const double n = detail::norm(w);
    if (!(n >= detail::kMinWeightNorm) || !std::isfinite(n)) {
      // Collapsed (or overflowed) weight: fall back to the pre-update direction.
      const double pn = detail::norm(previous);
      for (std::size_t k = 0; k < grid.dim; ++k) w[k] = previous[k] / pn;
    }
  }
}

inline void require_examples(const ActivationSet& data) {
  if (data.n_examples() == 0 || data.values.empty()) fail(ErrorKind::empty_input, "no examples");
}

/// Runs n_iterations steps on examples drawn uniformly with the grid's seed.
inline void train(SomGrid& grid, const ActivationSet& data) {
  require_examples(data);
  detail::require_dim(grid, data.dim());
  std::mt19937_64 rng(grid.config.seed ^ detail::kSamplingStream);
  for (std::size_t t = 0; t < grid.config.n_iterations; ++t) {
    train_step(grid, data.row(detail::uniform_index(rng, data.n_examples())), t);
  }
}

/// Mean cosine distance from each example to its BMU weight.
inline double quantization_error(const SomGrid& grid, const ActivationSet& data) {
  require_examples(data);
  detail::require_dim(grid, data.dim());
  double total = 0.0;
  for (std::size_t i = 0; i < data.n_examples(); ++i) {
    const auto x = data.row(i);
    total += cosine_dist(x, grid.weight(bmu_index(grid, x)));
  }
  return total / static_cast<double>(data.n_examples());
}

}  // namespace actsom
