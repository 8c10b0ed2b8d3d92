#pragma once

// Scores of how strongly a concept is represented in one layer's SOM, given
// the concept's frequency map (tested distribution) and the layer's base map
// (reference distribution). Logs are natural.

#include <actsom/error.hpp>
#include <actsom/frequency_map.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace actsom {

enum class Measure { inverse_entropy, max_fm, cosine_distance, relative_entropy };

inline constexpr std::array<Measure, 4> kAllMeasures{Measure::inverse_entropy, Measure::max_fm,
                                                     Measure::cosine_distance, Measure::relative_entropy};

inline const char* to_string(Measure m) noexcept {
  switch (m) {
    case Measure::inverse_entropy: return "inverse_entropy";
    case Measure::max_fm: return "max_fm";
    case Measure::cosine_distance: return "cosine_distance";
    case Measure::relative_entropy: return "relative_entropy";
  }
  return "";
}

inline Measure parse_measure(const std::string& s) {
  for (Measure m : kAllMeasures) {
    if (s == to_string(m)) return m;
  }
  fail(ErrorKind::format, "unknown measure '" + s + "'");
}

struct MeasureValue {
  Measure measure = Measure::relative_entropy;
  std::string layer_name;
  std::string concept_id;
  double value = 0.0;  // +inf only for a point-mass inverse entropy
  std::optional<double> z_value;

  [[nodiscard]] bool point_mass() const noexcept { return std::isinf(value); }

  bool operator==(const MeasureValue&) const = default;
};

inline constexpr double kDefaultEpsilon = 1e-9;

namespace detail {

inline constexpr double kSumTolerance = 1e-9;

inline void require_distribution(std::span<const double> p, const char* what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::domain, std::string(what) + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    fail(ErrorKind::domain, std::string(what) + " sums to " + std::to_string(sum) + ", not 1");
  }
}

inline void require_same_length(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    fail(ErrorKind::shape, "distributions have lengths " + std::to_string(p.size()) + " and " + std::to_string(q.size()));
  }
}

}  // namespace detail

/// Shannon entropy with natural log, zero-probability terms skipped.
inline double entropy(std::span<const double> s) {
  double e = 0.0;
  for (double p : s) {
    if (p > 0.0) e -= p * std::log(p);
  }
  return e;
}

/// 1 / H(s); +inf for a point mass.
inline double inverse_entropy(std::span<const double> s) {
  detail::require_distribution(s, "distribution");
  const double e = entropy(s);
  if (e <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / e;
}

/// Best per-unit F1 when each unit is read as a retriever of concept examples:
/// precision c/b, recall c/concept_total.
inline double max_fmeasure(const FrequencyMap& concept_counts, const FrequencyMap& base_counts) {
  if (concept_counts.width != base_counts.width || concept_counts.height != base_counts.height ||
      concept_counts.counts.size() != base_counts.counts.size()) {
    fail(ErrorKind::shape, "concept and base maps have different grid dimensions");
  }
  if (concept_counts.total > base_counts.total) {
    fail(ErrorKind::consistency, "concept total exceeds base total");
  }
  if (concept_counts.total == 0) fail(ErrorKind::empty_input, "empty concept map");
  const auto concept_total = static_cast<double>(concept_counts.total);
  double best = 0.0;
  for (std::size_t u = 0; u < concept_counts.counts.size(); ++u) {
    const std::uint64_t c = concept_counts.counts[u];
    const std::uint64_t b = base_counts.counts[u];
    if (c > b) {
      fail(ErrorKind::consistency, "unit " + std::to_string(u) + " has more concept hits than base hits");
    }
    if (c == 0) continue;
    const double precision = static_cast<double>(c) / static_cast<double>(b);
    const double recall = static_cast<double>(c) / concept_total;
    best = std::max(best, 2.0 * precision * recall / (precision + recall));
  }
  return best;
}

/// 1 - cos(p, q) over probability vectors.
inline double cosine_distance_measure(std::span<const double> p, std::span<const double> q) {
  detail::require_same_length(p, q);
  detail::require_distribution(p, "p");
  detail::require_distribution(q, "q");
  double dot = 0.0;
  double pp = 0.0;
  double qq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    dot += p[i] * q[i];
    pp += p[i] * p[i];
    qq += q[i] * q[i];
  }
  if (pp == 0.0 || qq == 0.0) fail(ErrorKind::domain, "zero vector");
  return std::max(0.0, 1.0 - dot / (std::sqrt(pp) * std::sqrt(qq)));
}

/// KL(p || q) after additive smoothing of both sides:
/// x' = (x + eps) / (1 + n eps).
inline double relative_entropy(std::span<const double> p, std::span<const double> q,
                               double epsilon = kDefaultEpsilon) {
  detail::require_same_length(p, q);
  detail::require_distribution(p, "p");
  detail::require_distribution(q, "q");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail(ErrorKind::domain, "epsilon must be > 0");
  const double norm = 1.0 + static_cast<double>(p.size()) * epsilon;
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double ps = (p[i] + epsilon) / norm;
    const double qs = (q[i] + epsilon) / norm;
    kl += ps * std::log(ps / qs);
  }
  return std::max(0.0, kl);
}

/// Population z-scores; all zeros when the values are constant.
inline std::vector<double> standardize(std::span<const double> values) {
  if (values.size() < 2) fail(ErrorKind::invalid_input, "standardize needs at least 2 values");
  double mean = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::domain, "cannot standardize non-finite values");
    mean += v;
  }
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(values.size()));
  std::vector<double> z(values.size(), 0.0);
  if (sd > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - mean) / sd;
  }
  return z;
}

/// All four measures for every (layer, concept) pair, ordered by layer (as
/// given), then concept id, then measure. Each (measure, concept) series with
/// at least two finite values across layers gets z-scores; point-mass
/// inverse entropies stay unstandardized.
inline std::vector<MeasureValue> score_all(const std::vector<std::string>& layers,
                                           const std::map<std::string, FrequencyMap>& base_maps,
                                           const std::vector<FrequencyMap>& concept_maps,
                                           double epsilon = kDefaultEpsilon) {
  std::map<std::string, std::map<std::string, const FrequencyMap*>> by_layer;
  for (const auto& cm : concept_maps) {
    if (!cm.concept_id) fail(ErrorKind::consistency, "concept map without a concept id");
    if (!base_maps.contains(cm.layer_name)) {
      fail(ErrorKind::consistency, "no base map for layer '" + cm.layer_name + "'");
    }
    if (std::find(layers.begin(), layers.end(), cm.layer_name) == layers.end()) {
      fail(ErrorKind::consistency, "concept map for unknown layer '" + cm.layer_name + "'");
    }
    by_layer[cm.layer_name][*cm.concept_id] = &cm;
  }

  std::vector<MeasureValue> out;
  for (const auto& layer : layers) {
    const auto it = by_layer.find(layer);
    if (it == by_layer.end()) continue;
    const FrequencyMap& base = base_maps.at(layer);
    const std::vector<double> q = probabilities(base);
    for (const auto& [concept_id, cm] : it->second) {
      if (cm->width != base.width || cm->height != base.height) {
        fail(ErrorKind::consistency, "layer '" + layer + "' concept '" + concept_id + "' grid differs from base");
      }
      const std::vector<double> p = probabilities(*cm);
      for (Measure m : kAllMeasures) {
        double v = 0.0;
        switch (m) {
          case Measure::inverse_entropy: v = inverse_entropy(p); break;
          case Measure::max_fm: v = max_fmeasure(*cm, base); break;
          case Measure::cosine_distance: v = cosine_distance_measure(p, q); break;
          case Measure::relative_entropy: v = relative_entropy(p, q, epsilon); break;
        }
        out.push_back(MeasureValue{m, layer, concept_id, v, std::nullopt});
      }
    }
  }

  std::map<std::pair<Measure, std::string>, std::vector<MeasureValue*>> series;
  for (auto& mv : out) {
    if (!mv.point_mass()) series[{mv.measure, mv.concept_id}].push_back(&mv);
  }
  for (auto& [_, entries] : series) {
    if (entries.size() < 2) continue;
    std::vector<double> vals;
    for (const auto* e : entries) vals.push_back(e->value);
    const std::vector<double> z = standardize(vals);
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i]->z_value = z[i];
  }
  return out;
}

}  // namespace actsom
