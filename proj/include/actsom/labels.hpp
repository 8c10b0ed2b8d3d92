#pragma once

// Concept labels: which examples belong to which concept. Labels come either
// from a CSV of (example_id, concept) rows or from clustering a continuous
// target into contiguous groups.

#include <actsom/error.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace actsom {

struct ConceptLabeling {
  std::map<std::string, std::set<std::size_t>> membership;

  [[nodiscard]] std::vector<std::string> concepts() const {
    std::vector<std::string> out;
    out.reserve(membership.size());
    for (const auto& [name, _] : membership) out.push_back(name);
    return out;
  }

  [[nodiscard]] bool empty() const noexcept { return membership.empty(); }

  void add(std::size_t example, const std::string& concept_id) { membership[concept_id].insert(example); }

  /// Every member index must address an example of the joined dataset.
  void check_range(std::size_t n_examples) const {
    for (const auto& [name, members] : membership) {
      if (!members.empty() && *members.rbegin() >= n_examples) {
        fail(ErrorKind::index, "concept '" + name + "' references example " + std::to_string(*members.rbegin()) +
                                   " but the dataset has " + std::to_string(n_examples) + " examples");
      }
    }
  }

  /// Adds every concept of `other`; concept names must not collide.
  void merge(const ConceptLabeling& other) {
    for (const auto& [name, members] : other.membership) {
      if (membership.contains(name)) fail(ErrorKind::consistency, "duplicate concept '" + name + "'");
      membership.emplace(name, members);
    }
  }

  bool operator==(const ConceptLabeling&) const = default;
};

namespace detail {

inline std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Parses `example_id,concept` CSV. Duplicate rows collapse.
inline ConceptLabeling parse_labels(std::istream& in) {
  ConceptLabeling labels;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) return labels;
  ++line_no;
  if (detail::trim_cr(line) != "example_id,concept") {
    fail(ErrorKind::parse, "line 1: expected header 'example_id,concept'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = detail::trim_cr(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (comma == std::string_view::npos) fail(ErrorKind::parse, where + "missing ',' separator");
    const std::string_view id_text = row.substr(0, comma);
    const std::string_view concept_id = row.substr(comma + 1);
    std::size_t id = 0;
    const auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (id_text.empty() || ec != std::errc() || ptr != id_text.data() + id_text.size()) {
      fail(ErrorKind::parse, where + "example_id '" + std::string(id_text) + "' is not a non-negative integer");
    }
    if (concept_id.empty()) fail(ErrorKind::parse, where + "empty concept");
    labels.add(id, std::string(concept_id));
  }
  return labels;
}

inline ConceptLabeling read_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open labels file '" + path.string() + "'");
  try {
    return parse_labels(in);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " in '" + path.string() + "'");
  }
}

/// One real target per line; a single non-numeric first line is taken as a header.
inline std::vector<double> parse_targets(std::istream& in) {
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view s = detail::trim_cr(line);
    if (s.empty()) continue;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      if (line_no == 1) continue;
      fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": '" + std::string(s) + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

inline std::vector<double> read_targets(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open target file '" + path.string() + "'");
  return parse_targets(in);
}

struct KMeansOptions {
  std::size_t max_iterations = 300;
  bool normalize = false;  // min-max scale targets before clustering
};

/// 1-D Lloyd's k-means with centers seeded at the (i + 0.5) / k quantiles of
/// the sorted targets. Concepts are named cluster_0..cluster_{k-1} in order of
/// ascending center; an assignment tie goes to the lower-indexed center.
///
/// Initialization is deterministic, so `seed` only exists to keep the call
/// signature stable if a randomized init is ever added; it does not affect
/// the result.
inline ConceptLabeling kmeans_discretize(std::span<const double> targets, std::size_t k, std::uint64_t seed = 0,
                                         KMeansOptions options = {}) {
  (void)seed;
  if (k < 1) fail(ErrorKind::invalid_input, "k must be >= 1");
  if (targets.size() < k) fail(ErrorKind::invalid_input, "fewer targets than clusters");
  if (!std::all_of(targets.begin(), targets.end(), [](double v) { return std::isfinite(v); })) {
    fail(ErrorKind::invalid_input, "targets must be finite");
  }

  std::vector<double> values(targets.begin(), targets.end());
  if (options.normalize) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double low = *lo;
    const double span = *hi - *lo;
    if (span > 0.0) {
      for (double& v : values) v = (v - low) / span;
    }
  }

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) distinct += sorted[i] != sorted[i - 1] ? 1 : 0;
  if (k > distinct) {
    fail(ErrorKind::invalid_input, "degenerate clustering: k = " + std::to_string(k) + " exceeds " +
                                       std::to_string(distinct) + " distinct values");
  }

  const std::size_t n = values.size();
  std::vector<double> centers(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(k);
    centers[i] = sorted[std::min(n - 1, static_cast<std::size_t>(q * static_cast<double>(n)))];
  }

  auto nearest = [&](double v) {
    std::size_t best = 0;
    double best_d = std::abs(v - centers[0]);
    for (std::size_t c = 1; c < k; ++c) {
      const double d = std::abs(v - centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  };

  std::vector<std::size_t> assign(n, k);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest(values[i]);
      changed |= c != assign[i];
      assign[i] = c;
    }
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[assign[i]] += values[i];
      ++count[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        centers[c] = sum[c] / static_cast<double>(count[c]);
        continue;
      }
      // Empty cluster (duplicate quantile seeds): reseed at the worst-fit point
      // that does not coincide with an existing center.
      std::size_t worst = n;
      double worst_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(values[i] - centers[assign[i]]);
        if (d > worst_d && std::find(centers.begin(), centers.end(), values[i]) == centers.end()) {
          worst_d = d;
          worst = i;
        }
      }
      if (worst < n) centers[c] = values[worst];
      changed = true;
    }
    if (!changed) break;
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
  std::vector<std::size_t> rank_of(k);
  for (std::size_t r = 0; r < k; ++r) rank_of[order[r]] = r;

  ConceptLabeling labels;
  for (std::size_t i = 0; i < n; ++i) labels.add(i, "cluster_" + std::to_string(rank_of[assign[i]]));
  return labels;
}

}  // namespace actsom
