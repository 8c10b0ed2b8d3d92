#pragma once

#include <actsom/activations.hpp>
#include <actsom/error.hpp>
#include <actsom/labels.hpp>
#include <actsom/som.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace actsom {

/// Winning-unit tallies over one trained SOM.
struct FrequencyMap {
  enum class Kind { base, concept_map };

  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint64_t> counts;  // height * width, row-major
  std::uint64_t total = 0;
  Kind kind = Kind::base;
  std::optional<std::string> concept_id;
  std::string layer_name;

  [[nodiscard]] std::uint64_t at(std::size_t row, std::size_t col) const { return counts[row * width + col]; }

  bool operator==(const FrequencyMap&) const = default;
};

inline const char* to_string(FrequencyMap::Kind kind) noexcept {
  return kind == FrequencyMap::Kind::base ? "base" : "concept";
}

/// Tallies BMUs of every example. The grid itself is not modified.
inline FrequencyMap populate(const SomGrid& grid, const ActivationSet& data) {
  require_examples(data);
  if (data.dim() != grid.dim) {
    fail(ErrorKind::shape, "data dimension " + std::to_string(data.dim()) + " does not match grid dimension " +
                               std::to_string(grid.dim));
  }
  FrequencyMap fmap;
  fmap.width = grid.config.width;
  fmap.height = grid.config.height;
  fmap.counts.assign(grid.unit_count(), 0);
  fmap.layer_name = data.layer_name;
  for (std::size_t i = 0; i < data.n_examples(); ++i) ++fmap.counts[bmu_index(grid, data.row(i))];
  fmap.total = data.n_examples();
  return fmap;
}

inline FrequencyMap populate_concept(const SomGrid& grid, const ActivationSet& data, const std::string& concept_id) {
  FrequencyMap fmap = populate(grid, data);
  fmap.kind = FrequencyMap::Kind::concept_map;
  fmap.concept_id = concept_id;
  return fmap;
}

/// Rows of `data` belonging to `concept_id`, in original order.
inline ActivationSet subset(const ActivationSet& data, const ConceptLabeling& labeling, const std::string& concept_id) {
  const auto it = labeling.membership.find(concept_id);
  if (it == labeling.membership.end()) fail(ErrorKind::lookup, "unknown concept '" + concept_id + "'");
  const auto& members = it->second;
  const std::size_t d = data.dim();
  ActivationSet out{data.layer_name, data.shape, {}};
  out.shape[0] = members.size();
  out.values.reserve(members.size() * d);
  for (std::size_t idx : members) {
    if (idx >= data.n_examples()) {
      fail(ErrorKind::index, "concept '" + concept_id + "' member " + std::to_string(idx) + " out of range (" +
                                 std::to_string(data.n_examples()) + " examples)");
    }
    const auto row = data.row(idx);
    out.values.insert(out.values.end(), row.begin(), row.end());
  }
  return out;
}

/// Counts divided by total, row-major.
inline std::vector<double> probabilities(const FrequencyMap& fmap) {
  if (fmap.total == 0) fail(ErrorKind::empty_input, "empty frequency map");
  std::vector<double> p(fmap.counts.size());
  const auto total = static_cast<double>(fmap.total);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(fmap.counts[i]) / total;
  return p;
}

}  // namespace actsom
