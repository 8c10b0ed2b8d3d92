#pragma once

// Everything downstream of scoring: heatmap rendering, layer-trend verdicts,
// per-layer concept rankings, and the JSON/CSV report files.

#include <actsom/error.hpp>
#include <actsom/frequency_map.hpp>
#include <actsom/io.hpp>
#include <actsom/measures.hpp>
#include <actsom/png.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace actsom {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr std::size_t kHeatmapCellPixels = 32;

// ---- Heatmaps -------------------------------------------------------------

/// One kCellPixels square per unit; value 255 * (1 - count / max_count), so the
/// busiest unit is black and unused units are white.
inline GrayImage heatmap_image(const FrequencyMap& fmap, std::size_t cell = kHeatmapCellPixels) {
  if (fmap.total == 0) fail(ErrorKind::empty_input, "cannot render an empty frequency map");
  const std::uint64_t max_count = *std::max_element(fmap.counts.begin(), fmap.counts.end());
  GrayImage img{fmap.width * cell, fmap.height * cell, {}};
  img.pixels.resize(img.width * img.height);
  for (std::size_t i = 0; i < fmap.height; ++i) {
    for (std::size_t j = 0; j < fmap.width; ++j) {
      const double ratio = static_cast<double>(fmap.at(i, j)) / static_cast<double>(max_count);
      const auto shade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - ratio)));
      for (std::size_t y = i * cell; y < (i + 1) * cell; ++y) {
        std::fill_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(y * img.width + j * cell), cell, shade);
      }
    }
  }
  return img;
}

inline void render_heatmap(const FrequencyMap& fmap, const std::filesystem::path& path) {
  write_png(path, heatmap_image(fmap));
}

/// Escapes everything except [A-Za-z0-9._-] as %XX.
inline std::string percent_encode(const std::string& s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char ch : s) {
    if (std::isalnum(ch) || ch == '.' || ch == '_' || ch == '-') {
      out.push_back(static_cast<char>(ch));
    } else {
      out.push_back('%');
      out.push_back(kHex[ch >> 4]);
      out.push_back(kHex[ch & 0xf]);
    }
  }
  return out;
}

/// `<layer>__<concept>` or `<layer>__BASE`, without extension.
inline std::string map_stem(const std::string& layer, const std::optional<std::string>& concept_id) {
  return percent_encode(layer) + "__" + (concept_id ? percent_encode(*concept_id) : std::string("BASE"));
}

// ---- Layer trend ------------------------------------------------------------

enum class Verdict { supports, violates, mixed };

inline const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::supports: return "supports";
    case Verdict::violates: return "violates";
    case Verdict::mixed: return "mixed";
  }
  return "";
}

inline Verdict parse_verdict(const std::string& s) {
  if (s == "supports") return Verdict::supports;
  if (s == "violates") return Verdict::violates;
  if (s == "mixed") return Verdict::mixed;
  fail(ErrorKind::format, "unknown verdict '" + s + "'");
}

struct MonotonicityResult {
  Verdict verdict = Verdict::mixed;
  double spearman_rho = 0.0;

  bool operator==(const MonotonicityResult&) const = default;
};

/// 1-based ranks, ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation of the average ranks; 0 when either side is constant.
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// `series` is ordered input layer -> output layer. Non-decreasing supports
/// the expectation that the concept sharpens toward the output; a
/// non-increasing, non-constant series violates it.
inline MonotonicityResult monotonicity_check(std::span<const double> series) {
  if (series.size() < 2) fail(ErrorKind::invalid_input, "need at least 2 layers");
  for (double v : series) {
    if (!std::isfinite(v)) fail(ErrorKind::domain, "series has non-finite values");
  }
  bool nondecreasing = true;
  bool nonincreasing = true;
  for (std::size_t i = 1; i < series.size(); ++i) {
    nondecreasing &= series[i] >= series[i - 1];
    nonincreasing &= series[i] <= series[i - 1];
  }
  std::vector<double> depth(series.size());
  std::iota(depth.begin(), depth.end(), 0.0);

  MonotonicityResult r;
  r.verdict = nondecreasing ? Verdict::supports : nonincreasing ? Verdict::violates : Verdict::mixed;
  r.spearman_rho = spearman_rho(series, depth);
  return r;
}

// ---- Rankings ---------------------------------------------------------------

/// Concepts by descending value for one (layer, measure); ties by concept id.
inline std::vector<std::string> rank_concepts(std::span<const MeasureValue> values, const std::string& layer,
                                              Measure measure) {
  std::vector<const MeasureValue*> picked;
  for (const auto& v : values) {
    if (v.layer_name == layer && v.measure == measure) picked.push_back(&v);
  }
  if (picked.empty()) {
    fail(ErrorKind::empty_input, std::string("no ") + to_string(measure) + " values for layer '" + layer + "'");
  }
  std::sort(picked.begin(), picked.end(), [](const MeasureValue* a, const MeasureValue* b) {
    if (a->value != b->value) return a->value > b->value;
    return a->concept_id < b->concept_id;
  });
  std::vector<std::string> out;
  out.reserve(picked.size());
  for (const auto* v : picked) out.push_back(v->concept_id);
  return out;
}

// ---- Report -----------------------------------------------------------------

struct HypothesisResult {
  Measure measure = Measure::relative_entropy;
  std::string concept_id;
  MonotonicityResult result;

  bool operator==(const HypothesisResult&) const = default;
};

struct Ranking {
  std::string layer_name;
  Measure measure = Measure::relative_entropy;
  std::vector<std::string> concepts;

  bool operator==(const Ranking&) const = default;
};

struct MeasureReport {
  std::string tool_version = kToolVersion;
  std::vector<std::string> layers;
  std::vector<std::string> concepts;
  std::vector<MeasureValue> values;
  std::vector<HypothesisResult> hypothesis_results;
  std::vector<Ranking> rankings;
  nlohmann::json config = nlohmann::json::object();  // run settings and seeds, echoed verbatim

  bool operator==(const MeasureReport&) const = default;
};

/// Derives verdicts and rankings from scored values. Verdicts need at least
/// two layers and only cover fully finite series.
inline MeasureReport build_report(std::vector<std::string> layers, std::vector<MeasureValue> values,
                                  nlohmann::json config = nlohmann::json::object()) {
  MeasureReport report;
  report.layers = std::move(layers);
  report.values = std::move(values);
  report.config = std::move(config);

  std::set<std::string> concepts;
  for (const auto& v : report.values) {
    if (std::find(report.layers.begin(), report.layers.end(), v.layer_name) == report.layers.end()) {
      fail(ErrorKind::consistency, "value for unknown layer '" + v.layer_name + "'");
    }
    concepts.insert(v.concept_id);
  }
  report.concepts.assign(concepts.begin(), concepts.end());

  for (Measure m : kAllMeasures) {
    for (const auto& c : report.concepts) {
      std::vector<double> series;
      for (const auto& layer : report.layers) {
        for (const auto& v : report.values) {
          if (v.measure == m && v.concept_id == c && v.layer_name == layer) series.push_back(v.value);
        }
      }
      if (series.size() < 2 || series.size() != report.layers.size()) continue;
      if (!std::all_of(series.begin(), series.end(), [](double x) { return std::isfinite(x); })) continue;
      report.hypothesis_results.push_back(HypothesisResult{m, c, monotonicity_check(series)});
    }
  }

  for (const auto& layer : report.layers) {
    for (Measure m : kAllMeasures) {
      const bool any = std::any_of(report.values.begin(), report.values.end(), [&](const MeasureValue& v) {
        return v.layer_name == layer && v.measure == m;
      });
      if (any) report.rankings.push_back(Ranking{layer, m, rank_concepts(report.values, layer, m)});
    }
  }
  return report;
}

inline nlohmann::json report_to_json(const MeasureReport& report) {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& v : report.values) {
    values.push_back({
        {"layer", v.layer_name},
        {"concept", v.concept_id},
        {"measure", to_string(v.measure)},
        {"value", v.point_mass() ? nlohmann::json(nullptr) : nlohmann::json(v.value)},
        {"point_mass", v.point_mass()},
        {"z_value", v.z_value ? nlohmann::json(*v.z_value) : nlohmann::json(nullptr)},
    });
  }
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& h : report.hypothesis_results) {
    verdicts.push_back({
        {"measure", to_string(h.measure)},
        {"concept", h.concept_id},
        {"verdict", to_string(h.result.verdict)},
        {"spearman_rho", h.result.spearman_rho},
    });
  }
  nlohmann::json rankings = nlohmann::json::array();
  for (const auto& r : report.rankings) {
    rankings.push_back({{"layer", r.layer_name}, {"measure", to_string(r.measure)}, {"concepts", r.concepts}});
  }
  return nlohmann::json{
      {"format", "actsom-report"},
      {"version", 1},
      {"tool_version", report.tool_version},
      {"log_base", "e"},
      {"layers", report.layers},
      {"concepts", report.concepts},
      {"values", std::move(values)},
      {"hypothesis", std::move(verdicts)},
      {"rankings", std::move(rankings)},
      {"config", report.config},
  };
}

inline MeasureReport report_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "actsom-report") fail(ErrorKind::format, "not a report document");
    MeasureReport report;
    report.tool_version = doc.at("tool_version").get<std::string>();
    report.layers = doc.at("layers").get<std::vector<std::string>>();
    report.concepts = doc.at("concepts").get<std::vector<std::string>>();
    for (const auto& v : doc.at("values")) {
      MeasureValue mv;
      mv.layer_name = v.at("layer").get<std::string>();
      mv.concept_id = v.at("concept").get<std::string>();
      mv.measure = parse_measure(v.at("measure").get<std::string>());
      mv.value = v.at("point_mass").get<bool>() ? std::numeric_limits<double>::infinity() : v.at("value").get<double>();
      if (!v.at("z_value").is_null()) mv.z_value = v.at("z_value").get<double>();
      report.values.push_back(std::move(mv));
    }
    for (const auto& h : doc.at("hypothesis")) {
      report.hypothesis_results.push_back(HypothesisResult{
          parse_measure(h.at("measure").get<std::string>()), h.at("concept").get<std::string>(),
          MonotonicityResult{parse_verdict(h.at("verdict").get<std::string>()), h.at("spearman_rho").get<double>()}});
    }
    for (const auto& r : doc.at("rankings")) {
      report.rankings.push_back(Ranking{r.at("layer").get<std::string>(),
                                        parse_measure(r.at("measure").get<std::string>()),
                                        r.at("concepts").get<std::vector<std::string>>()});
    }
    report.config = doc.at("config");
    return report;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("report document: ") + e.what());
  }
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

/// Flat table `layer,concept,measure,value,z_value`; an absent z is empty.
inline std::string report_to_csv(const MeasureReport& report) {
  std::string out = "layer,concept,measure,value,z_value\n";
  for (const auto& v : report.values) {
    out += detail::csv_field(v.layer_name) + ',' + detail::csv_field(v.concept_id) + ',' + to_string(v.measure) + ',' +
           format_double(v.value) + ',' + (v.z_value ? format_double(*v.z_value) : std::string()) + '\n';
  }
  return out;
}

/// Writes report.json and report.csv into `dir`.
inline void emit_report(const MeasureReport& report, const std::filesystem::path& dir) {
  if (report.values.empty()) fail(ErrorKind::empty_input, "report has no values");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create '" + dir.string() + "'");
  write_file_atomic(dir / "report.csv", report_to_csv(report));
  write_file_atomic(dir / "report.json", dump_json(report_to_json(report)));
}

}  // namespace actsom
