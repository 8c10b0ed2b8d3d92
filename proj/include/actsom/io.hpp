#pragma once

// JSON persistence for trained grids and frequency maps, plus small file
// helpers shared by the pipeline stages.

#include <actsom/error.hpp>
#include <actsom/frequency_map.hpp>
#include <actsom/som.hpp>

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>

namespace actsom {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Writes through a sibling temp file and renames, so readers never observe a
/// half-written document.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) fail(ErrorKind::io, "failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::io, "cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, "'" + path.string() + "': " + e.what());
  }
}

inline std::string dump_json(const nlohmann::json& doc) { return doc.dump(1) + "\n"; }

// ---- SOM ------------------------------------------------------------------

inline nlohmann::json som_to_json(const SomGrid& grid) {
  const SomConfig& c = grid.config;
  nlohmann::json weights = nlohmann::json::array();
  for (std::size_t i = 0; i < c.height; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < c.width; ++j) {
      const auto w = grid.weight(GridCoord{i, j});
      row.push_back(nlohmann::json(std::vector<double>(w.begin(), w.end())));
    }
    weights.push_back(std::move(row));
  }
  return nlohmann::json{
      {"format", "som"},
      {"version", 1},
      {"width", c.width},
      {"height", c.height},
      {"dim", grid.dim},
      {"sigma0", c.sigma0},
      {"sigma_decay", c.decay_sigma},
      {"learning_rate0", c.learning_rate0},
      {"n_iterations", c.n_iterations},
      {"seed", c.seed},
      {"metric", "cosine"},
      {"neighborhood", "mexican_hat"},
      {"weights", std::move(weights)},
  };
}

inline SomGrid som_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "som") fail(ErrorKind::format, "not a SOM document");
    if (doc.at("version") != 1) fail(ErrorKind::format, "unsupported SOM version");
    if (doc.at("metric") != "cosine") fail(ErrorKind::format, "unsupported metric");
    if (doc.at("neighborhood") != "mexican_hat") fail(ErrorKind::format, "unsupported neighborhood");
    SomGrid grid;
    SomConfig& c = grid.config;
    c.width = doc.at("width").get<std::size_t>();
    c.height = doc.at("height").get<std::size_t>();
    c.sigma0 = doc.at("sigma0").get<double>();
    c.decay_sigma = doc.value("sigma_decay", true);
    c.learning_rate0 = doc.at("learning_rate0").get<double>();
    c.n_iterations = doc.at("n_iterations").get<std::size_t>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.validate();
    grid.dim = doc.at("dim").get<std::size_t>();
    if (grid.dim == 0) fail(ErrorKind::format, "dim must be >= 1");

    const auto& rows = doc.at("weights");
    if (!rows.is_array() || rows.size() != c.height) fail(ErrorKind::format, "weights must have 'height' rows");
    grid.weights.reserve(c.width * c.height * grid.dim);
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != c.width) fail(ErrorKind::format, "weight row must have 'width' units");
      for (const auto& unit : row) {
        if (!unit.is_array() || unit.size() != grid.dim) fail(ErrorKind::format, "weight vector must have 'dim' entries");
        double sq = 0.0;
        for (const auto& v : unit) {
          const double x = v.get<double>();
          if (!std::isfinite(x)) fail(ErrorKind::format, "non-finite weight");
          sq += x * x;
          grid.weights.push_back(x);
        }
        if (!(std::sqrt(sq) > 0.0)) fail(ErrorKind::format, "zero-norm weight vector");
      }
    }
    return grid;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("SOM document: ") + e.what());
  }
}

inline void save_som(const std::filesystem::path& path, const SomGrid& grid) {
  write_file_atomic(path, dump_json(som_to_json(grid)));
}

inline SomGrid load_som(const std::filesystem::path& path) {
  try {
    return som_from_json(read_json_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), std::string(e.what()) + " in '" + path.string() + "'");
  }
}

// ---- Frequency maps ---------------------------------------------------------

inline nlohmann::json fmap_to_json(const FrequencyMap& fmap) {
  nlohmann::json counts = nlohmann::json::array();
  for (std::size_t i = 0; i < fmap.height; ++i) {
    counts.push_back(nlohmann::json(std::vector<std::uint64_t>(
        fmap.counts.begin() + static_cast<std::ptrdiff_t>(i * fmap.width),
        fmap.counts.begin() + static_cast<std::ptrdiff_t>((i + 1) * fmap.width))));
  }
  nlohmann::json doc{
      {"format", "fmap"},
      {"version", 1},
      {"layer", fmap.layer_name},
      {"kind", to_string(fmap.kind)},
      {"width", fmap.width},
      {"height", fmap.height},
      {"counts", std::move(counts)},
      {"total", fmap.total},
  };
  if (fmap.concept_id) doc["concept"] = *fmap.concept_id;
  return doc;
}

inline FrequencyMap fmap_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "fmap") fail(ErrorKind::format, "not a frequency-map document");
    if (doc.at("version") != 1) fail(ErrorKind::format, "unsupported frequency-map version");
    FrequencyMap fmap;
    fmap.layer_name = doc.at("layer").get<std::string>();
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "base") {
      fmap.kind = FrequencyMap::Kind::base;
    } else if (kind == "concept") {
      fmap.kind = FrequencyMap::Kind::concept_map;
    } else {
      fail(ErrorKind::format, "unknown map kind '" + kind + "'");
    }
    if (doc.contains("concept")) fmap.concept_id = doc.at("concept").get<std::string>();
    if (fmap.kind == FrequencyMap::Kind::concept_map && !fmap.concept_id) {
      fail(ErrorKind::format, "concept map without 'concept'");
    }
    fmap.width = doc.at("width").get<std::size_t>();
    fmap.height = doc.at("height").get<std::size_t>();
    const auto& rows = doc.at("counts");
    if (!rows.is_array() || rows.size() != fmap.height) fail(ErrorKind::format, "counts must have 'height' rows");
    std::uint64_t sum = 0;
    for (const auto& row : rows) {
      if (!row.is_array() || row.size() != fmap.width) fail(ErrorKind::format, "count row must have 'width' entries");
      for (const auto& v : row) {
        fmap.counts.push_back(v.get<std::uint64_t>());
        sum += fmap.counts.back();
      }
    }
    fmap.total = doc.at("total").get<std::uint64_t>();
    if (sum != fmap.total) fail(ErrorKind::format, "counts do not sum to 'total'");
    return fmap;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("frequency-map document: ") + e.what());
  }
}

inline void save_fmap(const std::filesystem::path& path, const FrequencyMap& fmap) {
  write_file_atomic(path, dump_json(fmap_to_json(fmap)));
}

inline FrequencyMap load_fmap(const std::filesystem::path& path) {
  try {
    return fmap_from_json(read_json_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    throw Error(e.kind(), std::string(e.what()) + " in '" + path.string() + "'");
  }
}

}  // namespace actsom
