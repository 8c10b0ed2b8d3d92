#pragma once

#include <actsom/activations.hpp>
#include <actsom/error.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace actsom {

struct LayerEntry {
  std::string name;
  std::filesystem::path file;
  AggregationSpec aggregation;
};

/// Layers in network order, input to output. Relative paths resolve against
/// the manifest's own directory.
struct LayerManifest {
  std::vector<LayerEntry> layers;
  std::filesystem::path labels_file;
  std::optional<std::filesystem::path> target_file;

  [[nodiscard]] std::vector<std::string> layer_names() const {
    std::vector<std::string> out;
    for (const auto& l : layers) out.push_back(l.name);
    return out;
  }
};

inline LayerManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  LayerManifest m;
  try {
    if (!doc.is_object()) fail(ErrorKind::format, "manifest must be a JSON object");
    if (!doc.contains("layers") || !doc.at("layers").is_array() || doc.at("layers").empty()) {
      fail(ErrorKind::format, "manifest needs a non-empty 'layers' array");
    }
    std::set<std::string> seen;
    for (const auto& entry : doc.at("layers")) {
      LayerEntry layer;
      layer.name = entry.at("name").get<std::string>();
      if (layer.name.empty()) fail(ErrorKind::format, "layer with empty name");
      if (!seen.insert(layer.name).second) fail(ErrorKind::format, "duplicate layer '" + layer.name + "'");
      layer.file = resolve(entry.at("file").get<std::string>());
      if (entry.contains("aggregation") && !entry.at("aggregation").is_null()) {
        const auto& agg = entry.at("aggregation");
        layer.aggregation.kind = parse_aggregation_kind(agg.value("kind", std::string("none")));
        if (agg.contains("axes")) layer.aggregation.axes = agg.at("axes").get<std::vector<std::size_t>>();
      }
      m.layers.push_back(std::move(layer));
    }
    m.labels_file = resolve(doc.at("labels_file").get<std::string>());
    if (doc.contains("target_file") && !doc.at("target_file").is_null()) {
      m.target_file = resolve(doc.at("target_file").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("manifest: ") + e.what());
  }
  return m;
}

inline LayerManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open manifest '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, "manifest '" + path.string() + "': " + e.what());
  }
  return parse_manifest(doc, path.parent_path());
}

}  // namespace actsom
