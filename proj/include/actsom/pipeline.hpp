#pragma once

// The three cached stages behind the `actsom` command:
//
//   train     manifest + ACTV dumps      -> <out>/soms/<layer>.som.json
//   populate  SOMs + labels (+ targets)  -> <out>/maps/*.fmap.json, maps/index.json
//   report    maps                       -> <out>/report.{json,csv}, <out>/heatmaps/*.png
//
// Each stage computes everything in memory before writing, so a failed run
// leaves earlier outputs untouched.

#include <actsom/activations.hpp>
#include <actsom/error.hpp>
#include <actsom/frequency_map.hpp>
#include <actsom/io.hpp>
#include <actsom/labels.hpp>
#include <actsom/manifest.hpp>
#include <actsom/measures.hpp>
#include <actsom/report.hpp>
#include <actsom/som.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace actsom {

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::optional<std::size_t> iterations;  // default: 10 x examples in the layer
  std::size_t width = 15;
  std::size_t height = 15;
  double sigma = 8.0;
  double learning_rate = 0.5;
  bool freeze_sigma = false;
  std::size_t min_members = 20;
  double epsilon = kDefaultEpsilon;
  std::size_t target_clusters = 3;
  bool normalize_targets = false;
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());

  void validate() const {
    if (manifest.empty()) fail(ErrorKind::invalid_input, "no manifest given");
    if (out_dir.empty()) fail(ErrorKind::invalid_input, "no output directory given");
    if (min_members < 1) fail(ErrorKind::invalid_input, "min-members must be >= 1");
    if (!(epsilon > 0.0)) fail(ErrorKind::invalid_input, "epsilon must be > 0");
    if (jobs < 1) fail(ErrorKind::invalid_input, "jobs must be >= 1");
    if (iterations && *iterations < 1) fail(ErrorKind::invalid_input, "iterations must be >= 1");
    if (target_clusters < 1) fail(ErrorKind::invalid_input, "target-clusters must be >= 1");
  }

  [[nodiscard]] SomConfig som_config(std::size_t n_examples) const {
    SomConfig c;
    c.width = width;
    c.height = height;
    c.sigma0 = sigma;
    c.learning_rate0 = learning_rate;
    c.n_iterations = iterations.value_or(10 * n_examples);
    c.seed = seed;
    c.decay_sigma = !freeze_sigma;
    c.validate();
    return c;
  }
};

/// Applies keys of a JSON config document. Unknown keys are rejected so typos
/// do not silently fall back to defaults.
inline void apply_config_json(RunConfig& cfg, const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::format, "config must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "manifest") cfg.manifest = value.get<std::string>();
      else if (key == "out") cfg.out_dir = value.get<std::string>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "iterations") cfg.iterations = value.get<std::size_t>();
      else if (key == "width") cfg.width = value.get<std::size_t>();
      else if (key == "height") cfg.height = value.get<std::size_t>();
      else if (key == "sigma") cfg.sigma = value.get<double>();
      else if (key == "lr") cfg.learning_rate = value.get<double>();
      else if (key == "freeze_sigma") cfg.freeze_sigma = value.get<bool>();
      else if (key == "min_members") cfg.min_members = value.get<std::size_t>();
      else if (key == "epsilon") cfg.epsilon = value.get<double>();
      else if (key == "target_clusters") cfg.target_clusters = value.get<std::size_t>();
      else if (key == "normalize_targets") cfg.normalize_targets = value.get<bool>();
      else if (key == "jobs") cfg.jobs = value.get<std::size_t>();
      else fail(ErrorKind::format, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("config: ") + e.what());
  }
}

struct OutputLayout {
  std::filesystem::path root;

  [[nodiscard]] std::filesystem::path som_dir() const { return root / "soms"; }
  [[nodiscard]] std::filesystem::path map_dir() const { return root / "maps"; }
  [[nodiscard]] std::filesystem::path heatmap_dir() const { return root / "heatmaps"; }
  [[nodiscard]] std::filesystem::path som_file(const std::string& layer) const {
    return som_dir() / (percent_encode(layer) + ".som.json");
  }
  [[nodiscard]] std::filesystem::path map_index() const { return map_dir() / "index.json"; }
};

namespace detail {

/// Runs fn(0..n-1) on up to `jobs` threads. The exception from the lowest
/// failing index is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(jobs, 1), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline Error with_layer(const Error& e, const std::string& layer) {
  return Error(e.kind(), "layer '" + layer + "': " + e.what());
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create directory '" + dir.string() + "'");
}

inline ActivationSet load_layer(const LayerEntry& layer) {
  if (!std::filesystem::exists(layer.file)) {
    fail(ErrorKind::io, "activation file '" + layer.file.string() + "' not found");
  }
  return aggregate(read_actv(layer.file, layer.name), layer.aggregation);
}

inline nlohmann::json som_config_json(const SomConfig& c) {
  return {{"width", c.width},   {"height", c.height},           {"sigma0", c.sigma0},
          {"sigma_decay", c.decay_sigma}, {"learning_rate0", c.learning_rate0},
          {"n_iterations", c.n_iterations}, {"seed", c.seed}};
}

}  // namespace detail

// ---- train ------------------------------------------------------------------

struct TrainedLayer {
  std::string layer_name;
  std::filesystem::path som_file;
  double initial_quantization_error = 0.0;
  double quantization_error = 0.0;
};

inline std::vector<TrainedLayer> cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const LayerManifest manifest = read_manifest(cfg.manifest);
  const OutputLayout out{cfg.out_dir};

  std::vector<SomGrid> grids(manifest.layers.size());
  std::vector<TrainedLayer> results(manifest.layers.size());
  detail::parallel_for(manifest.layers.size(), cfg.jobs, [&](std::size_t i) {
    const LayerEntry& layer = manifest.layers[i];
    try {
      const ActivationSet data = detail::load_layer(layer);
      SomGrid grid = init_som(cfg.som_config(data.n_examples()), data.dim());
      const double before = quantization_error(grid, data);
      train(grid, data);
      results[i] = TrainedLayer{layer.name, out.som_file(layer.name), before, quantization_error(grid, data)};
      grids[i] = std::move(grid);
    } catch (const Error& e) {
      throw detail::with_layer(e, layer.name);
    }
  });

  detail::ensure_dir(out.som_dir());
  for (std::size_t i = 0; i < grids.size(); ++i) {
    save_som(results[i].som_file, grids[i]);
    log << "train " << results[i].layer_name << ": dim " << grids[i].dim << ", " << grids[i].config.n_iterations
        << " iterations, quantization error " << format_double(results[i].initial_quantization_error) << " -> "
        << format_double(results[i].quantization_error) << "\n";
  }
  return results;
}

// ---- populate ---------------------------------------------------------------

struct PopulateSummary {
  std::size_t base_maps = 0;
  std::size_t concept_maps = 0;
  std::vector<std::string> skipped_concepts;
};

/// Labels from the CSV plus, when the manifest names a target file, k-means
/// groups of the continuous target.
inline ConceptLabeling load_concepts(const LayerManifest& manifest, const RunConfig& cfg) {
  ConceptLabeling labels = read_labels(manifest.labels_file);
  if (manifest.target_file) {
    const std::vector<double> targets = read_targets(*manifest.target_file);
    KMeansOptions opts;
    opts.normalize = cfg.normalize_targets;
    labels.merge(kmeans_discretize(targets, cfg.target_clusters, cfg.seed, opts));
  }
  return labels;
}

inline PopulateSummary cmd_populate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const LayerManifest manifest = read_manifest(cfg.manifest);
  const OutputLayout out{cfg.out_dir};
  const ConceptLabeling labels = load_concepts(manifest, cfg);

  PopulateSummary summary;
  std::vector<std::string> kept;
  for (const auto& [name, members] : labels.membership) {
    if (members.size() >= cfg.min_members) {
      kept.push_back(name);
    } else {
      summary.skipped_concepts.push_back(name);
      log << "populate: skipping concept '" << name << "' (" << members.size() << " members < " << cfg.min_members
          << ")\n";
    }
  }

  struct LayerMaps {
    FrequencyMap base;
    std::vector<FrequencyMap> concepts;
    SomConfig som;
  };
  std::vector<LayerMaps> maps(manifest.layers.size());
  detail::parallel_for(manifest.layers.size(), cfg.jobs, [&](std::size_t i) {
    const LayerEntry& layer = manifest.layers[i];
    try {
      const auto som_path = out.som_file(layer.name);
      if (!std::filesystem::exists(som_path)) {
        fail(ErrorKind::io, "SOM file '" + som_path.string() + "' not found; run `actsom train` first");
      }
      const SomGrid grid = load_som(som_path);
      const ActivationSet data = detail::load_layer(layer);
      labels.check_range(data.n_examples());
      maps[i].som = grid.config;
      maps[i].base = populate(grid, data);
      for (const auto& c : kept) maps[i].concepts.push_back(populate_concept(grid, subset(data, labels, c), c));
    } catch (const Error& e) {
      throw detail::with_layer(e, layer.name);
    }
  });

  detail::ensure_dir(out.map_dir());
  nlohmann::json index_layers = nlohmann::json::array();
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const std::string& name = manifest.layers[i].name;
    const std::string base_file = map_stem(name, std::nullopt) + ".fmap.json";
    save_fmap(out.map_dir() / base_file, maps[i].base);
    ++summary.base_maps;
    nlohmann::json concepts = nlohmann::json::array();
    for (const auto& cm : maps[i].concepts) {
      const std::string file = map_stem(name, cm.concept_id) + ".fmap.json";
      save_fmap(out.map_dir() / file, cm);
      concepts.push_back({{"concept", *cm.concept_id}, {"file", file}});
      ++summary.concept_maps;
    }
    index_layers.push_back(
        {{"name", name}, {"base", base_file}, {"concepts", std::move(concepts)}, {"som", detail::som_config_json(maps[i].som)}});
    log << "populate " << name << ": base map of " << maps[i].base.total << " examples, " << maps[i].concepts.size()
        << " concept maps\n";
  }
  const nlohmann::json index{{"format", "fmap-index"},
                             {"version", 1},
                             {"layers", std::move(index_layers)},
                             {"min_members", cfg.min_members},
                             {"skipped_concepts", summary.skipped_concepts}};
  write_file_atomic(out.map_index(), dump_json(index));
  return summary;
}

// ---- report -----------------------------------------------------------------

inline MeasureReport cmd_report(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const OutputLayout out{cfg.out_dir};
  if (!std::filesystem::exists(out.map_index())) {
    fail(ErrorKind::io, "map index '" + out.map_index().string() + "' not found; run `actsom populate` first");
  }
  const nlohmann::json index = read_json_file(out.map_index());

  std::vector<std::string> layers;
  std::map<std::string, FrequencyMap> base_maps;
  std::vector<FrequencyMap> concept_maps;
  nlohmann::json som_configs = nlohmann::json::object();
  try {
    if (index.at("format") != "fmap-index") fail(ErrorKind::format, "not a map index");
    for (const auto& entry : index.at("layers")) {
      const std::string name = entry.at("name").get<std::string>();
      layers.push_back(name);
      som_configs[name] = entry.at("som");
      FrequencyMap base = load_fmap(out.map_dir() / entry.at("base").get<std::string>());
      if (base.kind != FrequencyMap::Kind::base || base.layer_name != name) {
        fail(ErrorKind::consistency, "base map for layer '" + name + "' does not match the index");
      }
      for (const auto& c : entry.at("concepts")) {
        FrequencyMap cm = load_fmap(out.map_dir() / c.at("file").get<std::string>());
        if (cm.width != base.width || cm.height != base.height) {
          fail(ErrorKind::consistency, "layer '" + name + "': concept map '" + cm.concept_id.value_or("") +
                                           "' has grid " + std::to_string(cm.width) + "x" + std::to_string(cm.height) +
                                           ", base has " + std::to_string(base.width) + "x" +
                                           std::to_string(base.height));
        }
        if (cm.layer_name != name) fail(ErrorKind::consistency, "concept map layer does not match the index");
        concept_maps.push_back(std::move(cm));
      }
      base_maps.emplace(name, std::move(base));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("map index: ") + e.what());
  }

  std::vector<MeasureValue> values = score_all(layers, base_maps, concept_maps, cfg.epsilon);
  const nlohmann::json echo{{"epsilon", cfg.epsilon},
                            {"min_members", index.value("min_members", cfg.min_members)},
                            {"seed", cfg.seed},
                            {"soms", som_configs}};
  MeasureReport report = build_report(layers, std::move(values), echo);

  detail::ensure_dir(out.heatmap_dir());
  for (const auto& layer : layers) {
    render_heatmap(base_maps.at(layer), out.heatmap_dir() / (map_stem(layer, std::nullopt) + ".png"));
  }
  for (const auto& cm : concept_maps) {
    render_heatmap(cm, out.heatmap_dir() / (map_stem(cm.layer_name, cm.concept_id) + ".png"));
  }
  if (!report.values.empty()) emit_report(report, out.root);

  log << "report: " << layers.size() << " layers, " << report.concepts.size() << " concepts, "
      << report.values.size() << " values\n";
  for (const auto& h : report.hypothesis_results) {
    if (h.measure != Measure::relative_entropy) continue;
    log << "  relative_entropy " << h.concept_id << ": " << to_string(h.result.verdict)
        << " (spearman " << format_double(h.result.spearman_rho) << ")\n";
  }
  return report;
}

}  // namespace actsom
