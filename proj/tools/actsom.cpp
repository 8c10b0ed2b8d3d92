// actsom: train per-layer SOMs on activation dumps, populate them with concept
// subsets, and score/report how strongly each concept is represented.
//
//   actsom train|populate|report --manifest <path> --out <dir> [options]
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 I/O error.

#include <actsom/actsom.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitIo = 3;

struct Flags {
  std::optional<std::string> manifest;
  std::optional<std::string> out;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<double> sigma;
  std::optional<double> lr;
  std::optional<std::size_t> width;
  std::optional<std::size_t> height;
  std::optional<std::size_t> min_members;
  std::optional<std::size_t> jobs;
  std::optional<double> epsilon;
  std::optional<std::size_t> target_clusters;
  bool freeze_sigma = false;
  bool normalize_targets = false;
};

void add_common_options(CLI::App* cmd, Flags& f) {
  cmd->add_option("--manifest", f.manifest, "Layer manifest (JSON)");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--config", f.config, "JSON config file; flags override its values");
  cmd->add_option("--seed", f.seed, "RNG seed for SOM initialization and sampling");
  cmd->add_option("--iterations", f.iterations, "Training steps per layer (default 10 x examples)");
  cmd->add_option("--sigma", f.sigma, "Initial neighborhood radius (default 8)");
  cmd->add_option("--lr", f.lr, "Initial learning rate (default 0.5)");
  cmd->add_option("--width", f.width, "SOM grid width (default 15)");
  cmd->add_option("--height", f.height, "SOM grid height (default 15)");
  cmd->add_flag("--freeze-sigma", f.freeze_sigma, "Keep the neighborhood radius fixed during training");
  cmd->add_option("--min-members", f.min_members, "Skip concepts with fewer members (default 20)");
  cmd->add_option("--epsilon", f.epsilon, "Relative-entropy smoothing constant (default 1e-9)");
  cmd->add_option("--target-clusters", f.target_clusters, "k for discretizing a continuous target (default 3)");
  cmd->add_flag("--normalize-targets", f.normalize_targets, "Min-max scale targets before k-means");
  cmd->add_option("--jobs", f.jobs, "Layers processed in parallel (default: hardware threads)");
}

actsom::RunConfig resolve(const Flags& f) {
  actsom::RunConfig cfg;
  if (f.config) actsom::apply_config_json(cfg, actsom::read_json_file(*f.config));
  if (f.manifest) cfg.manifest = *f.manifest;
  if (f.out) cfg.out_dir = *f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.iterations) cfg.iterations = *f.iterations;
  if (f.sigma) cfg.sigma = *f.sigma;
  if (f.lr) cfg.learning_rate = *f.lr;
  if (f.width) cfg.width = *f.width;
  if (f.height) cfg.height = *f.height;
  if (f.freeze_sigma) cfg.freeze_sigma = true;
  if (f.min_members) cfg.min_members = *f.min_members;
  if (f.epsilon) cfg.epsilon = *f.epsilon;
  if (f.target_clusters) cfg.target_clusters = *f.target_clusters;
  if (f.normalize_targets) cfg.normalize_targets = true;
  if (f.jobs) cfg.jobs = *f.jobs;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locate concept representations in network layers with self-organizing maps"};
  app.require_subcommand(1);
  Flags flags;
  auto* train = app.add_subcommand("train", "Train one base SOM per manifest layer");
  auto* populate = app.add_subcommand("populate", "Build base and concept frequency maps");
  auto* report = app.add_subcommand("report", "Score maps, render heatmaps, write report.json/report.csv");
  for (auto* cmd : {train, populate, report}) add_common_options(cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  actsom::RunConfig cfg;
  try {
    cfg = resolve(flags);
    cfg.validate();
  } catch (const actsom::Error& e) {
    std::cerr << "actsom: " << e.what() << "\n";
    return e.kind() == actsom::ErrorKind::io ? kExitIo : kExitUsage;
  }

  try {
    if (train->parsed()) {
      actsom::cmd_train(cfg, std::cout);
    } else if (populate->parsed()) {
      actsom::cmd_populate(cfg, std::cout);
    } else {
      actsom::cmd_report(cfg, std::cout);
    }
  } catch (const actsom::Error& e) {
    std::cerr << "actsom: " << e.what() << "\n";
    return e.kind() == actsom::ErrorKind::io ? kExitIo : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "actsom: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
