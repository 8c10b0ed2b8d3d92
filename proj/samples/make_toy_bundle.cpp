// Writes a small synthetic input bundle for the actsom pipeline:
//
//   <out>/layer1.actv   (n, 4, 12) tensor, mean-aggregated over axis 1
//   <out>/layer2.actv   (n, 8)
//   <out>/labels.csv    class_0/class_1 targets plus a nuisance attribute
//   <out>/targets.txt   continuous score, discretized by k-means at populate time
//   <out>/manifest.json
//
// Layer 1 mostly encodes the nuisance attribute and only weakly the class;
// layer 2 encodes the class cleanly. Usage: make_toy_bundle <out_dir> [seed]

#include <actsom/activations.hpp>
#include <actsom/io.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

namespace {

std::vector<double> random_direction(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> nd;
  std::vector<double> v(dim);
  for (double& x : v) x = nd(rng);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_toy_bundle <out_dir> [seed]\n";
    return 1;
  }
  const std::filesystem::path out = argv[1];
  const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 7;
  constexpr std::size_t n = 400;
  constexpr std::size_t steps = 4;
  constexpr std::size_t width1 = 12;
  constexpr std::size_t width2 = 8;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise;
  std::bernoulli_distribution coin(0.5);

  const auto class_dir1 = random_direction(rng, width1);
  const auto nuisance_dir1 = random_direction(rng, width1);
  const auto common1 = random_direction(rng, width1);
  const auto class_dir2 = random_direction(rng, width2);
  const auto common2 = random_direction(rng, width2);

  actsom::ActivationSet layer1{"layer1", {n, steps, width1}, {}};
  actsom::ActivationSet layer2{"layer2", {n, width2}, {}};
  std::string labels = "example_id,concept\n";
  std::string targets = "target\n";

  for (std::size_t i = 0; i < n; ++i) {
    const bool cls = coin(rng);
    const bool nuisance = coin(rng);
    const double c = cls ? 1.0 : -1.0;
    const double u = nuisance ? 1.0 : -1.0;
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t k = 0; k < width1; ++k) {
        const double v = 2.0 * common1[k] + 1.5 * u * nuisance_dir1[k] + 0.3 * c * class_dir1[k] + 0.8 * noise(rng);
        layer1.values.push_back(std::max(0.0, v));
      }
    }
    for (std::size_t k = 0; k < width2; ++k) {
      const double v = common2[k] + 2.0 * c * class_dir2[k] + 0.3 * noise(rng);
      layer2.values.push_back(std::max(0.0, v));
    }
    labels += std::to_string(i) + (cls ? ",class_1\n" : ",class_0\n");
    labels += std::to_string(i) + (nuisance ? ",group_a\n" : ",group_b\n");
    targets += actsom::format_double(std::round((40.0 + 15.0 * c + 5.0 * noise(rng)) * 100.0) / 100.0) + "\n";
  }

  std::filesystem::create_directories(out);
  actsom::write_actv(out / "layer1.actv", layer1);
  actsom::write_actv(out / "layer2.actv", layer2);
  actsom::write_file_atomic(out / "labels.csv", labels);
  actsom::write_file_atomic(out / "targets.txt", targets);
  const nlohmann::json manifest{
      {"layers",
       {{{"name", "layer1"}, {"file", "layer1.actv"}, {"aggregation", {{"kind", "mean"}, {"axes", {1}}}}},
        {{"name", "layer2"}, {"file", "layer2.actv"}, {"aggregation", {{"kind", "none"}}}}}},
      {"labels_file", "labels.csv"},
      {"target_file", "targets.txt"},
  };
  actsom::write_file_atomic(out / "manifest.json", actsom::dump_json(manifest));
  std::cout << "wrote toy bundle (" << n << " examples) to " << out.string() << "\n";
  return 0;
}
