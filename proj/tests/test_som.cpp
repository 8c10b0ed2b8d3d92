#include <actsom/io.hpp>
#include <actsom/som.hpp>

#include <catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace actsom;
using Catch::Matchers::WithinAbs;

namespace {

SomConfig small_config(std::size_t w, std::size_t h, std::uint64_t seed = 1) {
  SomConfig c;
  c.width = w;
  c.height = h;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("init_som produces unit-norm deterministic weights", "[som][init]") {
  SomConfig cfg;  // 15x15
  cfg.seed = 42;
  const SomGrid g = init_som(cfg, 8);
  REQUIRE(g.unit_count() == 225);
  REQUIRE(g.weights.size() == 225 * 8);
  for (std::size_t u = 0; u < g.unit_count(); ++u) {
    REQUIRE_THAT(detail::norm(g.weight(u)), WithinAbs(1.0, 1e-6));
  }
  REQUIRE(init_som(cfg, 8) == g);

  const SomGrid single = init_som(small_config(1, 1), 2);
  REQUIRE(single.unit_count() == 1);
  REQUIRE_THAT(std::hypot(single.weights[0], single.weights[1]), WithinAbs(1.0, 1e-12));

  cfg.seed = 43;
  REQUIRE_FALSE(init_som(cfg, 8) == g);
}

TEST_CASE("init_som rejects bad arguments", "[som][init]") {
  REQUIRE_THROWS_AS(init_som(SomConfig{}, 0), Error);
  SomConfig bad;
  bad.sigma0 = 0.0;
  REQUIRE_THROWS_AS(init_som(bad, 3), Error);
  bad = SomConfig{};
  bad.width = 0;
  REQUIRE_THROWS_AS(init_som(bad, 3), Error);
  bad = SomConfig{};
  bad.n_iterations = 0;
  REQUIRE_THROWS_AS(init_som(bad, 3), Error);
}

TEST_CASE("cosine_dist anchors", "[som][cosine]") {
  const std::vector<double> e1{1, 0}, e2{0, 1}, d1{1, 1}, d2{2, 2}, z{0, 0};
  REQUIRE(cosine_dist(e1, e1) == 0.0);
  REQUIRE_THAT(cosine_dist(e1, e2), WithinAbs(1.0, 1e-15));
  REQUIRE_THAT(cosine_dist(d1, d2), WithinAbs(0.0, 1e-15));
  REQUIRE(cosine_dist(z, e1) == 1.0);
  REQUIRE(cosine_dist(e1, z) == 1.0);
  const std::vector<double> neg{-1, 0};
  REQUIRE_THAT(cosine_dist(e1, neg), WithinAbs(2.0, 1e-15));
  const std::vector<double> three{1, 2, 3};
  REQUIRE_THROWS_AS(cosine_dist(e1, three), Error);
}

TEST_CASE("bmu picks exact match and breaks ties by linear index", "[som][bmu]") {
  SomGrid g = init_som(small_config(3, 2), 3);
  // Unit (0,0) along x; every other unit orthogonal to x.
  const std::vector<double> x{0.0, 0.0, 2.0};
  for (std::size_t u = 0; u < g.unit_count(); ++u) {
    auto w = g.weight(u);
    w[0] = u == 0 ? 0.0 : 1.0;
    w[1] = u == 0 ? 0.0 : static_cast<double>(u);
    w[2] = u == 0 ? 1.0 : 0.0;
  }
  REQUIRE(bmu(g, x) == GridCoord{0, 0});

  for (double& w : g.weights) w = 0.5;
  REQUIRE(bmu(g, x) == GridCoord{0, 0});
  REQUIRE(bmu(g, std::vector<double>{1.0, -1.0, 0.25}) == GridCoord{0, 0});

  // Later duplicate of the best direction loses the tie.
  g = init_som(small_config(3, 3), 2);
  const std::vector<double> dir{0.6, 0.8};
  for (std::size_t u : {4u, 7u}) std::copy(dir.begin(), dir.end(), g.weight(u).begin());
  REQUIRE(bmu_index(g, dir) == 4);
}

TEST_CASE("bmu rejects bad inputs", "[som][bmu]") {
  const SomGrid g = init_som(small_config(2, 2), 3);
  REQUIRE_THROWS_AS(bmu(g, std::vector<double>{1.0, 2.0}), Error);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    bmu(g, std::vector<double>{nan, nan, nan});
    FAIL("expected invalid-input error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::invalid_input);
  }
}

TEST_CASE("bmu agrees with exhaustive scan on random 3x3 grids", "[som][bmu][oracle]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const SomGrid g = init_som(small_config(3, 3, trial), 4);
    const auto x = testing::random_vector(rng, 4);
    const auto [i, j] = oracle::exhaustive_bmu(g, x);
    REQUIRE(bmu(g, x) == GridCoord{i, j});
  }
}

TEST_CASE("bmu properties: scale invariance and oracle agreement up to 5x5", "[som][bmu][property]") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> side(1, 5);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t w = side(rng);
    const std::size_t h = side(rng);
    const SomGrid g = init_som(small_config(w, h, trial), 6);
    const auto x = testing::random_vector(rng, 6);
    const auto expected = oracle::exhaustive_bmu(g, x);
    const GridCoord got = bmu(g, x);
    REQUIRE(got == GridCoord{expected.first, expected.second});

    std::vector<double> scaled = x;
    const double c = scale(rng);
    for (double& v : scaled) v *= c;
    // Scaling can move the cosine by an ulp; only demand agreement when the
    // winner is not within rounding of a runner-up.
    double best = 3.0;
    double second = 3.0;
    for (std::size_t u = 0; u < g.unit_count(); ++u) {
      const double d = cosine_dist(x, g.weight(u));
      if (d < best) {
        second = best;
        best = d;
      } else if (d < second) {
        second = d;
      }
    }
    if (second - best > 1e-12) REQUIRE(bmu(g, scaled) == got);
  }
}

TEST_CASE("Mexican-hat neighborhood", "[som][neighborhood]") {
  const auto h = neighborhood_mexican_hat(15, 15, GridCoord{7, 7}, 8.0);
  REQUIRE(h[7 * 15 + 7] == 1.0);
  // (0, 8) from the corner: p = 64 = sigma^2, the zero crossing.
  const auto h2 = neighborhood_mexican_hat(20, 20, GridCoord{0, 0}, 8.0);
  REQUIRE(h2[0 * 20 + 8] == 0.0);
  // p = 128 at (8, 8): exp(-1) * (1 - 2).
  REQUIRE_THAT(h2[8 * 20 + 8], WithinAbs(-0.36787944117144233, 1e-15));
  REQUIRE_THAT(h2[8 * 20 + 8], WithinAbs(-0.3679, 1e-4));
  // Inhibitory beyond sigma^2.
  REQUIRE(h2[9 * 20 + 0] < 0.0);
  REQUIRE_THROWS_AS(neighborhood_mexican_hat(3, 3, GridCoord{0, 0}, 0.0), Error);
}

TEST_CASE("Mexican-hat is symmetric in squared grid distance", "[som][neighborhood][property]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t w = 1 + rng() % 12;
    const std::size_t hgt = 1 + rng() % 12;
    const GridCoord c{rng() % hgt, rng() % w};
    const double sigma = 0.5 + (rng() % 100) / 10.0;
    const auto h = neighborhood_mexican_hat(w, hgt, c, sigma);
    std::map<long, double> by_p;
    for (std::size_t i = 0; i < hgt; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const long di = long(i) - long(c.row);
        const long dj = long(j) - long(c.col);
        const long p = di * di + dj * dj;
        const auto [it, inserted] = by_p.emplace(p, h[i * w + j]);
        if (!inserted) REQUIRE(it->second == h[i * w + j]);
      }
    }
  }
}

TEST_CASE("decay schedule", "[som][train]") {
  REQUIRE(decayed(0.5, 0, 1000) == 0.5);
  REQUIRE(decayed(0.5, 500, 1000) == 0.25);
  REQUIRE(decayed(8.0, 1000, 1000) == Catch::Approx(8.0 / 3.0));
}

TEST_CASE("train_step on a 1x1 grid moves the weight toward x", "[som][train]") {
  SomConfig cfg = small_config(1, 1, 9);
  cfg.n_iterations = 10;
  SomGrid g = init_som(cfg, 3);
  const std::vector<double> w0(g.weights.begin(), g.weights.end());
  const std::vector<double> x{0.3, -2.0, 1.5};
  train_step(g, x, 0);
  for (std::size_t k = 0; k < 3; ++k) {
    REQUIRE(g.weights[k] == w0[k] + 0.5 * (x[k] - w0[k]));
  }
  // Step 5 of 10: eta = 0.5 / 2.
  const std::vector<double> w1(g.weights.begin(), g.weights.end());
  train_step(g, x, 5);
  for (std::size_t k = 0; k < 3; ++k) REQUIRE(g.weights[k] == w1[k] + 0.25 * (x[k] - w1[k]));
}

TEST_CASE("train_step keeps weights finite and away from zero", "[som][train][property]") {
  SomConfig cfg = small_config(6, 6, 2);
  cfg.n_iterations = 3000;
  cfg.learning_rate0 = 2.0;  // aggressive: pushes surround units hard
  SomGrid g = init_som(cfg, 4);
  std::mt19937_64 rng(17);
  for (std::size_t t = 0; t < cfg.n_iterations; ++t) {
    train_step(g, testing::random_vector(rng, 4), t);
  }
  for (std::size_t u = 0; u < g.unit_count(); ++u) {
    for (double v : g.weight(u)) REQUIRE(std::isfinite(v));
    REQUIRE(detail::norm(g.weight(u)) >= 1e-12);
  }

  // A full-strength pull onto the zero vector would collapse the winner.
  SomConfig one = small_config(1, 1, 4);
  one.learning_rate0 = 1.0;
  SomGrid g1 = init_som(one, 2);
  const std::vector<double> before(g1.weights.begin(), g1.weights.end());
  train_step(g1, std::vector<double>{0.0, 0.0}, 0);
  REQUIRE_THAT(detail::norm(g1.weight(0)), WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(cosine_dist(g1.weight(0), before), WithinAbs(0.0, 1e-12));
}

TEST_CASE("train converges on a single repeated direction", "[som][train]") {
  SomConfig cfg;
  cfg.n_iterations = 2000;
  cfg.seed = 21;
  SomGrid g = init_som(cfg, 6);
  const std::vector<double> v{0.2, -1.0, 0.7, 0.0, 3.0, -0.4};
  std::vector<double> values;
  for (int i = 0; i < 500; ++i) values.insert(values.end(), v.begin(), v.end());
  const ActivationSet data = make_activation_set("l", 500, 6, values);
  train(g, data);
  REQUIRE(cosine_dist(v, g.weight(bmu(g, v))) < 0.01);
}

TEST_CASE("train is deterministic and reduces quantization error", "[som][train]") {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto clusters = testing::direction_clusters(3, 10, 300, 0.2, 100 + seed);
    SomConfig cfg;
    cfg.seed = seed;
    cfg.n_iterations = 3000;
    SomGrid g = init_som(cfg, 10);
    const double before = quantization_error(g, clusters.data);
    train(g, clusters.data);
    if (quantization_error(g, clusters.data) < before) ++improved;
    if (seed == 0) {
      SomGrid again = init_som(cfg, 10);
      train(again, clusters.data);
      REQUIRE(again == g);
    }
  }
  REQUIRE(improved >= 19);
}

TEST_CASE("train and quantization_error reject empty or mismatched data", "[som][train]") {
  SomGrid g = init_som(small_config(2, 2), 3);
  const ActivationSet empty{"l", {0, 3}, {}};
  REQUIRE_THROWS_AS(train(g, empty), Error);
  REQUIRE_THROWS_AS(quantization_error(g, empty), Error);
  const ActivationSet wrong = make_activation_set("l", 1, 2, {1.0, 2.0});
  REQUIRE_THROWS_AS(train(g, wrong), Error);
}

TEST_CASE("quantization_error anchors", "[som][qe]") {
  SomGrid g = init_som(small_config(2, 1), 2);
  std::vector<double> w{1.0, 0.0, 0.0, 1.0};
  g.weights = w;
  REQUIRE(quantization_error(g, make_activation_set("l", 2, 2, {3.0, 0.0, 0.0, 0.5})) == 0.0);

  SomGrid g3 = init_som(small_config(2, 1), 3);
  g3.weights = {1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
  REQUIRE_THAT(quantization_error(g3, make_activation_set("l", 1, 3, {0.0, 0.0, 4.0})), WithinAbs(1.0, 1e-15));

  std::mt19937_64 rng(8);
  const SomGrid r = init_som(small_config(2, 2, 77), 3);
  std::vector<double> vals;
  double expected = 0.0;
  for (int i = 0; i < 5; ++i) {
    const auto x = testing::random_vector(rng, 3);
    vals.insert(vals.end(), x.begin(), x.end());
    const auto [bi, bj] = oracle::exhaustive_bmu(r, x);
    expected += oracle::cosine_distance(x, r.weight(GridCoord{bi, bj}));
  }
  REQUIRE_THAT(quantization_error(r, make_activation_set("l", 5, 3, vals)), WithinAbs(expected / 5.0, 1e-15));
}

TEST_CASE("SOM JSON persistence round-trips exactly", "[som][io]") {
  SomConfig cfg = small_config(4, 3, 99);
  cfg.decay_sigma = false;
  SomGrid g = init_som(cfg, 5);
  const auto data = testing::direction_clusters(2, 5, 40, 0.1, 1).data;
  train(g, data);
  const auto doc = som_to_json(g);
  REQUIRE(doc.at("format") == "som");
  REQUIRE(doc.at("weights").size() == 3);
  REQUIRE(doc.at("weights")[0].size() == 4);
  REQUIRE(doc.at("weights")[0][0].size() == 5);
  REQUIRE(som_from_json(nlohmann::json::parse(doc.dump())) == g);

  auto broken = doc;
  broken["metric"] = "euclidean";
  REQUIRE_THROWS_AS(som_from_json(broken), Error);
  broken = doc;
  broken["weights"][0].erase(0);
  REQUIRE_THROWS_AS(som_from_json(broken), Error);
}
