#include <actsom/frequency_map.hpp>
#include <actsom/io.hpp>

#include <catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace actsom;
using Catch::Matchers::WithinAbs;

namespace {

SomGrid grid(std::size_t w, std::size_t h, std::size_t dim, std::uint64_t seed) {
  SomConfig c;
  c.width = w;
  c.height = h;
  c.seed = seed;
  return init_som(c, dim);
}

std::vector<std::vector<double>> rows_of(const ActivationSet& a) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < a.n_examples(); ++i) out.emplace_back(a.row(i).begin(), a.row(i).end());
  return out;
}

}  // namespace

TEST_CASE("populate a single example", "[populate]") {
  const SomGrid g = grid(4, 3, 5, 1);
  const auto m = populate(g, make_activation_set("l", 1, 5, {1, 2, 3, 4, 5}));
  REQUIRE(m.total == 1);
  REQUIRE(std::count(m.counts.begin(), m.counts.end(), 1u) == 1);
  REQUIRE(std::accumulate(m.counts.begin(), m.counts.end(), std::uint64_t{0}) == 1);
  REQUIRE(m.kind == FrequencyMap::Kind::base);
  REQUIRE(m.layer_name == "l");
  REQUIRE(m.width == 4);
  REQUIRE(m.height == 3);
}

TEST_CASE("populate is additive over replicated data", "[populate]") {
  const SomGrid g = grid(5, 5, 6, 2);
  const auto data = testing::direction_clusters(3, 6, 30, 0.5, 3).data;
  ActivationSet tripled = data;
  tripled.shape[0] *= 3;
  tripled.values.insert(tripled.values.end(), data.values.begin(), data.values.end());
  tripled.values.insert(tripled.values.end(), data.values.begin(), data.values.end());
  const auto once = populate(g, data);
  const auto thrice = populate(g, tripled);
  for (std::size_t u = 0; u < once.counts.size(); ++u) REQUIRE(thrice.counts[u] == 3 * once.counts[u]);
  REQUIRE(thrice.total == 3 * once.total);
}

TEST_CASE("populate matches a brute-force tally", "[populate][oracle]") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const SomGrid g = grid(2, 2, 3, trial);
    std::vector<double> vals = testing::random_vector(rng, 18);
    const auto data = make_activation_set("l", 6, 3, vals);
    REQUIRE(populate(g, data).counts == oracle::tally(g, rows_of(data)));
  }
}

TEST_CASE("populate does not modify the grid and checks dims", "[populate]") {
  const SomGrid g = grid(3, 3, 4, 3);
  const SomGrid copy = g;
  const auto data = testing::direction_clusters(2, 4, 20, 0.3, 1).data;
  (void)populate(g, data);
  REQUIRE(g == copy);
  REQUIRE_THROWS_AS(populate(g, make_activation_set("l", 1, 3, {1, 2, 3})), Error);
  REQUIRE_THROWS_AS(populate(g, ActivationSet{"l", {0, 4}, {}}), Error);
}

TEST_CASE("populate properties: totals, order invariance, determinism", "[populate][property]") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const SomGrid g = grid(4, 4, 5, trial);
    const auto data = testing::direction_clusters(4, 5, 50, 0.4, trial).data;
    const auto m = populate(g, data);
    REQUIRE(m.total == data.n_examples());
    REQUIRE(std::accumulate(m.counts.begin(), m.counts.end(), std::uint64_t{0}) == m.total);
    REQUIRE(populate(g, data) == m);

    std::vector<std::size_t> perm(data.n_examples());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    ActivationSet shuffled{"synthetic", data.shape, {}};
    for (auto i : perm) shuffled.values.insert(shuffled.values.end(), data.row(i).begin(), data.row(i).end());
    REQUIRE(populate(g, shuffled).counts == m.counts);
  }
}

TEST_CASE("subset selects concept rows in order", "[subset]") {
  const auto data = make_activation_set("l", 3, 2, {0, 1, 10, 11, 20, 21});
  ConceptLabeling l;
  l.add(2, "A");
  l.add(0, "A");
  for (std::size_t i = 0; i < 3; ++i) l.add(i, "all");
  const auto a = subset(data, l, "A");
  REQUIRE(a.shape == std::vector<std::size_t>{2, 2});
  REQUIRE(a.values == std::vector<double>{0, 1, 20, 21});
  REQUIRE(subset(data, l, "all").values == data.values);

  try {
    subset(data, l, "missing");
    FAIL("expected lookup error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::lookup);
  }
  l.add(7, "B");
  try {
    subset(data, l, "B");
    FAIL("expected index error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::index);
  }
}

TEST_CASE("partition additivity", "[populate][property]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SomGrid g = grid(5, 4, 6, seed);
    const auto cd = testing::direction_clusters(3, 6, 90, 0.5, seed);
    ConceptLabeling l;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < cd.data.n_examples(); ++i) l.add(i, (rng() & 1) ? "even" : "odd");
    const auto base = populate(g, cd.data);
    const auto a = populate_concept(g, subset(cd.data, l, "even"), "even");
    const auto b = populate_concept(g, subset(cd.data, l, "odd"), "odd");
    for (std::size_t u = 0; u < base.counts.size(); ++u) REQUIRE(a.counts[u] + b.counts[u] == base.counts[u]);
    REQUIRE(a.total + b.total == base.total);
    REQUIRE(a.concept_id == "even");
    REQUIRE(a.kind == FrequencyMap::Kind::concept_map);
  }
}

TEST_CASE("probabilities normalize counts", "[probabilities]") {
  FrequencyMap m{15, 15, std::vector<std::uint64_t>(225, 4), 900, FrequencyMap::Kind::base, std::nullopt, "l"};
  for (double p : probabilities(m)) REQUIRE(p == 1.0 / 225.0);

  FrequencyMap one{3, 2, {0, 0, 0, 0, 7, 0}, 7, FrequencyMap::Kind::base, std::nullopt, "l"};
  REQUIRE(probabilities(one) == std::vector<double>{0, 0, 0, 0, 1, 0});

  std::mt19937_64 rng(1);
  FrequencyMap r{15, 15, {}, 0, FrequencyMap::Kind::base, std::nullopt, "l"};
  for (int i = 0; i < 225; ++i) {
    r.counts.push_back(rng() % 50);
    r.total += r.counts.back();
  }
  const auto p = probabilities(r);
  REQUIRE_THAT(std::accumulate(p.begin(), p.end(), 0.0), WithinAbs(1.0, 1e-12));

  FrequencyMap empty{2, 2, {0, 0, 0, 0}, 0, FrequencyMap::Kind::base, std::nullopt, "l"};
  REQUIRE_THROWS_AS(probabilities(empty), Error);
}

TEST_CASE("frequency map JSON persistence", "[fmap][io]") {
  FrequencyMap m{3, 2, {1, 0, 2, 0, 5, 0}, 8, FrequencyMap::Kind::concept_map, "red cars", "fc"};
  const auto doc = fmap_to_json(m);
  REQUIRE(doc.at("counts") == nlohmann::json::parse("[[1,0,2],[0,5,0]]"));
  REQUIRE(doc.at("concept") == "red cars");
  REQUIRE(fmap_from_json(doc) == m);

  FrequencyMap base = m;
  base.kind = FrequencyMap::Kind::base;
  base.concept_id.reset();
  REQUIRE_FALSE(fmap_to_json(base).contains("concept"));
  REQUIRE(fmap_from_json(fmap_to_json(base)) == base);

  auto bad = doc;
  bad["total"] = 9;
  REQUIRE_THROWS_AS(fmap_from_json(bad), Error);
}
