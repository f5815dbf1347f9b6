#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "objforge/corruption.hpp"
#include "objforge/error.hpp"
#include "support.hpp"

using namespace objforge;
using objforge::testing::numbered_vocab;
using objforge::testing::regular_sequence;

TEST_CASE("rate zero is the identity") {
  const Vocabulary v = numbered_vocab(20);
  Rng rng(1);
  const auto ids = regular_sequence(v, 50, rng);
  for (auto* fn : {&mlm_corrupt, &rts_corrupt, &slm_corrupt}) {
    const auto out = fn(ids, 0.0, rng, v);
    CHECK(out.ids == ids);
    CHECK(out.selected() == 0);
  }
  const ClusterMap cm(1, std::vector<std::size_t>(v.size(), 0));
  const auto c = crts_corrupt(ids, CrtsConfig{1.0, 0.0}, cm, FMatrix(1), rng, v);
  CHECK(c.ids == ids);
  REQUIRE(c.prov);
  CHECK(c.prov->empty());
}

TEST_CASE("single masked position") {
  const Vocabulary v = numbered_vocab(20);
  // Find a seed whose first draw selects the token and takes the mask branch.
  for (uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto out = mlm_corrupt({7}, 0.999, rng, v);
    if (out.ids[0] == v.specials().mask) {
      CHECK(out.labels == std::vector<int32_t>{7});
      CHECK(out.mask == std::vector<uint8_t>{1});
      return;
    }
  }
  FAIL("no seed produced a masked token");
}

TEST_CASE("unselected positions are untouched and replacements differ") {
  const Vocabulary v = numbered_vocab(6);
  Rng rng(3);
  std::vector<TokenId> ids = regular_sequence(v, 400, rng);
  ids.front() = v.specials().bos;
  ids.back() = v.specials().eos;
  for (auto* fn : {&rts_corrupt, &slm_corrupt}) {
    const auto out = fn(ids, 0.5, rng, v);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!out.mask[i]) {
        CHECK(out.ids[i] == ids[i]);
      } else {
        CHECK(out.ids[i] != ids[i]);
        CHECK_FALSE(v.is_special(out.ids[i]));
      }
    }
    CHECK(out.mask.front() == 0);
    CHECK(out.mask.back() == 0);
  }
  const auto slm = slm_corrupt(ids, 0.9, rng, v);
  CHECK(std::count(slm.ids.begin(), slm.ids.end(), v.specials().mask) == 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(slm.labels[i] == (slm.mask[i] ? ids[i] : kIgnoreLabel));
  }
}

TEST_CASE("target cluster distribution") {
  const std::vector<int64_t> row{2, 0, -2};
  const auto p = target_cluster_distribution(row, 1.0);
  CHECK(p[0] == doctest::Approx(0.50648039105565).epsilon(1e-12));
  const std::vector<int64_t> flat{4, 4, 4, 4};
  for (double x : target_cluster_distribution(flat, 0.3)) CHECK(x == 0.25);
  const auto hot = target_cluster_distribution(row, 1e6);
  for (double x : hot) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-6));
  const std::vector<int64_t> extreme{1000000000, -1000000000, 0};
  const auto e = target_cluster_distribution(extreme, 1e-3);
  CHECK(std::accumulate(e.begin(), e.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e[0] == doctest::Approx(1.0));
}

TEST_CASE("crts follows a strongly skewed row") {
  const Vocabulary v = numbered_vocab(30);
  std::vector<std::size_t> assign(v.size());
  for (std::size_t t = 0; t < v.size(); ++t) assign[t] = t % 3;
  const ClusterMap cm(3, assign);
  FMatrix f(3);
  for (std::size_t a = 0; a < 3; ++a) f.at(a, 2) = 1000000;
  Rng rng(9);
  std::size_t hits = 0, total = 0;
  while (total < 100000) {
    const auto ids = regular_sequence(v, 200, rng);
    const auto out = crts_corrupt(ids, CrtsConfig{0.05, 0.5}, cm, f, rng, v);
    for (const auto& pr : *out.prov) {
      hits += pr.target == 2;
      ++total;
    }
    for (std::size_t i = 0, k = 0; i < ids.size(); ++i) {
      if (!out.mask[i]) continue;
      const auto& pr = (*out.prov)[k++];
      CHECK(pr.source == cm.cluster_of(ids[i]));
      CHECK(cm.cluster_of(out.ids[i]) == pr.target);
    }
  }
  CHECK(static_cast<double>(hits) / total > 0.99);
}

TEST_CASE("crts with one cluster degenerates to rts") {
  const Vocabulary v = numbered_vocab(10);
  const ClusterMap cm(1, std::vector<std::size_t>(v.size(), 0));
  Rng rng(4);
  const auto ids = regular_sequence(v, 500, rng);
  const auto out = crts_corrupt(ids, CrtsConfig{}, cm, FMatrix(1), rng, v);
  for (const auto& pr : *out.prov) CHECK(pr == ClusterPair{0, 0});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (out.mask[i]) CHECK(out.ids[i] != ids[i]);
  }
  CHECK_THROWS_AS(crts_corrupt(ids, CrtsConfig{}, cm, FMatrix(2), rng, v), ConfigError);
}

TEST_CASE("f matrix updates") {
  FMatrix f(4);
  crts_update(f, {}, {});
  CHECK(f == FMatrix(4));
  crts_update(f, {0}, {{2, 3}});
  CHECK(f.at(2, 3) == 1);
  crts_update(f, {1, 1}, {{2, 3}, {0, 0}});
  CHECK(f.at(2, 3) == 0);
  CHECK(f.at(0, 0) == -1);
  CHECK_THROWS_AS(crts_update(f, {1}, {}), ShapeError);
  CHECK_THROWS_AS(crts_update(f, {1}, {{4, 0}}), RangeError);
  const FMatrix back = FMatrix::from_bytes(f.to_bytes());
  CHECK(back == f);
  CHECK(f.to_bytes().size() == 8 * (1 + 16));
}

TEST_CASE("corruption json shape") {
  const Vocabulary v = numbered_vocab(10);
  Rng rng(1);
  const auto out = rts_corrupt({5, 6, 7}, 0.5, rng, v);
  const std::string j = out.to_json();
  CHECK(j.find("\"ids\"") != std::string::npos);
  CHECK(j.find("\"prov\"") == std::string::npos);
}
