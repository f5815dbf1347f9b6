#include <doctest.h>

#include <cmath>
#include <set>

#include "objforge/embed_cluster.hpp"
#include "objforge/error.hpp"
#include "support.hpp"

using namespace objforge;

namespace {

// Three tight blobs of 10 points each in 2-D.
EmbeddingTable blobs() {
  EmbeddingTable e(30, 2);
  Rng rng(3);
  std::normal_distribution<double> noise(0.0, 0.05);
  const double centers[3][2] = {{0, 0}, {5, 5}, {-5, 5}};
  for (std::size_t i = 0; i < 30; ++i) {
    e.row(i)[0] = centers[i / 10][0] + noise(rng);
    e.row(i)[1] = centers[i / 10][1] + noise(rng);
  }
  return e;
}

}  // namespace

TEST_CASE("kmeans recovers separated blobs") {
  KMeansOptions o;
  o.n = 3;
  o.seed = 11;
  const auto r = kmeans(blobs(), o);
  for (std::size_t b = 0; b < 3; ++b) {
    std::set<std::size_t> ids;
    for (std::size_t i = b * 10; i < b * 10 + 10; ++i) ids.insert(r.clusters.cluster_of(i));
    CHECK(ids.size() == 1);
  }
  CHECK(r.inertia < 30 * 0.05);
  for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) {
    CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("kmeans result does not depend on worker count") {
  KMeansOptions o;
  o.n = 5;
  o.seed = 2;
  o.restarts = 4;
  const auto a = kmeans(blobs(), o);
  o.jobs = 3;
  const auto b = kmeans(blobs(), o);
  CHECK(a.clusters.assignment() == b.clusters.assignment());
  CHECK(a.inertia == b.inertia);
  o.n = 31;
  CHECK_THROWS_AS(kmeans(blobs(), o), ConfigError);
}

TEST_CASE("kmeans never leaves a cluster empty") {
  EmbeddingTable e(8, 1);
  for (std::size_t i = 0; i < 8; ++i) e.row(i)[0] = i < 7 ? 0.0 : 1.0;
  KMeansOptions o;
  o.n = 4;
  o.seed = 5;
  const auto r = kmeans(e, o);
  for (std::size_t c = 0; c < 4; ++c) CHECK_FALSE(r.clusters.members(c).empty());
}

TEST_CASE("cluster map validation and json") {
  CHECK_THROWS_AS(ClusterMap(2, {0, 0, 0}), ValidationError);
  CHECK_THROWS_AS(ClusterMap(2, {0, 2}), ValidationError);
  const ClusterMap m(2, {0, 1, 1});
  CHECK(m.members(1) == std::vector<std::size_t>{1, 2});
  const ClusterMap back = ClusterMap::from_json(m.to_json());
  CHECK(back.assignment() == m.assignment());
  const auto s = cluster_size_stats(m);
  CHECK(s.min == 1);
  CHECK(s.max == 2);
  CHECK(s.mean == doctest::Approx(1.5));
}

TEST_CASE("cluster count selection takes the weakest detector") {
  const auto n = select_cluster_count({30, 10, 20}, [](std::size_t k) {
    return k == 20 ? 0.6 : 0.8;
  });
  CHECK(n == 20);
  CHECK(select_cluster_count({30, 10}, [](std::size_t) { return 0.5; }) == 10);
  CHECK_THROWS_AS(select_cluster_count({}, [](std::size_t) { return 0.0; }), ConfigError);
}

TEST_CASE("skipgram initialization and training") {
  const std::vector<std::vector<TokenId>> sents{{5, 6, 5, 6, 5, 6}, {7, 8, 7, 8, 7, 8}};
  SkipgramOptions o;
  o.dim = 8;
  o.epochs = 0;
  o.seed = 1;
  const auto init = train_skipgram(sents, 9, o);
  for (double x : init.data) CHECK(std::abs(x) <= 0.5 / 8);
  o.epochs = 3;
  const auto a = train_skipgram(sents, 9, o);
  const auto b = train_skipgram(sents, 9, o);
  CHECK(a.data == b.data);
  CHECK(a.data != init.data);
  const auto back = EmbeddingTable::from_json(a.to_json());
  CHECK(back.rows == a.rows);
  CHECK(cosine_similarity(a, 5, 5) == doctest::Approx(1.0));
}
