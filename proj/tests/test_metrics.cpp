#include <doctest.h>

#include "objforge/error.hpp"
#include "objforge/metrics.hpp"

using namespace objforge;

TEST_CASE("ranking metrics on a worked example") {
  // Ranked labels: 0 1 0 1 -> AP = (1/2 + 2/4) / 2.
  const RankedGroup g{{0.9, 0.8, 0.7, 0.6}, {0, 1, 0, 1}};
  CHECK(average_precision(g) == doctest::Approx(0.5));
  CHECK(reciprocal_rank(g) == 0.5);
  CHECK(precision_at_k(g, 1) == 0.0);
  CHECK(precision_at_k(g, 2) == 0.5);
  CHECK(hit_at_k(g, 1) == 0.0);
  CHECK(hit_at_k(g, 2) == 1.0);
  // precision@k divides by k even when fewer candidates exist
  CHECK(precision_at_k(g, 8) == 0.25);
}

TEST_CASE("ties keep candidate order") {
  const RankedGroup g{{1.0, 1.0, 1.0}, {0, 0, 1}};
  CHECK(rank_order(g) == std::vector<std::size_t>{0, 1, 2});
  CHECK(reciprocal_rank(g) == doctest::Approx(1.0 / 3));
}

TEST_CASE("groups without a positive are excluded") {
  std::vector<std::string> warn;
  const auto r = evaluate_ranking({{{0.1, 0.2}, {0, 1}}, {{0.3, 0.1}, {0, 0}}}, 1, &warn);
  CHECK(r.n_groups == 1);
  CHECK(r.excluded == 1);
  CHECK(warn.size() == 1);
  CHECK(r.map == 1.0);
  CHECK(r.to_json().find("\"p@1\"") != std::string::npos);
  CHECK_THROWS_AS(average_precision({{0.1}, {0}}), RangeError);
  CHECK_THROWS_AS(RankedGroup({{0.1, 0.2}, {1}}).validate(), ValidationError);
  CHECK_THROWS_AS(RankedGroup({{0.1}, {2}}).validate(), ValidationError);
}

TEST_CASE("ranking jsonl parsing") {
  const auto gs = parse_ranking_jsonl("{\"scores\":[1,2],\"labels\":[0,1]}\n\n");
  REQUIRE(gs.size() == 1);
  CHECK(gs[0].relevance == std::vector<int>{0, 1});
  try {
    parse_ranking_jsonl("{\"scores\":[1]}\n");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("labels") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_ranking_jsonl("{\"scores\":[1],\"labels\":[1]}\nnot json\n"),
                  ValidationError);
}

TEST_CASE("head costs and latency ratio") {
  const auto mlm = head_cost(HeadObjective::kMLM, 768, 30522);
  CHECK(mlm.params == 768u * 30522u);
  CHECK(mlm.flops_per_token == 2u * 768u * 30522u);
  CHECK(head_cost(HeadObjective::kRTS, 768, 30522).params == 1536);
  CHECK(head_cost(HeadObjective::kCRTS, 256, 100).params == 512);
  CHECK(head_cost(HeadObjective::kELECTRA, 4, 10).params == 48);
  CHECK(jointwise_latency_ratio(1) == 1.0);
  CHECK(jointwise_latency_ratio(5) == doctest::Approx(1.8));
  CHECK(jointwise_latency_ratio(1000000) / 1e6 == doctest::Approx(0.25).epsilon(1e-5));
  CHECK_THROWS_AS(jointwise_latency_ratio(0), RangeError);
  const std::string rep = flops_report(768, 30522);
  CHECK(rep.find("23,440,896") != std::string::npos);
  CHECK(rep.find("1,536") != std::string::npos);
  CHECK(parse_head_objective("c-rts") == HeadObjective::kCRTS);
  CHECK_FALSE(parse_head_objective("xyz"));
}
