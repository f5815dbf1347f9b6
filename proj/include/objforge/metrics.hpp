#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace objforge {

struct RankedGroup {
  std::vector<double> scores;
  std::vector<int> relevance;  // 0 or 1 per candidate

  void validate() const;
};

// Candidate indices by descending score; equal scores keep index order.
std::vector<std::size_t> rank_order(const RankedGroup& g);

// Per-group metrics. All of them assume at least one relevant candidate.
double average_precision(const RankedGroup& g);
double reciprocal_rank(const RankedGroup& g);
// Relevant candidates among the top k, divided by k.
double precision_at_k(const RankedGroup& g, std::size_t k);
double hit_at_k(const RankedGroup& g, std::size_t k);

struct RankingReport {
  double map = 0.0;
  double mrr = 0.0;
  double p_at_1 = 0.0;
  double hr_at_k = 0.0;
  std::size_t k = 1;
  std::size_t n_groups = 0;
  std::size_t excluded = 0;

  std::string to_json() const;
};

// Groups without a relevant candidate are skipped and counted in `excluded`;
// `warn` gets one message per skipped group.
RankingReport evaluate_ranking(const std::vector<RankedGroup>& groups, std::size_t k = 1,
                               std::vector<std::string>* warnings = nullptr);

// Reads JSONL lines of {"scores":[...],"labels":[...]}.
std::vector<RankedGroup> parse_ranking_jsonl(std::string_view text);

enum class HeadObjective { kMLM, kSLM, kRTS, kCRTS, kELECTRA };

const char* objective_name(HeadObjective o);
std::optional<HeadObjective> parse_head_objective(std::string_view name);

struct HeadCost {
  HeadObjective objective = HeadObjective::kMLM;
  std::size_t d = 0;
  std::size_t vocab_size = 0;
  std::size_t params = 0;
  std::size_t flops_per_token = 0;
};

// Parameters and multiply-add FLOPs of the classification head alone.
HeadCost head_cost(HeadObjective o, std::size_t d, std::size_t vocab_size);

// Inference time of a k-candidate jointwise model over k pairwise calls.
double jointwise_latency_ratio(std::size_t k);

// Plain-text table of every head at (d, vocab_size).
std::string flops_report(std::size_t d, std::size_t vocab_size);

}  // namespace objforge
