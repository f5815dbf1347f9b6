#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "objforge/corpus.hpp"
#include "objforge/corruption.hpp"
#include "objforge/embed_cluster.hpp"
#include "objforge/generators.hpp"
#include "objforge/model.hpp"
#include "objforge/optim.hpp"
#include "objforge/tokenizer.hpp"

namespace objforge {

enum class Objective { kMLM, kRTS, kCRTS, kSLM, kSSP, kSP, kPSD, kMSPP, kSDS };

const char* objective_name(Objective o);
std::optional<Objective> parse_objective(std::string_view name);

struct WeightedObjective {
  Objective objective = Objective::kMLM;
  double weight = 1.0;
};

// "mlm" or "mlm:0.5"; throws ConfigError naming the bad part.
WeightedObjective parse_weighted_objective(std::string_view text);

struct TaskOptions {
  double rate = 0.15;
  double gamma = 1.0;
  // Token objectives train on paragraphs cut to this many tokens, [BOS] and
  // [EOS] included.
  std::size_t token_seq_len = 32;
  std::size_t pair_max_len = 64;
  std::size_t sds_max_len = 64;
  // Generator passes over the corpus when building example pools.
  std::size_t generator_passes = 4;
  Head mspp_head = Head::kIEk;
  // Cluster count used when C-RTS has to build its own cluster map.
  std::size_t n_clusters = 8;
  GenOptions gen;

  void validate() const;
};

// Removes one token at a time from the end of the longest sequence (ties go
// to the earliest) until the total length fits the budget.
void truncate_longest_first(std::vector<std::vector<TokenId>>& seqs, std::size_t budget);

// [BOS] l [EOS] r [EOS] with sequence ids 0/1, truncated to max_len.
EncoderInput pair_input(const std::vector<TokenId>& l, const std::vector<TokenId>& r,
                        std::size_t max_len, const SpecialTokens& sp);

// k+1 slots of cfg.slot_len tokens: [BOS] text [EOS] then padding that is
// masked out. Slots beyond seqs.size() are entirely padding.
EncoderInput fixed_input(const std::vector<std::vector<TokenId>>& seqs,
                         const ModelConfig& cfg, const SpecialTokens& sp);

// [BOS] s0 [EOS] s1 [EOS] ... within cfg.max_len; pivot has sequence id 0,
// candidates 1.
EncoderInput flexible_input(std::vector<std::vector<TokenId>> seqs, const ModelConfig& cfg,
                            const SpecialTokens& sp);

struct LossRow {
  int step = 0;
  std::string objective;
  double loss = 0.0;
  double lr = 0.0;
};

std::string loss_trace_csv(const std::vector<LossRow>& rows);

// Mean loss of the first or last `n` steps recorded for an objective.
double mean_loss(const std::vector<LossRow>& rows, std::string_view objective,
                 std::size_t n, bool last);

class Trainer {
 public:
  Trainer(ModelConfig model_cfg, TrainConfig train_cfg, TaskOptions task,
          std::vector<WeightedObjective> objectives, const Corpus& corpus,
          const Vocabulary& vocab, const ClusterMap* clusters = nullptr);
  ~Trainer();
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // One optimizer step over all objectives; returns the rows it logged.
  std::vector<LossRow> step();
  // Runs the remaining steps up to total_steps.
  std::vector<LossRow> run();

  // Mean loss of one objective on the batch drawn for `step`; adds
  // weight-free gradients to `grads` when given. Leaves parameters alone.
  double batch_loss(Objective o, int step, Params* grads = nullptr);
  // Argmax accuracy over the labelled rows of that batch (not for SDS).
  double batch_accuracy(Objective o, int step);

  const Params& params() const;
  Params& params();
  const ModelConfig& model_config() const;
  const std::vector<LossRow>& trace() const;
  const FMatrix* f_matrix() const;
  const ClusterMap* clusters() const;
  int steps_done() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace objforge
