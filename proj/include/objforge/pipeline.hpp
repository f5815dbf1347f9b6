#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "objforge/corpus.hpp"
#include "objforge/model.hpp"
#include "objforge/optim.hpp"
#include "objforge/tokenizer.hpp"
#include "objforge/train.hpp"

namespace objforge {

enum class TokenizerKind { kBPE, kWordPiece, kUnigram };

struct TokenizerSettings {
  TokenizerKind kind = TokenizerKind::kBPE;
  // Learned tokens, specials excluded.
  std::size_t k = 59;
  TokenizerMode mode = TokenizerMode::kWordBoundary;
};

struct PipelineConfig {
  uint64_t seed = 1;
  // 0 defers to OBJFORGE_JOBS.
  std::size_t jobs = 0;
  std::vector<std::filesystem::path> corpus;
  std::filesystem::path vocab;
  std::filesystem::path clusters;
  std::filesystem::path abbreviations;
  std::filesystem::path out_dir = "out";
  TokenizerSettings tokenizer;
  TaskOptions task;
  ModelConfig model;
  TrainConfig train;
  std::vector<WeightedObjective> objectives;
};

// Keys are grouped as seed/jobs at the top level plus [paths], [tokenizer],
// [objectives], [model] and [train] tables. Unknown keys are rejected with a
// ConfigError naming the key.
PipelineConfig parse_config_json(std::string_view text);
PipelineConfig parse_config_toml(std::string_view text);
// TOML first; text that does not parse as TOML is retried as JSON.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

// Checks every module precondition that can be checked without reading
// inputs, plus existence of the referenced files. Sub-seeds are filled in
// from the root seed.
void validate_config(PipelineConfig& cfg);

// Human-readable summary printed by --dry-run.
std::string describe_config(const PipelineConfig& cfg);

Vocabulary train_tokenizer(const Corpus& c, const TokenizerSettings& s);

// Worker count: the explicit value when non-zero, else OBJFORGE_JOBS, else 1.
std::size_t resolve_jobs(std::size_t requested);

}  // namespace objforge
