#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "objforge/corpus.hpp"
#include "objforge/random.hpp"

namespace objforge {

enum class StructObjective { kSSP, kSP, kPSD, kMSPP, kSDC, kDPC, kDSLC, kSDS };

const char* objective_name(StructObjective o);
std::optional<StructObjective> parse_struct_objective(std::string_view name);

enum class PairLabel { kPositive, kHardNegative, kEasyNegative };

const char* label_name(PairLabel y);
std::optional<PairLabel> parse_label(std::string_view name);

const LengthDistribution& left_length_distribution();
const LengthDistribution& right_length_distribution();
std::size_t sample_left_length(Rng& rng);
std::size_t sample_right_length(Rng& rng);

// How the right side of a pair is built from its span.
enum class RightMode {
  kSpan,       // the span itself
  kRemainder,  // the paragraph without the span
  kParagraph,  // the whole paragraph (span covers it)
};

struct PairExample {
  std::string left;
  std::string right;
  PairLabel label = PairLabel::kPositive;
  StructObjective objective = StructObjective::kSSP;
  std::size_t group = 0;
  Span left_span;
  Span right_span;
  RightMode right_mode = RightMode::kSpan;

  std::string to_json() const;
};

struct SentenceRef {
  ParagraphRef where;
  std::size_t sentence = 0;
  friend bool operator==(const SentenceRef&, const SentenceRef&) = default;
};

struct JointExample {
  std::string pivot;
  std::vector<std::string> candidates;
  std::vector<int> labels;
  std::size_t group = 0;
  SentenceRef pivot_ref;
  std::vector<SentenceRef> candidate_refs;

  std::string to_json() const;
};

struct ContextExample {
  std::string a;
  std::string b;
  std::string context;
  PairLabel label = PairLabel::kPositive;
  StructObjective kind = StructObjective::kSDC;
  std::size_t group = 0;
  Span a_span;
  Span b_span;
  ParagraphRef context_where;
  std::vector<std::size_t> context_sentences;

  std::string to_json() const;
};

struct SummaryExample {
  std::string source;
  std::string target;
  std::size_t doc = 0;

  std::string to_json() const;
};

struct NegativeQuota {
  std::size_t hard = 2;
  std::size_t easy = 2;
  std::size_t total() const { return hard + easy; }
};

struct MsppQuota {
  std::size_t same_paragraph = 1;
  std::size_t same_document = 2;
  std::size_t other_document = 2;
  std::size_t k() const { return same_paragraph + same_document + other_document; }
};

struct GenOptions {
  uint64_t seed = 0;
  // Anchors cycle over the flattened paragraph list this many times.
  std::size_t passes = 1;
  NegativeQuota quota;
  MsppQuota mspp;
  std::size_t sds_min_sentences = 2;
  std::size_t sds_min_chars = 50;

  void validate() const;
};

// Anchors are paragraph indices (documents for SDS). Every group depends only
// on (seed, objective, anchor), so any split into ranges reproduces the same
// records.
std::size_t anchor_count(StructObjective o, const Corpus& c, const GenOptions& opts);

// One group per anchor in [begin, end); skipped anchors contribute nothing.
std::vector<PairExample> gen_ssp(const Corpus& c, const GenOptions& opts,
                                 std::size_t begin, std::size_t end);
std::vector<PairExample> gen_sp(const Corpus& c, const GenOptions& opts,
                                std::size_t begin, std::size_t end);
std::vector<PairExample> gen_psd(const Corpus& c, const GenOptions& opts,
                                 std::size_t begin, std::size_t end);
std::vector<JointExample> gen_mspp(const Corpus& c, const GenOptions& opts,
                                   std::size_t begin, std::size_t end);
std::vector<ContextExample> gen_sdc(const Corpus& c, const GenOptions& opts,
                                    std::size_t begin, std::size_t end);
std::vector<ContextExample> gen_dpc(const Corpus& c, const GenOptions& opts,
                                    std::size_t begin, std::size_t end);
std::vector<ContextExample> gen_dslc(const Corpus& c, const GenOptions& opts,
                                     std::size_t begin, std::size_t end);
std::vector<SummaryExample> gen_sds(const Corpus& c, const GenOptions& opts,
                                    std::size_t begin, std::size_t end);

// Whole-corpus convenience wrappers.
std::vector<PairExample> gen_pairs(StructObjective o, const Corpus& c,
                                   const GenOptions& opts);
std::vector<ContextExample> gen_contexts(StructObjective o, const Corpus& c,
                                         const GenOptions& opts);

// JSONL lines for any objective over an anchor range.
std::vector<std::string> generate_records(StructObjective o, const Corpus& c,
                                          const GenOptions& opts,
                                          std::size_t begin, std::size_t end);

// Splits the anchors into `shards` contiguous ranges and writes
// {objective}-{shard:05}.jsonl files. Shards run on up to `jobs` threads.
std::vector<std::filesystem::path> write_shards(StructObjective o, const Corpus& c,
                                                const GenOptions& opts,
                                                std::size_t shards,
                                                const std::filesystem::path& out_dir,
                                                int jobs = 1);

// Re-derive the label of an example from its provenance and check that the
// texts match the referenced sentences. Returns an explanation on failure.
std::optional<std::string> audit(const Corpus& c, const PairExample& ex);
std::optional<std::string> audit(const Corpus& c, const JointExample& ex);
std::optional<std::string> audit(const Corpus& c, const ContextExample& ex);
std::optional<std::string> audit(const Corpus& c, const SummaryExample& ex,
                                 const GenOptions& opts);

// SDS filter on a document's first paragraph.
bool sds_accepts(const Document& d, const GenOptions& opts);

}  // namespace objforge
