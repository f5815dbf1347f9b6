#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "objforge/corpus.hpp"

namespace objforge {

using TokenId = int32_t;

enum class TokenizerMode {
  // Words are split on whitespace first; no token crosses a word boundary.
  kWordBoundary,
  // Whitespace is a regular symbol ("▁"), sentences are raw streams.
  kWhitespaceSymbol,
};

struct SpecialTokens {
  TokenId pad = 0;
  TokenId unk = 1;
  TokenId mask = 2;
  TokenId bos = 3;
  TokenId eos = 4;

  static constexpr int kCount = 5;
  static const std::vector<std::string>& names();
};

// Token sequence with one word-start flag per token.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<bool> word_start;

  std::size_t size() const { return ids.size(); }
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // `learned` excludes specials; specials receive ids 0..4 in SpecialTokens
  // order followed by `learned` in the given order.
  Vocabulary(std::vector<std::string> learned,
             std::vector<std::pair<std::string, std::string>> merges,
             TokenizerMode mode,
             std::map<std::string, double> unigram_probs = {});

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  bool is_special(TokenId id) const {
    return id >= 0 && id < SpecialTokens::kCount;
  }
  // Ids of all non-special tokens, ascending.
  std::vector<TokenId> regular_ids() const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }
  const std::map<std::string, double>& unigram_probs() const {
    return unigram_probs_;
  }
  bool has_unigram_model() const { return !unigram_probs_.empty(); }
  const SpecialTokens& specials() const { return specials_; }
  TokenizerMode mode() const { return mode_; }
  std::size_t max_token_chars() const { return max_token_chars_; }

  // JSON: {"tokens", "merges", "unigram_probs"?, "specials", "mode"}.
  std::string to_json() const;
  static Vocabulary from_json(std::string_view json_text);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::string, double> unigram_probs_;
  SpecialTokens specials_;
  TokenizerMode mode_ = TokenizerMode::kWordBoundary;
  std::size_t max_token_chars_ = 1;
};

// Marker used for whitespace in kWhitespaceSymbol mode and for word starts
// in serialized pieces.
inline constexpr std::string_view kSpaceSymbol = "▁";
inline constexpr std::string_view kWordStartGlyph = "Ġ";

// Training sequences: symbols (code points) with a frequency. In word mode a
// sequence is one word; in whitespace mode it is a whole sentence.
struct SymbolSequence {
  std::vector<std::string> symbols;
  std::int64_t freq = 1;
};

std::vector<SymbolSequence> training_sequences(const Corpus& c,
                                               TokenizerMode mode);

// Alphabet of the training data, sorted.
std::vector<std::string> alphabet(const std::vector<SymbolSequence>& seqs);

// Bottom-up merge training. `k` counts learned tokens (specials excluded).
Vocabulary train_bpe(const Corpus& c, std::size_t k,
                     TokenizerMode mode = TokenizerMode::kWordBoundary);
Vocabulary train_wordpiece(const Corpus& c, std::size_t k,
                           TokenizerMode mode = TokenizerMode::kWordBoundary);

// Same trainers on pre-built sequences; used by tests and the CLI.
Vocabulary train_bpe(std::vector<SymbolSequence> seqs, std::size_t k,
                     TokenizerMode mode);
Vocabulary train_wordpiece(std::vector<SymbolSequence> seqs, std::size_t k,
                           TokenizerMode mode);

struct UnigramOptions {
  double alpha = 0.1;
  std::size_t max_piece_chars = 8;
  std::int64_t min_piece_freq = 2;
  int em_iterations = 3;
  // Retrain the model once per candidate removal instead of the
  // leave-one-out approximation. Only feasible on tiny corpora.
  bool exact_deltas = false;
};

Vocabulary train_unigram(const Corpus& c, std::size_t k,
                         const UnigramOptions& opts = {},
                         TokenizerMode mode = TokenizerMode::kWordBoundary);
Vocabulary train_unigram(const std::vector<SymbolSequence>& seqs,
                         std::size_t k, const UnigramOptions& opts,
                         TokenizerMode mode);

namespace unigram {

using Model = std::map<std::string, double>;  // piece -> probability

// Initial pieces: every character plus every substring of 2..max chars
// occurring at least min_freq times.
std::map<std::string, std::int64_t> seed_pieces(
    const std::vector<SymbolSequence>& seqs, const UnigramOptions& opts);

// EM fit of piece probabilities over the given piece set, starting from
// weights proportional to `init` (pieces missing from `init` start at 1).
Model fit(const std::vector<SymbolSequence>& seqs,
          const std::vector<std::string>& pieces,
          const std::map<std::string, double>& init, int iterations,
          std::size_t max_chars);

// Frequency-weighted log-likelihood of the best segmentation of every
// sequence.
double viterbi_log_likelihood(const std::vector<SymbolSequence>& seqs,
                              const Model& model, std::size_t max_chars);

// Best segmentation of one symbol sequence; empty if unsegmentable.
std::vector<std::string> viterbi_segment(const std::vector<std::string>& symbols,
                                         const Model& model,
                                         std::size_t max_chars);

// Loss increase caused by removing each non-character piece.
std::map<std::string, double> loss_deltas(
    const std::vector<SymbolSequence>& seqs, const Model& model,
    const UnigramOptions& opts);

}  // namespace unigram

TokenSequence encode(const Vocabulary& v, std::string_view text);
// Throws RangeError on ids outside the vocabulary.
std::string decode(const Vocabulary& v, const TokenSequence& seq);

// Pieces with the word-start glyph prefixed, for interchange.
std::vector<std::string> render_pieces(const Vocabulary& v,
                                       const TokenSequence& seq);

}  // namespace objforge
