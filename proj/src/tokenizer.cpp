#include "objforge/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "objforge/error.hpp"
#include "objforge/io.hpp"
#include "objforge/text.hpp"

namespace objforge {

using nlohmann::json;

const std::vector<std::string>& SpecialTokens::names() {
  static const std::vector<std::string> kNames = {"[PAD]", "[UNK]", "[MASK]",
                                                  "[BOS]", "[EOS]"};
  return kNames;
}

Vocabulary::Vocabulary(std::vector<std::string> learned,
                       std::vector<std::pair<std::string, std::string>> merges,
                       TokenizerMode mode,
                       std::map<std::string, double> unigram_probs)
    : merges_(std::move(merges)),
      unigram_probs_(std::move(unigram_probs)),
      mode_(mode) {
  tokens_ = SpecialTokens::names();
  for (auto& t : learned) tokens_.push_back(std::move(t));
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ValidationError("duplicate vocabulary token: " + tokens_[i]);
    }
    if (i >= SpecialTokens::kCount) {
      max_token_chars_ =
          std::max(max_token_chars_, text::code_point_count(tokens_[i]));
    }
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw RangeError("token id out of range: " + std::to_string(id));
  }
  return tokens_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> Vocabulary::regular_ids() const {
  std::vector<TokenId> out;
  for (std::size_t i = SpecialTokens::kCount; i < tokens_.size(); ++i) {
    out.push_back(static_cast<TokenId>(i));
  }
  return out;
}

namespace {

std::string mode_name(TokenizerMode m) {
  return m == TokenizerMode::kWordBoundary ? "word-boundary"
                                           : "whitespace-as-symbol";
}

TokenizerMode parse_mode(const std::string& s) {
  if (s == "word-boundary") return TokenizerMode::kWordBoundary;
  if (s == "whitespace-as-symbol") return TokenizerMode::kWhitespaceSymbol;
  throw ValidationError("vocabulary: unknown mode \"" + s + "\"");
}

}  // namespace

std::string Vocabulary::to_json() const {
  json j;
  j["tokens"] = tokens_;
  json merges = json::array();
  for (const auto& [l, r] : merges_) merges.push_back({l, r});
  j["merges"] = merges;
  if (!unigram_probs_.empty()) j["unigram_probs"] = unigram_probs_;
  j["specials"] = {{"pad", specials_.pad},
                   {"unk", specials_.unk},
                   {"mask", specials_.mask},
                   {"bos", specials_.bos},
                   {"eos", specials_.eos}};
  j["mode"] = mode_name(mode_);
  return j.dump(1);
}

Vocabulary Vocabulary::from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("vocabulary: ") + e.what());
  }
  if (!j.contains("tokens") || !j["tokens"].is_array()) {
    throw ValidationError("vocabulary: field \"tokens\" must be an array");
  }
  auto tokens = j["tokens"].get<std::vector<std::string>>();
  const auto& names = SpecialTokens::names();
  if (tokens.size() < names.size() ||
      !std::equal(names.begin(), names.end(), tokens.begin())) {
    throw ValidationError("vocabulary: field \"tokens\" must start with " +
                          text::join(names, ", "));
  }
  if (j.contains("specials")) {
    const SpecialTokens expected;
    const json& s = j["specials"];
    if (s.value("pad", -1) != expected.pad || s.value("unk", -1) != expected.unk ||
        s.value("mask", -1) != expected.mask || s.value("bos", -1) != expected.bos ||
        s.value("eos", -1) != expected.eos) {
      throw ValidationError("vocabulary: field \"specials\" does not match token order");
    }
  }
  std::vector<std::pair<std::string, std::string>> merges;
  if (j.contains("merges")) {
    for (const auto& m : j["merges"]) {
      if (!m.is_array() || m.size() != 2) {
        throw ValidationError("vocabulary: field \"merges\" must hold pairs");
      }
      merges.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
    }
  }
  std::map<std::string, double> probs;
  if (j.contains("unigram_probs")) {
    probs = j["unigram_probs"].get<std::map<std::string, double>>();
  }
  const TokenizerMode mode =
      parse_mode(j.value("mode", std::string("word-boundary")));
  tokens.erase(tokens.begin(), tokens.begin() + names.size());
  return Vocabulary(std::move(tokens), std::move(merges), mode,
                    std::move(probs));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  io::write_file(path, to_json() + "\n");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  return from_json(io::read_file(path));
}

std::vector<SymbolSequence> training_sequences(const Corpus& c,
                                               TokenizerMode mode) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& d : c.documents()) {
    for (const auto& p : d.paragraphs) {
      for (const auto& s : p.sentences) {
        if (mode == TokenizerMode::kWordBoundary) {
          for (auto& w : text::split_whitespace(s)) ++counts[w];
        } else {
          std::string stream;
          for (const auto& w : text::split_whitespace(s)) {
            stream.append(kSpaceSymbol);
            stream.append(w);
          }
          ++counts[stream];
        }
      }
    }
  }
  std::vector<SymbolSequence> out;
  out.reserve(counts.size());
  for (const auto& [unit, n] : counts) {
    out.push_back({text::code_points(unit), n});
  }
  return out;
}

std::vector<std::string> alphabet(const std::vector<SymbolSequence>& seqs) {
  std::set<std::string> chars;
  for (const auto& s : seqs) chars.insert(s.symbols.begin(), s.symbols.end());
  return {chars.begin(), chars.end()};
}

namespace {

using Pair = std::pair<std::string, std::string>;

enum class MergeRule { kFrequency, kLikelihoodRatio };

void apply_merge(std::vector<SymbolSequence>& seqs, const Pair& pair) {
  const std::string merged = pair.first + pair.second;
  for (auto& seq : seqs) {
    auto& s = seq.symbols;
    std::vector<std::string> out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
      if (i + 1 < s.size() && s[i] == pair.first && s[i + 1] == pair.second) {
        out.push_back(merged);
        i += 2;
      } else {
        out.push_back(std::move(s[i]));
        ++i;
      }
    }
    s = std::move(out);
  }
}

// Returns the pair to merge next, or nullopt when no pair occurs twice.
// Ties go to the lexicographically smallest pair: std::map iterates in
// that order and only a strictly better score replaces the incumbent.
std::optional<Pair> select_pair(const std::vector<SymbolSequence>& seqs,
                                MergeRule rule) {
  std::map<Pair, std::int64_t> pairs;
  std::map<std::string, std::int64_t> units;
  for (const auto& seq : seqs) {
    const auto& s = seq.symbols;
    for (std::size_t i = 0; i < s.size(); ++i) {
      units[s[i]] += seq.freq;
      if (i + 1 < s.size()) pairs[{s[i], s[i + 1]}] += seq.freq;
    }
  }
  std::optional<Pair> best;
  std::int64_t best_count = 0;
  // Likelihood ratio P(l,r)/(P(l)P(r)) = count(l,r)*U^2 / (B*count(l)*count(r)).
  // U and B are fixed within a step, so candidates compare by
  // count(l,r)/(count(l)*count(r)) using exact integer cross-multiplication.
  __int128 best_den = 1;
  for (const auto& [pair, count] : pairs) {
    if (count < 2) continue;
    if (rule == MergeRule::kFrequency) {
      if (count > best_count) {
        best = pair;
        best_count = count;
      }
    } else {
      const __int128 den =
          static_cast<__int128>(units[pair.first]) * units[pair.second];
      if (!best || static_cast<__int128>(count) * best_den >
                       static_cast<__int128>(best_count) * den) {
        best = pair;
        best_count = count;
        best_den = den;
      }
    }
  }
  return best;
}

Vocabulary train_merges(std::vector<SymbolSequence> seqs, std::size_t k,
                        TokenizerMode mode, MergeRule rule) {
  std::vector<std::string> learned = alphabet(seqs);
  if (k < learned.size()) {
    throw ConfigError("target vocabulary size " + std::to_string(k) +
                      " is smaller than the alphabet (" +
                      std::to_string(learned.size()) + ")");
  }
  std::set<std::string> present(learned.begin(), learned.end());
  std::vector<Pair> merges;
  while (learned.size() < k) {
    auto pair = select_pair(seqs, rule);
    if (!pair) break;
    apply_merge(seqs, *pair);
    merges.push_back(*pair);
    std::string t = pair->first + pair->second;
    if (present.insert(t).second) learned.push_back(std::move(t));
  }
  return Vocabulary(std::move(learned), std::move(merges), mode);
}

}  // namespace

Vocabulary train_bpe(std::vector<SymbolSequence> seqs, std::size_t k,
                     TokenizerMode mode) {
  return train_merges(std::move(seqs), k, mode, MergeRule::kFrequency);
}

Vocabulary train_wordpiece(std::vector<SymbolSequence> seqs, std::size_t k,
                           TokenizerMode mode) {
  return train_merges(std::move(seqs), k, mode, MergeRule::kLikelihoodRatio);
}

Vocabulary train_bpe(const Corpus& c, std::size_t k, TokenizerMode mode) {
  return train_bpe(training_sequences(c, mode), k, mode);
}

Vocabulary train_wordpiece(const Corpus& c, std::size_t k, TokenizerMode mode) {
  return train_wordpiece(training_sequences(c, mode), k, mode);
}

namespace {

void greedy_segment(const Vocabulary& v, const std::vector<std::string>& cps,
                    std::vector<TokenId>& ids) {
  std::size_t i = 0;
  while (i < cps.size()) {
    const std::size_t max_len = std::min(v.max_token_chars(), cps.size() - i);
    TokenId found = v.specials().unk;
    std::size_t used = 1;
    std::string piece;
    for (std::size_t len = 1; len <= max_len; ++len) {
      piece += cps[i + len - 1];
      if (auto id = v.find(piece); id && !v.is_special(*id)) {
        found = *id;
        used = len;
      }
    }
    ids.push_back(found);
    i += used;
  }
}

void viterbi_tokens(const Vocabulary& v, const std::vector<std::string>& cps,
                    std::vector<TokenId>& ids) {
  const std::size_t n = cps.size();
  const double kNeg = -std::numeric_limits<double>::infinity();
  double floor_logp = 0.0;
  for (const auto& [piece, p] : v.unigram_probs()) {
    if (p > 0) floor_logp = std::min(floor_logp, std::log(p));
  }
  const double unk_logp = floor_logp - 10.0;
  std::vector<double> best(n + 1, kNeg);
  std::vector<std::size_t> from(n + 1, 0);
  std::vector<TokenId> via(n + 1, v.specials().unk);
  best[0] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    std::string piece;
    const std::size_t lo = j > v.max_token_chars() ? j - v.max_token_chars() : 0;
    for (std::size_t i = j; i-- > lo;) {
      piece.insert(0, cps[i]);
      if (best[i] == kNeg) continue;
      auto it = v.unigram_probs().find(piece);
      if (it == v.unigram_probs().end() || it->second <= 0) continue;
      auto id = v.find(piece);
      if (!id || v.is_special(*id)) continue;
      const double score = best[i] + std::log(it->second);
      if (score > best[j]) {
        best[j] = score;
        from[j] = i;
        via[j] = *id;
      }
    }
    if (best[j] == kNeg && best[j - 1] != kNeg) {
      best[j] = best[j - 1] + unk_logp;
      from[j] = j - 1;
      via[j] = v.specials().unk;
    }
  }
  std::vector<TokenId> rev;
  for (std::size_t j = n; j > 0; j = from[j]) rev.push_back(via[j]);
  ids.insert(ids.end(), rev.rbegin(), rev.rend());
}

void segment(const Vocabulary& v, const std::vector<std::string>& cps,
             std::vector<TokenId>& ids) {
  if (v.has_unigram_model()) {
    viterbi_tokens(v, cps, ids);
  } else {
    greedy_segment(v, cps, ids);
  }
}

}  // namespace

TokenSequence encode(const Vocabulary& v, std::string_view raw) {
  TokenSequence out;
  const std::vector<std::string> words = text::split_whitespace(raw);
  if (v.mode() == TokenizerMode::kWordBoundary) {
    for (const auto& w : words) {
      const std::size_t before = out.ids.size();
      segment(v, text::code_points(w), out.ids);
      for (std::size_t i = before; i < out.ids.size(); ++i) {
        out.word_start.push_back(i == before);
      }
    }
    return out;
  }
  std::string stream;
  for (const auto& w : words) {
    stream.append(kSpaceSymbol);
    stream.append(w);
  }
  segment(v, text::code_points(stream), out.ids);
  for (TokenId id : out.ids) {
    out.word_start.push_back(v.token(id).starts_with(kSpaceSymbol));
  }
  return out;
}

std::string decode(const Vocabulary& v, const TokenSequence& seq) {
  std::string out;
  if (v.mode() == TokenizerMode::kWordBoundary) {
    for (std::size_t i = 0; i < seq.ids.size(); ++i) {
      const std::string& t = v.token(seq.ids[i]);
      const bool start = i < seq.word_start.size() ? seq.word_start[i] : false;
      if (start && !out.empty()) out.push_back(' ');
      out.append(t);
    }
    return out;
  }
  for (TokenId id : seq.ids) out.append(v.token(id));
  std::string spaced;
  for (std::size_t i = 0; i < out.size();) {
    if (out.compare(i, kSpaceSymbol.size(), kSpaceSymbol) == 0) {
      if (!spaced.empty()) spaced.push_back(' ');
      i += kSpaceSymbol.size();
    } else {
      spaced.push_back(out[i++]);
    }
  }
  return spaced;
}

std::vector<std::string> render_pieces(const Vocabulary& v,
                                       const TokenSequence& seq) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    std::string t = v.token(seq.ids[i]);
    if (v.mode() == TokenizerMode::kWordBoundary && i > 0 && seq.word_start[i]) {
      t.insert(0, kWordStartGlyph);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace objforge
