#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "objforge/error.hpp"
#include "objforge/text.hpp"
#include "objforge/tokenizer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace objforge;

using objforge::testing::apply;
using objforge::testing::Pair;
using objforge::testing::ratio_oracle;
using objforge::testing::words;

TEST_CASE("bpe reproduces the hand-derived merge sequence") {
  // hug x10, pug x5, pun x12, bun x4, hugs x5. By hand:
  //   u+g 20; u+n 16; h+ug 15; p+un 12; then hug+s 5 ties p+ug 5 and the
  //   smaller pair wins; p+ug 5; b+un 4.
  const auto seqs = words({{"hug", 10}, {"pug", 5}, {"pun", 12}, {"bun", 4}, {"hugs", 5}});
  const Vocabulary v = train_bpe(seqs, 14, TokenizerMode::kWordBoundary);
  const std::vector<Pair> expected{{"u", "g"},   {"u", "n"}, {"h", "ug"}, {"p", "un"},
                                   {"hug", "s"}, {"p", "ug"}, {"b", "un"}};
  CHECK(v.merges() == expected);
  CHECK(v.size() == 14 + SpecialTokens::kCount);
}

TEST_CASE("bpe edge cases") {
  const auto seqs = words({{"aaab", 2}});
  const Vocabulary one = train_bpe(seqs, 3, TokenizerMode::kWordBoundary);
  CHECK(one.merges() == std::vector<Pair>{{"a", "a"}});
  // aa a b: (aa,a) and (a,b) both occur twice; the smaller pair wins
  const Vocabulary two = train_bpe(seqs, 4, TokenizerMode::kWordBoundary);
  CHECK(two.merges() == std::vector<Pair>{{"a", "a"}, {"a", "b"}});
  CHECK(train_bpe(seqs, 2, TokenizerMode::kWordBoundary).merges().empty());
  CHECK_THROWS_AS(train_bpe(seqs, 1, TokenizerMode::kWordBoundary), ConfigError);
}

TEST_CASE("wordpiece merges match the ratio oracle at every step") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<std::string, int>> ws;
    std::size_t tokens = 0;
    while (tokens < 900) {
      std::string w;
      const std::size_t len = 2 + uniform_index(rng, 5);
      for (std::size_t i = 0; i < len; ++i) w.push_back("abcde"[uniform_index(rng, 5)]);
      const int n = 1 + static_cast<int>(uniform_index(rng, 4));
      ws.push_back({w, n});
      tokens += len * n;
    }
    auto seqs = words(ws);
    const Vocabulary v = train_wordpiece(seqs, 40, TokenizerMode::kWordBoundary);
    for (const auto& m : v.merges()) {
      const auto expect = ratio_oracle(seqs);
      REQUIRE(expect);
      CHECK(*expect == m);
      apply(seqs, m);
    }
  }
}

TEST_CASE("wordpiece prefers rare components over a frequent pair") {
  // x+y occurs twice with rare parts; a+b three times but a and b are everywhere.
  const auto seqs = words({{"xy", 2}, {"ab", 3}, {"aa", 10}, {"bb", 10}});
  const Vocabulary v = train_wordpiece(seqs, 5, TokenizerMode::kWordBoundary);
  REQUIRE_FALSE(v.merges().empty());
  CHECK(v.merges()[0] == Pair{"x", "y"});
  const Vocabulary b = train_bpe(seqs, 5, TokenizerMode::kWordBoundary);
  CHECK(b.merges()[0] != Pair{"x", "y"});
}

TEST_CASE("encode uses longest match and maps unknown characters to unk") {
  const Vocabulary v({"a", "b", "ab"}, {{"a", "b"}}, TokenizerMode::kWordBoundary);
  const auto ab = *v.find("ab");
  CHECK(encode(v, "ab").ids == std::vector<TokenId>{ab});
  const auto seq = encode(v, "ab zab");
  CHECK(seq.ids == std::vector<TokenId>{ab, v.specials().unk, ab});
  CHECK(seq.word_start == std::vector<bool>{true, true, false});
  CHECK(decode(v, TokenSequence{}) == "");
  CHECK_THROWS_AS(decode(v, TokenSequence{{999}, {true}}), RangeError);
}

TEST_CASE("decode inverts encode on in-alphabet text") {
  const Corpus c = synthetic_corpus(6, 3, 4, 2);
  for (auto mode : {TokenizerMode::kWordBoundary, TokenizerMode::kWhitespaceSymbol}) {
    const Vocabulary v = train_bpe(c, 80, mode);
    for (const auto& d : c.documents()) {
      for (const auto& p : d.paragraphs) {
        const auto ids = encode(v, p.text());
        for (TokenId t : ids.ids) CHECK(t != v.specials().unk);
        CHECK(decode(v, ids) == p.text());
      }
    }
  }
}

TEST_CASE("vocabulary json round trip") {
  const Vocabulary v = train_wordpiece(synthetic_corpus(3, 2, 3, 5), 40);
  const Vocabulary back = Vocabulary::from_json(v.to_json());
  CHECK(back.tokens() == v.tokens());
  CHECK(back.merges() == v.merges());
  CHECK(back.mode() == v.mode());
}

namespace {

// Best log-probability of `w` by enumerating every segmentation.
double best_segmentation(const std::string& w, const unigram::Model& m) {
  if (w.empty()) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t len = 1; len <= w.size(); ++len) {
    const auto it = m.find(w.substr(0, len));
    if (it == m.end() || it->second <= 0.0) continue;
    best = std::max(best, std::log(it->second) + best_segmentation(w.substr(len), m));
  }
  return best;
}

}  // namespace

TEST_CASE("unigram exact deltas on abab") {
  const auto seqs = words({{"abab", 5}});
  UnigramOptions o;
  o.exact_deltas = true;
  o.min_piece_freq = 1;
  const auto seed = unigram::seed_pieces(seqs, o);
  std::vector<std::string> pieces;
  for (const auto& [p, _] : seed) pieces.push_back(p);
  CHECK(pieces == std::vector<std::string>{"a", "ab", "aba", "abab", "b", "ba", "bab"});
  const auto model = unigram::fit(seqs, pieces, {}, o.em_iterations, o.max_piece_chars);
  const auto deltas = unigram::loss_deltas(seqs, model, o);
  CHECK(deltas.size() == 5);
  const double base = 5 * best_segmentation("abab", model);
  CHECK(unigram::viterbi_log_likelihood(seqs, model, o.max_piece_chars) ==
        doctest::Approx(base).epsilon(1e-12));
  // Oracle: retrain without each piece, score by exhaustive segmentation.
  for (const auto& [piece, delta] : deltas) {
    std::vector<std::string> rest;
    for (const auto& p : pieces) {
      if (p != piece) rest.push_back(p);
    }
    const auto refit = unigram::fit(seqs, rest, model, o.em_iterations, o.max_piece_chars);
    CHECK(delta == doctest::Approx(base - 5 * best_segmentation("abab", refit)).epsilon(1e-9));
  }
}

TEST_CASE("unigram pruning keeps characters") {
  const Corpus c = synthetic_corpus(4, 2, 3, 8);
  UnigramOptions o;
  o.alpha = 1.0;
  const auto seqs = training_sequences(c, TokenizerMode::kWordBoundary);
  const auto chars = alphabet(seqs);
  const Vocabulary v = train_unigram(c, chars.size(), o);
  CHECK(v.size() == chars.size() + SpecialTokens::kCount);
  const Vocabulary w = train_unigram(c, chars.size() + 10);
  CHECK(w.size() == chars.size() + 10 + SpecialTokens::kCount);
  CHECK(w.has_unigram_model());
  for (const auto& d : c.documents()) {
    for (const auto& p : d.paragraphs) CHECK(decode(w, encode(w, p.text())) == p.text());
  }
}
