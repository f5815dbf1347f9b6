#pragma once

#include <string>
#include <vector>

#include "objforge/corpus.hpp"
#include "objforge/tokenizer.hpp"

namespace objforge::testing {

// Vocabulary of `n` single-letter-ish learned tokens "t0".."t{n-1}".
inline Vocabulary numbered_vocab(std::size_t n) {
  std::vector<std::string> learned;
  for (std::size_t i = 0; i < n; ++i) learned.push_back("t" + std::to_string(i));
  return Vocabulary(learned, {}, TokenizerMode::kWordBoundary);
}

inline std::vector<TokenId> regular_sequence(const Vocabulary& v, std::size_t len, Rng& rng) {
  const auto ids = v.regular_ids();
  std::vector<TokenId> out(len);
  for (auto& t : out) t = ids[uniform_index(rng, ids.size())];
  return out;
}

inline Document make_doc(std::string id, std::vector<std::vector<std::string>> paras) {
  Document d;
  d.id = std::move(id);
  for (auto& p : paras) d.paragraphs.push_back(Paragraph{std::move(p)});
  return d;
}

}  // namespace objforge::testing
