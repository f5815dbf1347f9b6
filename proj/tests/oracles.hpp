#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "objforge/text.hpp"
#include "objforge/tokenizer.hpp"

namespace objforge::testing {

inline std::vector<SymbolSequence> words(const std::vector<std::pair<std::string, int>>& ws) {
  std::vector<SymbolSequence> out;
  for (const auto& [w, n] : ws) out.push_back({text::code_points(w), n});
  return out;
}

using Pair = std::pair<std::string, std::string>;

// Independent replay of a merge list over the training words.
inline void apply(std::vector<SymbolSequence>& seqs, const Pair& m) {
  for (auto& s : seqs) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < s.symbols.size(); ++i) {
      if (i + 1 < s.symbols.size() && s.symbols[i] == m.first && s.symbols[i + 1] == m.second) {
        out.push_back(m.first + m.second);
        ++i;
      } else {
        out.push_back(s.symbols[i]);
      }
    }
    s.symbols = out;
  }
}

// Brute-force likelihood-ratio choice: every adjacent pair is scored by
// count(l,r) / (count(l) * count(r)); ties go to the smallest pair.
inline std::optional<Pair> ratio_oracle(const std::vector<SymbolSequence>& seqs) {
  std::map<std::string, long double> uni;
  std::map<Pair, long double> bi;
  for (const auto& s : seqs) {
    for (std::size_t i = 0; i < s.symbols.size(); ++i) {
      uni[s.symbols[i]] += s.freq;
      if (i + 1 < s.symbols.size()) bi[{s.symbols[i], s.symbols[i + 1]}] += s.freq;
    }
  }
  std::optional<Pair> best;
  long double best_score = -1;
  for (const auto& [p, n] : bi) {
    if (n < 2) continue;
    const long double score = n / (uni[p.first] * uni[p.second]);
    if (score > best_score * (1 + 1e-15L)) {
      best = p;
      best_score = score;
    }
  }
  return best;
}


}  // namespace objforge::testing
