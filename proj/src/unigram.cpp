#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "objforge/error.hpp"
#include "objforge/text.hpp"
#include "objforge/tokenizer.hpp"

namespace objforge {
namespace unigram {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMinExpectedCount = 1e-10;

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Arc {
  std::size_t begin;
  std::size_t end;
  const std::string* piece;
  double logp;
};

using LogModel = std::unordered_map<std::string, double>;

LogModel to_log(const Model& m) {
  LogModel out;
  for (const auto& [piece, p] : m) {
    if (p > 0) out.emplace(piece, std::log(p));
  }
  return out;
}

std::vector<Arc> arcs(const std::vector<std::string>& symbols,
                      const LogModel& logm, std::size_t max_chars,
                      const std::string* excluded = nullptr) {
  std::vector<Arc> out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    std::string piece;
    for (std::size_t j = i + 1; j <= std::min(symbols.size(), i + max_chars);
         ++j) {
      piece += symbols[j - 1];
      auto it = logm.find(piece);
      if (it == logm.end()) continue;
      if (excluded && it->first == *excluded) continue;
      out.push_back({i, j, &it->first, it->second});
    }
  }
  return out;
}

// Best segmentation score; `shift` is added to every arc log-probability.
double best_score(const std::vector<std::string>& symbols, const LogModel& logm,
                  std::size_t max_chars, const std::string* excluded,
                  double shift, std::vector<const std::string*>* path) {
  const std::size_t n = symbols.size();
  std::vector<double> best(n + 1, kNegInf);
  std::vector<const Arc*> via(n + 1, nullptr);
  best[0] = 0.0;
  const std::vector<Arc> all = arcs(symbols, logm, max_chars, excluded);
  // Arcs are ordered by begin, so every arc ending at j is relaxed after
  // best[begin] is final.
  for (const Arc& a : all) {
    if (best[a.begin] == kNegInf) continue;
    const double s = best[a.begin] + a.logp + shift;
    if (s > best[a.end]) {
      best[a.end] = s;
      via[a.end] = &a;
    }
  }
  if (path && best[n] != kNegInf) {
    path->clear();
    for (std::size_t j = n; j > 0; j = via[j]->begin) path->push_back(via[j]->piece);
    std::reverse(path->begin(), path->end());
  }
  return best[n];
}

}  // namespace

std::map<std::string, std::int64_t> seed_pieces(
    const std::vector<SymbolSequence>& seqs, const UnigramOptions& opts) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& seq : seqs) {
    const auto& s = seq.symbols;
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::string piece;
      for (std::size_t j = i; j < std::min(s.size(), i + opts.max_piece_chars);
           ++j) {
        piece += s[j];
        counts[piece] += seq.freq;
      }
    }
  }
  for (auto it = counts.begin(); it != counts.end();) {
    const bool single = text::code_point_count(it->first) == 1;
    if (!single && it->second < opts.min_piece_freq) {
      it = counts.erase(it);
    } else {
      ++it;
    }
  }
  return counts;
}

Model fit(const std::vector<SymbolSequence>& seqs,
          const std::vector<std::string>& pieces,
          const std::map<std::string, double>& init, int iterations,
          std::size_t max_chars) {
  Model m;
  double total = 0.0;
  for (const auto& p : pieces) {
    auto it = init.find(p);
    const double w = it == init.end() ? 1.0 : std::max(it->second, kMinExpectedCount);
    m[p] = w;
    total += w;
  }
  for (auto& [p, w] : m) w /= total;

  for (int iter = 0; iter < iterations; ++iter) {
    const LogModel logm = to_log(m);
    std::unordered_map<const std::string*, double> expected;
    for (const auto& seq : seqs) {
      const std::size_t n = seq.symbols.size();
      const std::vector<Arc> all = arcs(seq.symbols, logm, max_chars);
      std::vector<double> fwd(n + 1, kNegInf), bwd(n + 1, kNegInf);
      fwd[0] = 0.0;
      for (const Arc& a : all) {
        if (fwd[a.begin] != kNegInf) {
          fwd[a.end] = log_add(fwd[a.end], fwd[a.begin] + a.logp);
        }
      }
      bwd[n] = 0.0;
      for (auto it = all.rbegin(); it != all.rend(); ++it) {
        if (bwd[it->end] != kNegInf) {
          bwd[it->begin] = log_add(bwd[it->begin], it->logp + bwd[it->end]);
        }
      }
      const double z = fwd[n];
      if (z == kNegInf) continue;
      for (const Arc& a : all) {
        const double lp = fwd[a.begin] + a.logp + bwd[a.end] - z;
        if (lp == kNegInf || fwd[a.begin] == kNegInf) continue;
        expected[a.piece] += static_cast<double>(seq.freq) * std::exp(lp);
      }
    }
    Model next;
    double sum = 0.0;
    for (const auto& [p, w] : m) {
      auto it = logm.find(p);
      double c = 0.0;
      if (it != logm.end()) {
        auto e = expected.find(&it->first);
        if (e != expected.end()) c = e->second;
      }
      c = std::max(c, kMinExpectedCount);
      next[p] = c;
      sum += c;
    }
    for (auto& [p, w] : next) w /= sum;
    m = std::move(next);
  }
  return m;
}

double viterbi_log_likelihood(const std::vector<SymbolSequence>& seqs,
                              const Model& model, std::size_t max_chars) {
  const LogModel logm = to_log(model);
  double ll = 0.0;
  for (const auto& seq : seqs) {
    ll += static_cast<double>(seq.freq) *
          best_score(seq.symbols, logm, max_chars, nullptr, 0.0, nullptr);
  }
  return ll;
}

std::vector<std::string> viterbi_segment(const std::vector<std::string>& symbols,
                                         const Model& model,
                                         std::size_t max_chars) {
  const LogModel logm = to_log(model);
  std::vector<const std::string*> path;
  if (best_score(symbols, logm, max_chars, nullptr, 0.0, &path) == kNegInf) {
    return {};
  }
  std::vector<std::string> out;
  for (const auto* p : path) out.push_back(*p);
  return out;
}

std::map<std::string, double> loss_deltas(
    const std::vector<SymbolSequence>& seqs, const Model& model,
    const UnigramOptions& opts) {
  std::map<std::string, double> deltas;
  const std::size_t max_chars = opts.max_piece_chars;

  if (opts.exact_deltas) {
    const double base = viterbi_log_likelihood(seqs, model, max_chars);
    std::vector<std::string> pieces;
    for (const auto& [p, _] : model) pieces.push_back(p);
    for (const auto& [t, _] : model) {
      if (text::code_point_count(t) == 1) continue;
      std::vector<std::string> reduced;
      for (const auto& p : pieces) {
        if (p != t) reduced.push_back(p);
      }
      const Model refit = fit(seqs, reduced, model, opts.em_iterations, max_chars);
      deltas[t] = base - viterbi_log_likelihood(seqs, refit, max_chars);
    }
    return deltas;
  }

  // Leave-one-out: drop the piece, renormalize the remaining probabilities
  // by 1/(1-p). Sequences whose best path used the piece are re-segmented;
  // the others keep their path and only pick up the renormalization.
  const LogModel logm = to_log(model);
  std::vector<double> ll(seqs.size());
  std::vector<std::size_t> n_tokens(seqs.size());
  std::unordered_map<const std::string*, std::vector<std::size_t>> users;
  double total_tokens = 0.0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    std::vector<const std::string*> path;
    ll[i] = best_score(seqs[i].symbols, logm, max_chars, nullptr, 0.0, &path);
    n_tokens[i] = path.size();
    total_tokens += static_cast<double>(seqs[i].freq) * path.size();
    std::set<const std::string*> distinct(path.begin(), path.end());
    for (const auto* p : distinct) users[p].push_back(i);
  }
  for (const auto& [t, p_t] : model) {
    if (text::code_point_count(t) == 1) continue;
    const double shift = -std::log1p(-p_t);
    const std::string* key = &logm.find(t)->first;
    double delta = 0.0;
    double affected_tokens = 0.0;
    if (auto it = users.find(key); it != users.end()) {
      for (std::size_t i : it->second) {
        const double after =
            best_score(seqs[i].symbols, logm, max_chars, key, shift, nullptr);
        delta += static_cast<double>(seqs[i].freq) * (ll[i] - after);
        affected_tokens += static_cast<double>(seqs[i].freq) * n_tokens[i];
      }
    }
    delta -= (total_tokens - affected_tokens) * shift;
    deltas[t] = delta;
  }
  return deltas;
}

}  // namespace unigram

Vocabulary train_unigram(const std::vector<SymbolSequence>& seqs,
                         std::size_t k, const UnigramOptions& opts,
                         TokenizerMode mode) {
  if (opts.alpha <= 0.0 || opts.alpha > 1.0) {
    throw ConfigError("unigram prune fraction must be in (0, 1]");
  }
  const std::vector<std::string> chars = alphabet(seqs);
  if (k < chars.size()) {
    throw ConfigError("target vocabulary size " + std::to_string(k) +
                      " would require dropping single characters (alphabet " +
                      std::to_string(chars.size()) + ")");
  }
  const auto seed = unigram::seed_pieces(seqs, opts);
  if (seed.size() < k) {
    throw ConfigError("unigram seed set has " + std::to_string(seed.size()) +
                      " pieces, fewer than the target " + std::to_string(k));
  }
  std::vector<std::string> pieces;
  std::map<std::string, double> init;
  for (const auto& [p, c] : seed) {
    pieces.push_back(p);
    init[p] = static_cast<double>(c);
  }
  unigram::Model model = unigram::fit(seqs, pieces, init, opts.em_iterations,
                                      opts.max_piece_chars);
  while (pieces.size() > k) {
    const auto deltas = unigram::loss_deltas(seqs, model, opts);
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [p, d] : deltas) ranked.emplace_back(d, p);
    std::sort(ranked.begin(), ranked.end());
    std::size_t n_remove = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(pieces.size() * opts.alpha)));
    n_remove = std::min({n_remove, pieces.size() - k, ranked.size()});
    std::set<std::string> removed;
    for (std::size_t i = 0; i < n_remove; ++i) removed.insert(ranked[i].second);
    std::erase_if(pieces, [&](const std::string& p) { return removed.count(p) > 0; });
    model = unigram::fit(seqs, pieces, model, opts.em_iterations,
                         opts.max_piece_chars);
  }
  std::vector<std::string> learned = chars;
  for (const auto& p : pieces) {
    if (text::code_point_count(p) > 1) learned.push_back(p);
  }
  return Vocabulary(std::move(learned), {}, mode, std::move(model));
}

Vocabulary train_unigram(const Corpus& c, std::size_t k,
                         const UnigramOptions& opts, TokenizerMode mode) {
  return train_unigram(training_sequences(c, mode), k, opts, mode);
}

}  // namespace objforge
