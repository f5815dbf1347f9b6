#include "objforge/corruption.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "objforge/error.hpp"
#include "objforge/io.hpp"

namespace objforge {

using nlohmann::json;

const char* objective_name(TokenObjective o) {
  switch (o) {
    case TokenObjective::kMLM: return "mlm";
    case TokenObjective::kRTS: return "rts";
    case TokenObjective::kSLM: return "slm";
    case TokenObjective::kCRTS: return "crts";
  }
  return "?";
}

std::optional<TokenObjective> parse_token_objective(std::string_view name) {
  if (name == "mlm") return TokenObjective::kMLM;
  if (name == "rts") return TokenObjective::kRTS;
  if (name == "slm") return TokenObjective::kSLM;
  if (name == "crts" || name == "c-rts") return TokenObjective::kCRTS;
  return std::nullopt;
}

std::size_t CorruptionOutput::selected() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

std::string CorruptionOutput::to_json() const {
  json j;
  j["ids"] = ids;
  j["labels"] = labels;
  std::vector<int> m(mask.begin(), mask.end());
  j["mask"] = m;
  if (prov) {
    json p = json::array();
    for (const auto& cp : *prov) p.push_back({cp.source, cp.target});
    j["prov"] = std::move(p);
  }
  return j.dump();
}

void CrtsConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("rate must be in (0, 1)");
}

FMatrix& FMatrix::operator+=(const FMatrix& other) {
  if (other.n_ != n_) throw ShapeError("F matrix sizes differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

namespace {

void put_le(std::string& out, uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

uint64_t get_le(std::string_view in, std::size_t off) {
  uint64_t x = 0;
  for (int i = 0; i < 8; ++i) {
    x |= static_cast<uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  }
  return x;
}

}  // namespace

std::string FMatrix::to_bytes() const {
  std::string out;
  out.reserve(8 * (1 + counts_.size()));
  put_le(out, n_);
  for (int64_t c : counts_) put_le(out, std::bit_cast<uint64_t>(c));
  return out;
}

FMatrix FMatrix::from_bytes(std::string_view bytes) {
  if (bytes.size() < 8) throw ValidationError("F matrix: truncated header");
  const uint64_t n = get_le(bytes, 0);
  if (n > (1u << 20) || bytes.size() != 8 * (1 + n * n)) {
    throw ValidationError("F matrix: size does not match header n=" +
                          std::to_string(n));
  }
  FMatrix f(n);
  for (std::size_t i = 0; i < n * n; ++i) {
    f.counts_[i] = std::bit_cast<int64_t>(get_le(bytes, 8 * (i + 1)));
  }
  return f;
}

void FMatrix::save(const std::filesystem::path& path) const {
  io::write_file(path, to_bytes());
}

FMatrix FMatrix::load(const std::filesystem::path& path) {
  return from_bytes(io::read_file(path));
}

namespace {

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("rate must be in [0, 1]");
}

CorruptionOutput blank(const std::vector<TokenId>& ids, int32_t fill) {
  CorruptionOutput out;
  out.ids = ids;
  out.labels.assign(ids.size(), fill);
  out.mask.assign(ids.size(), 0);
  return out;
}

bool selectable(const Vocabulary& v, TokenId t) {
  if (t < 0 || static_cast<std::size_t>(t) >= v.size()) {
    throw RangeError("token id " + std::to_string(t) + " outside vocabulary");
  }
  return !v.is_special(t);
}

// Uniform regular token different from `original`.
TokenId other_regular(const Vocabulary& v, TokenId original, Rng& rng) {
  const std::size_t first = SpecialTokens::kCount;
  const std::size_t n_regular = v.size() - first;
  if (n_regular < 2) {
    throw ConfigError("replacement needs at least two regular tokens");
  }
  std::size_t k = first + uniform_index(rng, n_regular - 1);
  if (k >= static_cast<std::size_t>(original)) ++k;
  return static_cast<TokenId>(k);
}

// RTS and SLM share selection and replacement; they differ in labels.
CorruptionOutput swap_corrupt(const std::vector<TokenId>& ids, double rate,
                              Rng& rng, const Vocabulary& v, bool binary) {
  check_rate(rate);
  CorruptionOutput out = blank(ids, binary ? 0 : kIgnoreLabel);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!selectable(v, ids[i])) continue;
    if (uniform01(rng) >= rate) continue;
    out.mask[i] = 1;
    out.ids[i] = other_regular(v, ids[i], rng);
    out.labels[i] = binary ? 1 : ids[i];
  }
  return out;
}

}  // namespace

CorruptionOutput mlm_corrupt(const std::vector<TokenId>& ids, double rate,
                             Rng& rng, const Vocabulary& v) {
  check_rate(rate);
  CorruptionOutput out = blank(ids, kIgnoreLabel);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!selectable(v, ids[i])) continue;
    if (uniform01(rng) >= rate) continue;
    out.mask[i] = 1;
    out.labels[i] = ids[i];
    const double branch = uniform01(rng);
    if (branch < 0.8) {
      out.ids[i] = v.specials().mask;
    } else if (branch < 0.9) {
      out.ids[i] = other_regular(v, ids[i], rng);
    }
  }
  return out;
}

CorruptionOutput rts_corrupt(const std::vector<TokenId>& ids, double rate,
                             Rng& rng, const Vocabulary& v) {
  return swap_corrupt(ids, rate, rng, v, true);
}

CorruptionOutput slm_corrupt(const std::vector<TokenId>& ids, double rate,
                             Rng& rng, const Vocabulary& v) {
  return swap_corrupt(ids, rate, rng, v, false);
}

std::vector<double> target_cluster_distribution(std::span<const int64_t> f_row,
                                                double gamma) {
  if (f_row.empty()) throw ConfigError("empty F row");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  const std::size_t n = f_row.size();
  const auto [lo_it, hi_it] = std::minmax_element(f_row.begin(), f_row.end());
  const int64_t lo = *lo_it;
  const int64_t hi = *hi_it;
  std::vector<double> p(n);
  if (lo == hi) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(n));
    return p;
  }
  const long double range = static_cast<long double>(hi) - lo;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < n; ++b) {
    const double scaled =
        static_cast<double>((static_cast<long double>(f_row[b]) - lo) / range);
    p[b] = scaled / gamma;
    top = std::max(top, p[b]);
  }
  double sum = 0.0;
  for (double& x : p) {
    x = std::exp(x - top);
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}

CorruptionOutput crts_corrupt(const std::vector<TokenId>& ids,
                              const CrtsConfig& cfg, const ClusterMap& cm,
                              const FMatrix& f, Rng& rng, const Vocabulary& v) {
  if (!(cfg.gamma > 0.0)) throw ConfigError("gamma must be positive");
  check_rate(cfg.rate);
  if (cm.n() != f.n()) {
    throw ConfigError("cluster map has " + std::to_string(cm.n()) +
                      " clusters but F matrix is " + std::to_string(f.n()) +
                      "x" + std::to_string(f.n()));
  }
  if (cm.size() != v.size()) {
    throw ConfigError("cluster map covers " + std::to_string(cm.size()) +
                      " tokens, vocabulary has " + std::to_string(v.size()));
  }
  // Regular members per cluster; specials are never drawn.
  std::vector<std::vector<TokenId>> pool(cm.n());
  for (std::size_t c = 0; c < cm.n(); ++c) {
    for (std::size_t t : cm.members(c)) {
      if (!v.is_special(static_cast<TokenId>(t))) pool[c].push_back(static_cast<TokenId>(t));
    }
  }

  CorruptionOutput out = blank(ids, 0);
  out.prov.emplace();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!selectable(v, ids[i])) continue;
    if (uniform01(rng) >= cfg.rate) continue;
    const TokenId orig = ids[i];
    const std::size_t a = cm.cluster_of(orig);
    std::vector<double> p = target_cluster_distribution(f.row(a), cfg.gamma);
    // Clusters with nothing to draw from are removed and the rest renormalized.
    double mass = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) {
      const std::size_t avail = pool[b].size() - (b == a ? 1 : 0);
      if (avail == 0) p[b] = 0.0;
      mass += p[b];
    }
    if (mass <= 0.0) throw ConfigError("no cluster offers a replacement token");
    std::discrete_distribution<std::size_t> pick_cluster(p.begin(), p.end());
    const std::size_t b = pick_cluster(rng);
    const auto& members = pool[b];
    TokenId repl;
    if (b == a) {
      const auto self = std::find(members.begin(), members.end(), orig) - members.begin();
      std::size_t k = uniform_index(rng, members.size() - 1);
      if (k >= static_cast<std::size_t>(self)) ++k;
      repl = members[k];
    } else {
      repl = members[uniform_index(rng, members.size())];
    }
    out.mask[i] = 1;
    out.ids[i] = repl;
    out.labels[i] = 1;
    out.prov->push_back({a, b});
  }
  return out;
}

void crts_update(FMatrix& f, const std::vector<int>& predictions,
                 const std::vector<ClusterPair>& prov) {
  if (predictions.size() != prov.size()) {
    throw ShapeError("got " + std::to_string(predictions.size()) +
                     " predictions for " + std::to_string(prov.size()) +
                     " replacements");
  }
  for (std::size_t i = 0; i < prov.size(); ++i) {
    if (prov[i].source >= f.n() || prov[i].target >= f.n()) {
      throw RangeError("cluster pair outside F matrix");
    }
  }
  for (std::size_t i = 0; i < prov.size(); ++i) {
    f.at(prov[i].source, prov[i].target) += predictions[i] == 0 ? 1 : -1;
  }
}

void crts_update_positions(FMatrix& f, const CorruptionOutput& out,
                           const std::vector<int>& position_predictions) {
  if (!out.prov) throw ConfigError("corruption output carries no cluster pairs");
  if (position_predictions.size() != out.ids.size()) {
    throw ShapeError("prediction count does not match sequence length");
  }
  std::vector<int> preds;
  for (std::size_t i = 0; i < out.mask.size(); ++i) {
    if (out.mask[i]) preds.push_back(position_predictions[i]);
  }
  crts_update(f, preds, *out.prov);
}

}  // namespace objforge
