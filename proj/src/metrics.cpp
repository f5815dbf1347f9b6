#include "objforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <nlohmann/json.hpp>

#include "objforge/error.hpp"

namespace objforge {

using nlohmann::json;

void RankedGroup::validate() const {
  if (scores.empty()) throw ValidationError("ranked group has no candidates");
  if (scores.size() != relevance.size()) {
    throw ValidationError("ranked group has " + std::to_string(scores.size()) + " scores but " +
                          std::to_string(relevance.size()) + " labels");
  }
  for (int r : relevance) {
    if (r != 0 && r != 1) throw ValidationError("relevance labels must be 0 or 1");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("scores must be finite");
  }
}

std::vector<std::size_t> rank_order(const RankedGroup& g) {
  std::vector<std::size_t> order(g.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return g.scores[a] > g.scores[b]; });
  return order;
}

namespace {

std::size_t positives(const RankedGroup& g) {
  return static_cast<std::size_t>(std::count(g.relevance.begin(), g.relevance.end(), 1));
}

void require_positive(const RankedGroup& g) {
  g.validate();
  if (positives(g) == 0) throw RangeError("group has no relevant candidate");
}

}  // namespace

double average_precision(const RankedGroup& g) {
  require_positive(g);
  const auto order = rank_order(g);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (g.relevance[order[i]] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(hits);
}

double reciprocal_rank(const RankedGroup& g) {
  require_positive(g);
  const auto order = rank_order(g);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (g.relevance[order[i]] == 1) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double precision_at_k(const RankedGroup& g, std::size_t k) {
  require_positive(g);
  if (k == 0) throw RangeError("k must be at least 1");
  const auto order = rank_order(g);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) hits += g.relevance[order[i]];
  return static_cast<double>(hits) / static_cast<double>(k);
}

double hit_at_k(const RankedGroup& g, std::size_t k) {
  require_positive(g);
  if (k == 0) throw RangeError("k must be at least 1");
  const auto order = rank_order(g);
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
    if (g.relevance[order[i]] == 1) return 1.0;
  }
  return 0.0;
}

std::string RankingReport::to_json() const {
  json j;
  j["map"] = map;
  j["mrr"] = mrr;
  j["p@1"] = p_at_1;
  j["hr@" + std::to_string(k)] = hr_at_k;
  j["n_groups"] = n_groups;
  j["excluded"] = excluded;
  return j.dump();
}

RankingReport evaluate_ranking(const std::vector<RankedGroup>& groups, std::size_t k,
                               std::vector<std::string>* warnings) {
  if (k == 0) throw RangeError("k must be at least 1");
  RankingReport r;
  r.k = k;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    g.validate();
    if (positives(g) == 0) {
      ++r.excluded;
      if (warnings) warnings->push_back("group " + std::to_string(i) + " has no positive; skipped");
      continue;
    }
    ++r.n_groups;
    r.map += average_precision(g);
    r.mrr += reciprocal_rank(g);
    r.p_at_1 += precision_at_k(g, 1);
    r.hr_at_k += hit_at_k(g, k);
  }
  if (r.n_groups) {
    const double n = static_cast<double>(r.n_groups);
    r.map /= n;
    r.mrr /= n;
    r.p_at_1 /= n;
    r.hr_at_k /= n;
  }
  return r;
}

std::vector<RankedGroup> parse_ranking_jsonl(std::string_view text) {
  std::vector<RankedGroup> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + e.what());
    }
    if (!j.is_object() || !j.contains("scores") || !j["scores"].is_array()) {
      throw ValidationError(where + "field 'scores' must be an array");
    }
    if (!j.contains("labels") || !j["labels"].is_array()) {
      throw ValidationError(where + "field 'labels' must be an array");
    }
    RankedGroup g;
    for (const auto& s : j["scores"]) {
      if (!s.is_number()) throw ValidationError(where + "field 'scores' must hold numbers");
      g.scores.push_back(s.get<double>());
    }
    for (const auto& y : j["labels"]) {
      if (!y.is_number_integer()) throw ValidationError(where + "field 'labels' must hold 0/1");
      g.relevance.push_back(y.get<int>());
    }
    try {
      g.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    out.push_back(std::move(g));
  }
  return out;
}

const char* objective_name(HeadObjective o) {
  switch (o) {
    case HeadObjective::kMLM: return "mlm";
    case HeadObjective::kSLM: return "slm";
    case HeadObjective::kRTS: return "rts";
    case HeadObjective::kCRTS: return "crts";
    case HeadObjective::kELECTRA: return "electra";
  }
  return "?";
}

std::optional<HeadObjective> parse_head_objective(std::string_view name) {
  if (name == "c-rts") return HeadObjective::kCRTS;
  for (auto o : {HeadObjective::kMLM, HeadObjective::kSLM, HeadObjective::kRTS,
                 HeadObjective::kCRTS, HeadObjective::kELECTRA}) {
    if (name == objective_name(o)) return o;
  }
  return std::nullopt;
}

HeadCost head_cost(HeadObjective o, std::size_t d, std::size_t vocab_size) {
  if (d == 0 || vocab_size == 0) throw RangeError("head sizes must be positive");
  HeadCost c{o, d, vocab_size, 0, 0};
  switch (o) {
    case HeadObjective::kMLM:
    case HeadObjective::kSLM: c.params = vocab_size * d; break;
    case HeadObjective::kRTS:
    case HeadObjective::kCRTS: c.params = 2 * d; break;
    // generator LM head plus the discriminator's binary head
    case HeadObjective::kELECTRA: c.params = vocab_size * d + 2 * d; break;
  }
  c.flops_per_token = 2 * c.params;
  return c;
}

double jointwise_latency_ratio(std::size_t k) {
  if (k < 1) throw RangeError("k must be at least 1");
  const double kk = static_cast<double>(k);
  return (kk + 1.0) * (kk + 1.0) / (4.0 * kk);
}

namespace {

std::string grouped(std::size_t n) {
  std::string s = std::to_string(n);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

}  // namespace

std::string flops_report(std::size_t d, std::size_t vocab_size) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %8s %8s %16s %18s\n", "head", "d", "vocab", "params",
                "flops/token");
  out += buf;
  for (auto o : {HeadObjective::kMLM, HeadObjective::kSLM, HeadObjective::kRTS,
                 HeadObjective::kCRTS, HeadObjective::kELECTRA}) {
    const HeadCost c = head_cost(o, d, vocab_size);
    std::snprintf(buf, sizeof buf, "%-8s %8zu %8zu %16s %18s\n", objective_name(o), d,
                  vocab_size, grouped(c.params).c_str(), grouped(c.flops_per_token).c_str());
    out += buf;
  }
  return out;
}

}  // namespace objforge
