#include "objforge/embed_cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <nlohmann/json.hpp>

#include "objforge/error.hpp"
#include "objforge/io.hpp"
#include "objforge/random.hpp"

namespace objforge {

using nlohmann::json;

std::string EmbeddingTable::to_json() const {
  json j;
  j["dim"] = dim;
  json vectors = json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    vectors.push_back(std::vector<double>(row(i), row(i) + dim));
  }
  j["vectors"] = std::move(vectors);
  return j.dump();
}

EmbeddingTable EmbeddingTable::from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("embedding table: ") + e.what());
  }
  if (!j.contains("dim") || !j["dim"].is_number_unsigned()) {
    throw ValidationError("embedding table: field 'dim' missing or not a count");
  }
  if (!j.contains("vectors") || !j["vectors"].is_array()) {
    throw ValidationError("embedding table: field 'vectors' missing or not a list");
  }
  EmbeddingTable e(j["vectors"].size(), j["dim"].get<std::size_t>());
  for (std::size_t i = 0; i < e.rows; ++i) {
    const auto& v = j["vectors"][i];
    if (!v.is_array() || v.size() != e.dim) {
      throw ValidationError("embedding table: field 'vectors' row " +
                            std::to_string(i) + " has wrong length");
    }
    for (std::size_t k = 0; k < e.dim; ++k) e.row(i)[k] = v[k].get<double>();
  }
  return e;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  io::write_file(path, to_json() + "\n");
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  return from_json(io::read_file(path));
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

EmbeddingTable train_skipgram(const std::vector<std::vector<TokenId>>& sentences,
                              std::size_t vocab_size,
                              const SkipgramOptions& opts) {
  if (opts.dim == 0) throw ConfigError("embedding dimension must be positive");
  if (vocab_size == 0) throw ConfigError("vocabulary is empty");
  std::size_t n_tokens = 0;
  std::vector<double> counts(vocab_size, 0.0);
  for (const auto& s : sentences) {
    for (TokenId t : s) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
        throw RangeError("token id " + std::to_string(t) + " outside vocabulary");
      }
      counts[t] += 1.0;
      ++n_tokens;
    }
  }
  if (n_tokens == 0) throw EmptyCorpusError();

  Rng rng = make_rng(opts.seed, "skipgram");
  EmbeddingTable in(vocab_size, opts.dim);
  std::vector<double> out(vocab_size * opts.dim, 0.0);
  const double half = 0.5 / static_cast<double>(opts.dim);
  std::uniform_real_distribution<double> init(-half, half);
  for (double& x : in.data) x = init(rng);
  if (opts.epochs <= 0) return in;

  std::vector<double> noise(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) noise[i] = std::pow(counts[i], 0.75);
  std::discrete_distribution<std::size_t> negative(noise.begin(), noise.end());

  const double total = static_cast<double>(n_tokens) * opts.epochs;
  double processed = 0.0;
  std::vector<double> grad(opts.dim);
  const std::size_t d = opts.dim;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    for (const auto& s : sentences) {
      for (std::size_t i = 0; i < s.size(); ++i, processed += 1.0) {
        const double lr = opts.lr * std::max(1e-4, 1.0 - processed / total);
        const std::size_t lo = i >= opts.window ? i - opts.window : 0;
        const std::size_t hi = std::min(s.size() - 1, i + opts.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          double* v = in.row(s[i]);
          std::fill(grad.begin(), grad.end(), 0.0);
          for (int neg = 0; neg <= opts.negatives; ++neg) {
            std::size_t target;
            double label;
            if (neg == 0) {
              target = s[j];
              label = 1.0;
            } else {
              target = negative(rng);
              if (target == static_cast<std::size_t>(s[j])) continue;
              label = 0.0;
            }
            double* u = out.data() + target * d;
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += v[k] * u[k];
            const double g = (label - sigmoid(dot)) * lr;
            for (std::size_t k = 0; k < d; ++k) {
              grad[k] += g * u[k];
              u[k] += g * v[k];
            }
          }
          for (std::size_t k = 0; k < d; ++k) v[k] += grad[k];
        }
      }
    }
  }
  for (double x : in.data) {
    if (!std::isfinite(x)) throw NumericError("skip-gram produced non-finite values");
  }
  return in;
}

EmbeddingTable train_skipgram(const Corpus& c, const Vocabulary& v,
                              const SkipgramOptions& opts) {
  if (c.empty()) throw EmptyCorpusError();
  std::vector<std::vector<TokenId>> sentences;
  for (const auto& d : c.documents()) {
    for (const auto& p : d.paragraphs) {
      for (const auto& s : p.sentences) sentences.push_back(encode(v, s).ids);
    }
  }
  return train_skipgram(sentences, v.size(), opts);
}

double cosine_similarity(const EmbeddingTable& e, std::size_t a, std::size_t b) {
  const double* x = e.row(a);
  const double* y = e.row(b);
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t k = 0; k < e.dim; ++k) {
    dot += x[k] * y[k];
    nx += x[k] * x[k];
    ny += y[k] * y[k];
  }
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return dot / std::sqrt(nx * ny);
}

ClusterMap::ClusterMap(std::size_t n, std::vector<std::size_t> assignment)
    : n_(n), assignment_(std::move(assignment)), members_(n) {
  if (n == 0) throw ValidationError("cluster count must be positive");
  for (std::size_t i = 0; i < assignment_.size(); ++i) {
    if (assignment_[i] >= n) {
      throw ValidationError("cluster id " + std::to_string(assignment_[i]) +
                            " for token " + std::to_string(i) + " outside [0, " +
                            std::to_string(n) + ")");
    }
    members_[assignment_[i]].push_back(i);
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (members_[c].empty()) {
      throw ValidationError("cluster " + std::to_string(c) + " is empty");
    }
  }
}

std::string ClusterMap::to_json() const {
  json j;
  j["n"] = n_;
  j["assignment"] = assignment_;
  return j.dump();
}

ClusterMap ClusterMap::from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("cluster map: ") + e.what());
  }
  if (!j.contains("n") || !j["n"].is_number_unsigned()) {
    throw ValidationError("cluster map: field 'n' missing or not a count");
  }
  if (!j.contains("assignment") || !j["assignment"].is_array()) {
    throw ValidationError("cluster map: field 'assignment' missing or not a list");
  }
  std::vector<std::size_t> a;
  for (const auto& x : j["assignment"]) {
    if (!x.is_number_unsigned()) {
      throw ValidationError("cluster map: field 'assignment' holds a non-count");
    }
    a.push_back(x.get<std::size_t>());
  }
  return ClusterMap(j["n"].get<std::size_t>(), std::move(a));
}

void ClusterMap::save(const std::filesystem::path& path) const {
  io::write_file(path, to_json() + "\n");
}

ClusterMap ClusterMap::load(const std::filesystem::path& path) {
  return from_json(io::read_file(path));
}

ClusterSizeStats cluster_size_stats(const ClusterMap& cm) {
  ClusterSizeStats s;
  if (cm.n() == 0) return s;
  s.min = std::numeric_limits<std::size_t>::max();
  for (const auto& m : cm.members()) {
    s.min = std::min(s.min, m.size());
    s.max = std::max(s.max, m.size());
    s.mean += static_cast<double>(m.size());
  }
  s.mean /= static_cast<double>(cm.n());
  for (const auto& m : cm.members()) {
    const double dlt = static_cast<double>(m.size()) - s.mean;
    s.variance += dlt * dlt;
  }
  s.variance /= static_cast<double>(cm.n());
  return s;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double x = a[k] - b[k];
    s += x * x;
  }
  return s;
}

struct Run {
  std::vector<std::size_t> assignment;
  double inertia = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

Run lloyd(const EmbeddingTable& e, std::size_t n, int max_iterations, Rng rng) {
  const std::size_t m = e.rows;
  const std::size_t d = e.dim;
  std::vector<double> centers(n * d);

  // k-means++ seeding.
  std::vector<double> closest(m, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(m, false);
  std::size_t first = uniform_index(rng, m);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pick = first;
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < m; ++i) total += closest[i];
      if (total > 0.0) {
        double r = uniform01(rng) * total;
        pick = m;
        for (std::size_t i = 0; i < m; ++i) {
          if (closest[i] <= 0.0) continue;
          pick = i;
          r -= closest[i];
          if (r < 0.0) break;
        }
      } else {
        // Every point coincides with a center; take an unused one.
        std::vector<std::size_t> free;
        for (std::size_t i = 0; i < m; ++i) {
          if (!chosen[i]) free.push_back(i);
        }
        pick = free[uniform_index(rng, free.size())];
      }
    }
    chosen[pick] = true;
    std::copy(e.row(pick), e.row(pick) + d, centers.begin() + c * d);
    for (std::size_t i = 0; i < m; ++i) {
      closest[i] = std::min(closest[i], sq_dist(e.row(i), &centers[c * d], d));
    }
  }

  Run run;
  run.assignment.assign(m, n);
  std::vector<double> dist(m);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n; ++c) {
        const double dd = sq_dist(e.row(i), &centers[c * d], d);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      if (best != run.assignment[i]) changed = true;
      run.assignment[i] = best;
      dist[i] = best_d;
    }

    // Empty clusters take the point farthest from its center, drawn from a
    // cluster that keeps at least one member.
    std::vector<std::size_t> sizes(n, 0);
    for (std::size_t a : run.assignment) ++sizes[a];
    for (std::size_t c = 0; c < n; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t far = m;
      for (std::size_t i = 0; i < m; ++i) {
        if (sizes[run.assignment[i]] < 2) continue;
        if (far == m || dist[i] > dist[far]) far = i;
      }
      --sizes[run.assignment[far]];
      run.assignment[far] = c;
      sizes[c] = 1;
      dist[far] = 0.0;
      std::copy(e.row(far), e.row(far) + d, centers.begin() + c * d);
      changed = true;
    }

    std::fill(centers.begin(), centers.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double* ctr = &centers[run.assignment[i] * d];
      for (std::size_t k = 0; k < d; ++k) ctr[k] += e.row(i)[k];
    }
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t k = 0; k < d; ++k) centers[c * d + k] /= sizes[c];
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      inertia += sq_dist(e.row(i), &centers[run.assignment[i] * d], d);
    }
    run.trace.push_back(inertia);
    run.inertia = inertia;
    if (!changed && iter > 0) break;
  }
  return run;
}

}  // namespace

KMeansResult kmeans(const EmbeddingTable& e, const KMeansOptions& opts) {
  if (opts.n == 0) throw ConfigError("cluster count must be positive");
  if (opts.n > e.rows) {
    throw ConfigError("cluster count " + std::to_string(opts.n) +
                      " exceeds vocabulary size " + std::to_string(e.rows));
  }
  if (opts.restarts < 1) throw ConfigError("restarts must be at least 1");
  if (opts.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");

  std::vector<Run> runs(opts.restarts);
  auto work = [&](std::size_t r) {
    runs[r] = lloyd(e, opts.n, opts.max_iterations,
                    make_rng(opts.seed, "kmeans", r));
  };
  const std::size_t jobs =
      std::clamp<std::size_t>(opts.jobs, 1, static_cast<std::size_t>(opts.restarts));
  if (jobs == 1) {
    for (std::size_t r = 0; r < runs.size(); ++r) work(r);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t r = t; r < runs.size(); r += jobs) work(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }
  KMeansResult out;
  out.clusters = ClusterMap(opts.n, runs[best].assignment);
  out.inertia = runs[best].inertia;
  out.restart = static_cast<int>(best);
  out.inertia_trace = std::move(runs[best].trace);
  return out;
}

std::size_t select_cluster_count(
    const std::vector<std::size_t>& candidates,
    const std::function<double(std::size_t)>& proxy) {
  if (candidates.empty()) throw ConfigError("no cluster-count candidates given");
  std::vector<std::size_t> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  std::size_t best = sorted.front();
  double best_acc = proxy(best);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double acc = proxy(sorted[i]);
    if (acc < best_acc) {
      best_acc = acc;
      best = sorted[i];
    }
  }
  return best;
}

}  // namespace objforge
