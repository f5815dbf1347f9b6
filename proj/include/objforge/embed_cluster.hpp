#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "objforge/corpus.hpp"
#include "objforge/tokenizer.hpp"

namespace objforge {

// Row-major |V| x dim matrix of token vectors.
struct EmbeddingTable {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim)
      : rows(rows), dim(dim), data(rows * dim, 0.0) {}

  double* row(std::size_t i) { return data.data() + i * dim; }
  const double* row(std::size_t i) const { return data.data() + i * dim; }

  // JSON {"dim": d, "vectors": [[...], ...]}.
  std::string to_json() const;
  static EmbeddingTable from_json(std::string_view json_text);
  void save(const std::filesystem::path& path) const;
  static EmbeddingTable load(const std::filesystem::path& path);
};

struct SkipgramOptions {
  std::size_t dim = 32;
  std::size_t window = 2;
  int epochs = 5;
  int negatives = 5;
  double lr = 0.025;
  uint64_t seed = 0;
};

// Skip-gram with negative sampling over token id sequences. Input vectors are
// returned; with epochs == 0 that is the seeded initialization.
EmbeddingTable train_skipgram(const std::vector<std::vector<TokenId>>& sentences,
                              std::size_t vocab_size,
                              const SkipgramOptions& opts);
EmbeddingTable train_skipgram(const Corpus& c, const Vocabulary& v,
                              const SkipgramOptions& opts);

double cosine_similarity(const EmbeddingTable& e, std::size_t a, std::size_t b);

class ClusterMap {
 public:
  ClusterMap() = default;
  // Throws ValidationError if an id is out of [0, n) or a cluster is empty.
  ClusterMap(std::size_t n, std::vector<std::size_t> assignment);

  std::size_t n() const { return n_; }
  std::size_t size() const { return assignment_.size(); }
  std::size_t cluster_of(std::size_t token) const { return assignment_.at(token); }
  const std::vector<std::size_t>& assignment() const { return assignment_; }
  const std::vector<std::vector<std::size_t>>& members() const { return members_; }
  const std::vector<std::size_t>& members(std::size_t c) const {
    return members_.at(c);
  }

  // JSON {"n": n, "assignment": [...]}.
  std::string to_json() const;
  static ClusterMap from_json(std::string_view json_text);
  void save(const std::filesystem::path& path) const;
  static ClusterMap load(const std::filesystem::path& path);

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> assignment_;
  std::vector<std::vector<std::size_t>> members_;
};

struct ClusterSizeStats {
  std::size_t min = 0;
  std::size_t max = 0;
  double mean = 0.0;
  double variance = 0.0;
};

ClusterSizeStats cluster_size_stats(const ClusterMap& cm);

struct KMeansOptions {
  std::size_t n = 30;
  int restarts = 5;
  int max_iterations = 300;
  uint64_t seed = 0;
  // Restarts run on this many threads; the result does not depend on it.
  int jobs = 1;
};

struct KMeansResult {
  ClusterMap clusters;
  double inertia = 0.0;
  int restart = 0;
  // Inertia after every Lloyd iteration of the winning restart.
  std::vector<double> inertia_trace;
};

KMeansResult kmeans(const EmbeddingTable& e, const KMeansOptions& opts);

// Candidate with the lowest proxy accuracy; ties go to the smaller n.
std::size_t select_cluster_count(
    const std::vector<std::size_t>& candidates,
    const std::function<double(std::size_t)>& proxy);

}  // namespace objforge
