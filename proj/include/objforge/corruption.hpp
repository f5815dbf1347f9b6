#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "objforge/embed_cluster.hpp"
#include "objforge/random.hpp"
#include "objforge/tokenizer.hpp"

namespace objforge {

enum class TokenObjective { kMLM, kRTS, kSLM, kCRTS };

const char* objective_name(TokenObjective o);
std::optional<TokenObjective> parse_token_objective(std::string_view name);

// Label value for positions the objective does not predict (MLM/SLM).
inline constexpr int32_t kIgnoreLabel = -1;

struct ClusterPair {
  std::size_t source = 0;
  std::size_t target = 0;
  friend bool operator==(const ClusterPair&, const ClusterPair&) = default;
};

struct CorruptionOutput {
  std::vector<TokenId> ids;
  // MLM/SLM: original id at selected positions, kIgnoreLabel elsewhere.
  // RTS/C-RTS: 1 where replaced, 0 elsewhere.
  std::vector<int32_t> labels;
  std::vector<uint8_t> mask;
  // C-RTS only: one (source, target) cluster pair per selected position, in
  // position order.
  std::optional<std::vector<ClusterPair>> prov;

  std::size_t selected() const;
  // One JSONL line: {"ids", "labels", "mask", "prov"?}.
  std::string to_json() const;
};

struct CrtsConfig {
  double gamma = 1.0;
  double rate = 0.15;

  void validate() const;
};

class FMatrix {
 public:
  FMatrix() = default;
  explicit FMatrix(std::size_t n) : n_(n), counts_(n * n, 0) {}

  std::size_t n() const { return n_; }
  int64_t at(std::size_t a, std::size_t b) const { return counts_.at(a * n_ + b); }
  int64_t& at(std::size_t a, std::size_t b) { return counts_.at(a * n_ + b); }
  std::span<const int64_t> row(std::size_t a) const {
    return {counts_.data() + a * n_, n_};
  }
  const std::vector<int64_t>& counts() const { return counts_; }

  // Elementwise sum; used to merge per-worker deltas.
  FMatrix& operator+=(const FMatrix& other);
  friend bool operator==(const FMatrix&, const FMatrix&) = default;

  // n as little-endian int64, then n*n little-endian int64 counts.
  std::string to_bytes() const;
  static FMatrix from_bytes(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static FMatrix load(const std::filesystem::path& path);

 private:
  std::size_t n_ = 0;
  std::vector<int64_t> counts_;
};

CorruptionOutput mlm_corrupt(const std::vector<TokenId>& ids, double rate,
                             Rng& rng, const Vocabulary& v);
CorruptionOutput rts_corrupt(const std::vector<TokenId>& ids, double rate,
                             Rng& rng, const Vocabulary& v);
CorruptionOutput slm_corrupt(const std::vector<TokenId>& ids, double rate,
                             Rng& rng, const Vocabulary& v);

// Min-max normalization of the row followed by a temperature softmax. A
// constant row yields the uniform distribution.
std::vector<double> target_cluster_distribution(std::span<const int64_t> f_row,
                                                double gamma);

CorruptionOutput crts_corrupt(const std::vector<TokenId>& ids,
                              const CrtsConfig& cfg, const ClusterMap& cm,
                              const FMatrix& f, Rng& rng, const Vocabulary& v);

// predictions[i] is the detector output for replacement i (0 = called
// original, anything else = called replaced). A fooled detector adds 1 to
// F[a][b], a caught replacement subtracts 1.
void crts_update(FMatrix& f, const std::vector<int>& predictions,
                 const std::vector<ClusterPair>& prov);

// Same, with one prediction per sequence position; only selected positions
// are read.
void crts_update_positions(FMatrix& f, const CorruptionOutput& out,
                           const std::vector<int>& position_predictions);

}  // namespace objforge
