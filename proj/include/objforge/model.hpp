#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "objforge/tokenizer.hpp"

namespace objforge {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class Layout { kPairwise, kFixed, kFlexible };
enum class Activation { kRelu, kGelu };
enum class Head { kLM, kBinary, kIE1, kAE1, kIEk, kAEk, kREk };

const char* head_name(Head h);

struct ModelConfig {
  std::size_t d = 32;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t f = 64;
  std::size_t max_len = 128;
  std::size_t vocab_size = 64;
  std::size_t n_seq_ids = 6;
  // Candidates per jointwise example and per-slot length of the fixed layout.
  std::size_t k = 5;
  std::size_t slot_len = 16;
  bool tied_lm = true;
  Activation activation = Activation::kRelu;
  double init_std = 0.02;
  // Start the learned positional table from sinusoids instead of noise.
  bool sinusoidal_init = false;

  std::size_t head_dim() const { return d / n_heads; }
  void validate() const;
};

// Named dense tensors in a fixed order. Gradients and optimizer moments use
// the same structure.
class Params {
 public:
  void add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Mat& operator[](const std::string& name);
  const Mat& operator[](const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }
  const std::vector<std::string>& names() const { return order_; }

  Params zeros_like() const;
  void set_zero();
  std::size_t count() const;
  // this += a * other
  void axpy(double a, const Params& other);
  bool all_finite() const;

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Mat> tensors_;
};

Params init_params(const ModelConfig& cfg, uint64_t seed);

enum class CheckpointDtype : uint8_t { kF64 = 0, kF32 = 1 };

// Binary checkpoint: magic, config JSON, then named 2-D tensors in
// little-endian f64 or f32.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const Params& p, CheckpointDtype dtype = CheckpointDtype::kF64);
std::pair<ModelConfig, Params> load_checkpoint(const std::filesystem::path& path);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(std::string_view json_text);

// ---- building blocks ----

RowVec one_hot(std::size_t i, std::size_t size);
double sinusoid_position(std::size_t i, std::size_t j, std::size_t d);

struct EncoderInput {
  std::vector<TokenId> ids;
  std::vector<int> positions;
  std::vector<int> seq_ids;
  // 1 for positions that may be attended to.
  std::vector<uint8_t> valid;

  std::size_t size() const { return ids.size(); }
};

// Positions 0..n-1, sequence id 0, all valid.
EncoderInput plain_input(const std::vector<TokenId>& ids);

Mat embed_sequence(const EncoderInput& in, const Params& p);

// softmax(Q K^T / sqrt(d_k)) V with invalid keys given exactly zero weight.
Mat scaled_dot_attention(const Mat& q, const Mat& k, const Mat& v,
                         const std::vector<uint8_t>& valid, Mat* weights = nullptr);

Mat multi_head_attention(const Mat& h, const Mat& wq, const Mat& wk, const Mat& wv,
                         const Mat& wo, std::size_t n_heads,
                         const std::vector<uint8_t>& valid);

Mat feed_forward(const Mat& h, const Mat& w1, const RowVec& b1, const Mat& w2,
                 const RowVec& b2, Activation act);

Mat layer_norm(const Mat& x, const RowVec& gamma, const RowVec& beta);

struct LayerCache {
  Mat x, q, k, v;
  std::vector<Mat> attn;
  Mat o, x1hat, x1, u, g, x2hat;
  Eigen::VectorXd inv1, inv2;
};

struct EncoderCache {
  EncoderInput input;
  std::vector<LayerCache> layers;
};

Mat encoder_forward(const ModelConfig& cfg, const Params& p, const EncoderInput& in,
                    EncoderCache* cache = nullptr);
// Accumulates parameter gradients for dL/dH into `grads`.
void encoder_backward(const ModelConfig& cfg, const Params& p, const EncoderCache& cache,
                      const Mat& d_h, Params& grads);

// ---- heads ----

// Rows of H that hold o_0..o_k for the layout.
std::vector<std::size_t> slot_rows(Layout layout, const ModelConfig& cfg);

// Throws ConfigError for head/layout pairs that do not fit together.
void check_head_layout(Head h, Layout layout);

Mat head_lm(const ModelConfig& cfg, const Params& p, const Mat& h);
void head_lm_backward(const ModelConfig& cfg, const Params& p, const Mat& h,
                      const Mat& d_logits, Params& grads, Mat& d_h);

Mat head_binary(const Params& p, const Mat& h);
void head_binary_backward(const Params& p, const Mat& h, const Mat& d_logits,
                          Params& grads, Mat& d_h);

// IE1/AE1 give one row of two logits, IEk/AEk/REk give k rows.
Mat head_jointwise(Head head, Layout layout, const ModelConfig& cfg, const Params& p,
                   const Mat& h);
void head_jointwise_backward(Head head, Layout layout, const ModelConfig& cfg,
                             const Params& p, const Mat& h, const Mat& d_logits,
                             Params& grads, Mat& d_h);

// ---- losses ----

// Sum of -log softmax(row)[label] over rows whose label is not negative.
// Labels outside [-1, cols) throw RangeError. `d_logits` receives the
// gradient of the sum times `scale`.
struct LossSum {
  double sum = 0.0;
  std::size_t count = 0;
};
LossSum cross_entropy_sum(const Mat& logits, const std::vector<int>& labels,
                          Mat* d_logits = nullptr, double scale = 1.0);

// Mean over labeled rows.
double cross_entropy(const Mat& logits, const std::vector<int>& labels,
                     Mat* d_logits = nullptr);

// -sum_j target_j log softmax(logits)_j for one row.
double soft_cross_entropy(const RowVec& logits, const RowVec& target,
                          RowVec* d_logits = nullptr, double scale = 1.0);

Mat softmax_rows(const Mat& logits);

}  // namespace objforge
