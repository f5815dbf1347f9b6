#pragma once

#include <cstdint>

#include "objforge/model.hpp"

namespace objforge {

enum class OptimizerKind { kAdamW, kSGD };

struct TrainConfig {
  double lr_peak = 2e-3;
  int warmup_steps = 50;
  int total_steps = 500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int batch_size = 16;
  uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdamW;

  void validate() const;
};

// Linear warm-up from 0 to the peak, then linear decay to 0 at total_steps.
double triangular_lr(int step, const TrainConfig& cfg);

struct OptimizerState {
  Params m;
  Params v;
  int64_t t = 0;
};

OptimizerState make_optimizer_state(const Params& p);

// Layer-norm parameters and biases are exempt from weight decay.
bool decays(const std::string& tensor_name);

// W <- W - lr * g
void sgd_step(Params& p, const Params& grads, double lr);

// Adaptive moments with decoupled weight decay; increments state.t.
void adamw_step(Params& p, const Params& grads, OptimizerState& state,
                const TrainConfig& cfg, double lr);

void optimizer_step(Params& p, const Params& grads, OptimizerState& state,
                    const TrainConfig& cfg, double lr);

}  // namespace objforge
