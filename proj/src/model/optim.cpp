#include <cmath>

#include "objforge/error.hpp"
#include "objforge/optim.hpp"

namespace objforge {

void TrainConfig::validate() const {
  if (total_steps < 1) throw ConfigError("total_steps must be at least 1");
  if (warmup_steps < 1 || warmup_steps > total_steps) {
    throw ConfigError("warmup_steps must be in [1, total_steps]");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("betas must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (lr_peak < 0.0) throw ConfigError("lr_peak must not be negative");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must not be negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
}

double triangular_lr(int step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.total_steps) {
    throw RangeError("step " + std::to_string(step) + " outside [0, total_steps]");
  }
  if (step <= cfg.warmup_steps) {
    return cfg.lr_peak * static_cast<double>(step) / cfg.warmup_steps;
  }
  return cfg.lr_peak * static_cast<double>(cfg.total_steps - step) /
         (cfg.total_steps - cfg.warmup_steps);
}

OptimizerState make_optimizer_state(const Params& p) {
  return {p.zeros_like(), p.zeros_like(), 0};
}

bool decays(const std::string& name) {
  return name.find(".ln") == std::string::npos && name.find(".b1") == std::string::npos &&
         name.find(".b2") == std::string::npos;
}

void sgd_step(Params& p, const Params& grads, double lr) { p.axpy(-lr, grads); }

void adamw_step(Params& p, const Params& grads, OptimizerState& state,
                const TrainConfig& cfg, double lr) {
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (const auto& name : p.names()) {
    Mat& w = p[name];
    const Mat& g = grads[name];
    if (g.rows() != w.rows() || g.cols() != w.cols()) {
      throw ShapeError("gradient shape mismatch for " + name);
    }
    Mat& m = state.m[name];
    Mat& v = state.v[name];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double wd = decays(name) ? cfg.weight_decay : 0.0;
    w.array() -= lr * ((m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps) + wd * w.array());
  }
}

void optimizer_step(Params& p, const Params& grads, OptimizerState& state,
                    const TrainConfig& cfg, double lr) {
  if (cfg.optimizer == OptimizerKind::kSGD) {
    sgd_step(p, grads, lr);
  } else {
    adamw_step(p, grads, state, cfg, lr);
  }
}

}  // namespace objforge
