#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "objforge/model.hpp"
#include "objforge/train.hpp"

namespace objforge::testing {

// Small model used for finite-difference checks.
inline ModelConfig tiny_config(bool tied, Activation act) {
  ModelConfig c;
  c.d = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.f = 16;
  c.vocab_size = 12;
  c.k = 2;
  c.slot_len = 4;
  c.max_len = 12;
  c.n_seq_ids = 3;
  c.tied_lm = tied;
  c.activation = act;
  c.init_std = 0.5;
  return c;
}

using LossFn = std::function<double(const Params&, Params*)>;

// Sum of every head's loss on one fixed-layout input.
inline LossFn fixed_layout_loss(const ModelConfig& cfg) {
  const SpecialTokens sp;
  const EncoderInput in = fixed_input({{5, 6}, {7}, {8, 9}}, cfg, sp);
  return [cfg, in](const Params& p, Params* g) {
    EncoderCache cache;
    const Mat h = encoder_forward(cfg, p, in, g ? &cache : nullptr);
    Mat d_h = Mat::Zero(h.rows(), h.cols());
    double loss = 0.0;
    Mat dl;

    std::vector<int> lm_labels(h.rows(), -1);
    lm_labels[1] = 5;
    lm_labels[5] = 7;
    lm_labels[9] = 9;
    Mat lg = head_lm(cfg, p, h);
    loss += cross_entropy(lg, lm_labels, g ? &dl : nullptr);
    if (g) head_lm_backward(cfg, p, h, dl, *g, d_h);

    std::vector<int> bin(h.rows(), 0);
    for (std::size_t i = 0; i < bin.size(); i += 3) bin[i] = 1;
    bin[3] = -1;
    lg = head_binary(p, h);
    loss += cross_entropy(lg, bin, g ? &dl : nullptr);
    if (g) head_binary_backward(p, h, dl, *g, d_h);

    const std::map<Head, std::vector<int>> joint{{Head::kIE1, {1}},
                                                  {Head::kAE1, {0}},
                                                  {Head::kIEk, {1, 0}},
                                                  {Head::kAEk, {0, 1}}};
    for (const auto& [head, labels] : joint) {
      lg = head_jointwise(head, Layout::kFixed, cfg, p, h);
      loss += cross_entropy(lg, labels, g ? &dl : nullptr);
      if (g) head_jointwise_backward(head, Layout::kFixed, cfg, p, h, dl, *g, d_h);
    }
    if (g) encoder_backward(cfg, p, cache, d_h, *g);
    return loss;
  };
}

// REk and the tied LM head on a flexible-layout input.
inline LossFn flexible_layout_loss(const ModelConfig& cfg) {
  const SpecialTokens sp;
  const EncoderInput in = flexible_input({{5, 6}, {7, 10}, {8}}, cfg, sp);
  return [cfg, in](const Params& p, Params* g) {
    EncoderCache cache;
    const Mat h = encoder_forward(cfg, p, in, g ? &cache : nullptr);
    Mat d_h = Mat::Zero(h.rows(), h.cols());
    Mat dl;
    double loss = 0.0;
    Mat lg = head_jointwise(Head::kREk, Layout::kFlexible, cfg, p, h);
    loss += cross_entropy(lg, {1, 0}, g ? &dl : nullptr);
    if (g) head_jointwise_backward(Head::kREk, Layout::kFlexible, cfg, p, h, dl, *g, d_h);
    std::vector<int> lm(h.rows(), -1);
    lm[2] = 6;
    lm[4] = 7;
    lg = head_lm(cfg, p, h);
    loss += cross_entropy(lg, lm, g ? &dl : nullptr);
    if (g) head_lm_backward(cfg, p, h, dl, *g, d_h);
    // soft target on row 0, as the summary proxy uses
    RowVec target = RowVec::Zero(static_cast<Eigen::Index>(cfg.vocab_size));
    target(5) = 0.25;
    target(8) = 0.75;
    RowVec d_row;
    loss += soft_cross_entropy(lg.row(0), target, g ? &d_row : nullptr);
    if (g) {
      Mat d_top = Mat::Zero(1, h.cols());
      head_lm_backward(cfg, p, h.topRows(1), d_row, *g, d_top);
      d_h.row(0) += d_top.row(0);
      encoder_backward(cfg, p, cache, d_h, *g);
    }
    return loss;
  };
}

// Relative error ||a - n|| / (||a|| + ||n||) per tensor between analytic
// and central-difference gradients.
inline std::map<std::string, double> gradient_errors(Params p, const LossFn& loss,
                                                     double h = 1e-4) {
  Params analytic = p.zeros_like();
  loss(p, &analytic);
  std::map<std::string, double> out;
  for (const auto& name : p.names()) {
    Mat& w = p[name];
    Mat numeric = Mat::Zero(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double keep = w.data()[i];
      w.data()[i] = keep + h;
      const double up = loss(p, nullptr);
      w.data()[i] = keep - h;
      const double down = loss(p, nullptr);
      w.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    const Mat& a = analytic[name];
    const double denom = a.norm() + numeric.norm();
    out[name] = denom == 0.0 ? 0.0 : (a - numeric).norm() / denom;
  }
  return out;
}

}  // namespace objforge::testing
