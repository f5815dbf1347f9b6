#include <cmath>

#include "objforge/error.hpp"
#include "objforge/model.hpp"

namespace objforge {

std::vector<std::size_t> slot_rows(Layout layout, const ModelConfig& cfg) {
  if (layout != Layout::kFixed) return {0};
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i <= cfg.k; ++i) rows.push_back(i * cfg.slot_len);
  return rows;
}

void check_head_layout(Head h, Layout layout) {
  bool ok = true;
  switch (h) {
    case Head::kLM:
    case Head::kBinary:
    case Head::kIE1: break;
    case Head::kAE1:
    case Head::kIEk:
    case Head::kAEk: ok = layout == Layout::kFixed; break;
    case Head::kREk: ok = layout == Layout::kFlexible; break;
  }
  if (!ok) {
    throw ConfigError(std::string("head ") + head_name(h) +
                      " is not available for this input layout");
  }
}

namespace {

const Mat& lm_weight(const ModelConfig& cfg, const Params& p) {
  return cfg.tied_lm ? p["embed.word"] : p["head.lm"];
}

Mat& lm_weight(const ModelConfig& cfg, Params& g) {
  return cfg.tied_lm ? g["embed.word"] : g["head.lm"];
}

const char* joint_tensor(Head h) {
  switch (h) {
    case Head::kIE1: return "head.ie1";
    case Head::kAE1: return "head.ae1";
    case Head::kIEk: return "head.iek";
    case Head::kAEk: return "head.aek";
    case Head::kREk: return "head.rek";
    default: throw ConfigError(std::string(head_name(h)) + " is not a jointwise head");
  }
}

void check_rows(const Mat& h, const std::vector<std::size_t>& rows) {
  for (std::size_t r : rows) {
    if (static_cast<Eigen::Index>(r) >= h.rows()) {
      throw ShapeError("input is shorter than the layout's slot positions");
    }
  }
}

}  // namespace

Mat head_lm(const ModelConfig& cfg, const Params& p, const Mat& h) {
  return h * lm_weight(cfg, p).transpose();
}

void head_lm_backward(const ModelConfig& cfg, const Params& p, const Mat& h,
                      const Mat& d_logits, Params& grads, Mat& d_h) {
  lm_weight(cfg, grads) += d_logits.transpose() * h;
  d_h += d_logits * lm_weight(cfg, p);
}

Mat head_binary(const Params& p, const Mat& h) {
  return h * p["head.binary"].transpose();
}

void head_binary_backward(const Params& p, const Mat& h, const Mat& d_logits,
                          Params& grads, Mat& d_h) {
  grads["head.binary"] += d_logits.transpose() * h;
  d_h += d_logits * p["head.binary"];
}

Mat head_jointwise(Head head, Layout layout, const ModelConfig& cfg, const Params& p,
                   const Mat& h) {
  check_head_layout(head, layout);
  const auto rows = slot_rows(layout, cfg);
  check_rows(h, rows);
  const Mat& w = p[joint_tensor(head)];
  const auto k = static_cast<Eigen::Index>(cfg.k);
  const Eigen::Index d = h.cols();
  switch (head) {
    case Head::kIE1: return h.row(rows[0]) * w.transpose();
    case Head::kAE1: {
      RowVec mean = RowVec::Zero(d);
      for (Eigen::Index i = 1; i <= k; ++i) mean += h.row(rows[i]);
      mean /= static_cast<double>(k);
      return mean * w.transpose();
    }
    case Head::kIEk: {
      Mat o(k, d);
      for (Eigen::Index i = 0; i < k; ++i) o.row(i) = h.row(rows[i + 1]);
      return o * w.transpose();
    }
    case Head::kAEk: {
      Mat o(k, 2 * d);
      for (Eigen::Index i = 0; i < k; ++i) {
        o.row(i).head(d) = h.row(rows[0]);
        o.row(i).tail(d) = h.row(rows[i + 1]);
      }
      return o * w.transpose();
    }
    case Head::kREk: {
      Mat out(k, 2);
      for (Eigen::Index i = 0; i < k; ++i) {
        out.row(i) = h.row(rows[0]) * w.middleRows(2 * i, 2).transpose();
      }
      return out;
    }
    default: break;
  }
  throw ConfigError("unsupported head");
}

void head_jointwise_backward(Head head, Layout layout, const ModelConfig& cfg,
                             const Params& p, const Mat& h, const Mat& d_logits,
                             Params& grads, Mat& d_h) {
  check_head_layout(head, layout);
  const auto rows = slot_rows(layout, cfg);
  const Mat& w = p[joint_tensor(head)];
  Mat& gw = grads[joint_tensor(head)];
  const auto k = static_cast<Eigen::Index>(cfg.k);
  const Eigen::Index d = h.cols();
  switch (head) {
    case Head::kIE1:
      gw += d_logits.transpose() * h.row(rows[0]);
      d_h.row(rows[0]) += d_logits * w;
      return;
    case Head::kAE1: {
      RowVec mean = RowVec::Zero(d);
      for (Eigen::Index i = 1; i <= k; ++i) mean += h.row(rows[i]);
      mean /= static_cast<double>(k);
      gw += d_logits.transpose() * mean;
      const RowVec d_mean = d_logits * w / static_cast<double>(k);
      for (Eigen::Index i = 1; i <= k; ++i) d_h.row(rows[i]) += d_mean;
      return;
    }
    case Head::kIEk: {
      for (Eigen::Index i = 0; i < k; ++i) {
        gw += d_logits.row(i).transpose() * h.row(rows[i + 1]);
        d_h.row(rows[i + 1]) += d_logits.row(i) * w;
      }
      return;
    }
    case Head::kAEk: {
      for (Eigen::Index i = 0; i < k; ++i) {
        RowVec o(2 * d);
        o.head(d) = h.row(rows[0]);
        o.tail(d) = h.row(rows[i + 1]);
        gw += d_logits.row(i).transpose() * o;
        const RowVec d_o = d_logits.row(i) * w;
        d_h.row(rows[0]) += d_o.head(d);
        d_h.row(rows[i + 1]) += d_o.tail(d);
      }
      return;
    }
    case Head::kREk: {
      for (Eigen::Index i = 0; i < k; ++i) {
        gw.middleRows(2 * i, 2) += d_logits.row(i).transpose() * h.row(rows[0]);
        d_h.row(rows[0]) += d_logits.row(i) * w.middleRows(2 * i, 2);
      }
      return;
    }
    default: break;
  }
  throw ConfigError("unsupported head");
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - top).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

LossSum cross_entropy_sum(const Mat& logits, const std::vector<int>& labels, Mat* d_logits,
                          double scale) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw ShapeError("label count does not match logit rows");
  }
  if (d_logits) *d_logits = Mat::Zero(logits.rows(), logits.cols());
  LossSum out;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[i];
    if (y < 0) {
      if (y != -1) throw RangeError("label " + std::to_string(y) + " is not a class");
      continue;
    }
    if (y >= logits.cols()) throw RangeError("label " + std::to_string(y) + " is not a class");
    const double top = logits.row(i).maxCoeff();
    const RowVec e = (logits.row(i).array() - top).exp();
    const double z = e.sum();
    out.sum += std::log(z) + top - logits(i, y);
    ++out.count;
    if (d_logits) {
      d_logits->row(i) = e / z * scale;
      (*d_logits)(i, y) -= scale;
    }
  }
  if (!std::isfinite(out.sum)) throw NumericError("non-finite cross-entropy");
  return out;
}

double cross_entropy(const Mat& logits, const std::vector<int>& labels, Mat* d_logits) {
  std::size_t n = 0;
  for (int y : labels) n += y >= 0 ? 1 : 0;
  const double scale = n ? 1.0 / static_cast<double>(n) : 0.0;
  const LossSum s = cross_entropy_sum(logits, labels, d_logits, scale);
  return s.count ? s.sum / static_cast<double>(s.count) : 0.0;
}

double soft_cross_entropy(const RowVec& logits, const RowVec& target, RowVec* d_logits,
                          double scale) {
  if (logits.size() != target.size()) throw ShapeError("target size differs from logits");
  const double top = logits.maxCoeff();
  const RowVec e = (logits.array() - top).exp();
  const double z = e.sum();
  const double lse = std::log(z) + top;
  const double mass = target.sum();
  const double loss = mass * lse - target.dot(logits);
  if (!std::isfinite(loss)) throw NumericError("non-finite cross-entropy");
  if (d_logits) *d_logits = (e / z * mass - target) * scale;
  return loss;
}

}  // namespace objforge
