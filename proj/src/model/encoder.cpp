#include <cmath>
#include <limits>

#include "objforge/error.hpp"
#include "objforge/model.hpp"

namespace objforge {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

std::string layer_prefix(std::size_t l) { return "layer" + std::to_string(l) + "."; }

double activate(double x, Activation act) {
  if (act == Activation::kRelu) return x > 0.0 ? x : 0.0;
  return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double activate_grad(double x, Activation act) {
  if (act == Activation::kRelu) return x > 0.0 ? 1.0 : 0.0;
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Mat layer_norm_cached(const Mat& x, const RowVec& gamma, const RowVec& beta, Mat& xhat,
                      Eigen::VectorXd& inv) {
  const auto n = x.rows();
  const double d = static_cast<double>(x.cols());
  xhat.resize(n, x.cols());
  inv.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / d;
    const RowVec centered = x.row(i).array() - mean;
    const double var = centered.squaredNorm() / d;
    inv(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = centered * inv(i);
  }
  Mat y = xhat.array().rowwise() * gamma.array();
  y.rowwise() += beta;
  return y;
}

Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Eigen::VectorXd& inv,
                        const RowVec& gamma, Mat& d_gamma, Mat& d_beta) {
  d_gamma += (dy.array() * xhat.array()).colwise().sum().matrix();
  d_beta += dy.colwise().sum();
  const double d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const RowVec dxhat = dy.row(i).array() * gamma.array();
    const double s1 = dxhat.sum();
    const double s2 = dxhat.dot(xhat.row(i));
    dx.row(i) = (inv(i) / d) * (d * dxhat.array() - s1 - xhat.row(i).array() * s2);
  }
  return dx;
}

void check_valid(const std::vector<uint8_t>& valid, Eigen::Index n) {
  if (static_cast<Eigen::Index>(valid.size()) != n) {
    throw ShapeError("mask length does not match sequence length");
  }
}

}  // namespace

RowVec one_hot(std::size_t i, std::size_t size) {
  if (i >= size) {
    throw RangeError("one-hot index " + std::to_string(i) + " outside size " +
                     std::to_string(size));
  }
  RowVec v = RowVec::Zero(static_cast<Eigen::Index>(size));
  v(static_cast<Eigen::Index>(i)) = 1.0;
  return v;
}

double sinusoid_position(std::size_t i, std::size_t j, std::size_t d) {
  if (j >= d) throw RangeError("embedding column outside dimension");
  const double pair = static_cast<double>(j - j % 2);
  const double angle = static_cast<double>(i) / std::pow(10000.0, pair / static_cast<double>(d));
  return j % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

EncoderInput plain_input(const std::vector<TokenId>& ids) {
  EncoderInput in;
  in.ids = ids;
  in.positions.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) in.positions[i] = static_cast<int>(i);
  in.seq_ids.assign(ids.size(), 0);
  in.valid.assign(ids.size(), 1);
  return in;
}

Mat embed_sequence(const EncoderInput& in, const Params& p) {
  const Mat& word = p["embed.word"];
  const Mat& pos = p["embed.pos"];
  const Mat& seq = p["embed.seq"];
  const std::size_t n = in.size();
  if (in.positions.size() != n || in.seq_ids.size() != n || in.valid.size() != n) {
    throw ShapeError("encoder input fields differ in length");
  }
  Mat h(static_cast<Eigen::Index>(n), word.cols());
  for (std::size_t i = 0; i < n; ++i) {
    if (in.ids[i] < 0 || in.ids[i] >= word.rows()) {
      throw RangeError("token id " + std::to_string(in.ids[i]) + " outside vocabulary");
    }
    if (in.positions[i] < 0 || in.positions[i] >= pos.rows()) {
      throw RangeError("position " + std::to_string(in.positions[i]) + " beyond max_len");
    }
    if (in.seq_ids[i] < 0 || in.seq_ids[i] >= seq.rows()) {
      throw RangeError("sequence id " + std::to_string(in.seq_ids[i]) + " out of range");
    }
    h.row(i) = word.row(in.ids[i]) + pos.row(in.positions[i]) + seq.row(in.seq_ids[i]);
  }
  return h;
}

Mat scaled_dot_attention(const Mat& q, const Mat& k, const Mat& v,
                         const std::vector<uint8_t>& valid, Mat* weights) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw ShapeError("attention operands have incompatible shapes");
  }
  check_valid(valid, k.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Mat a = (q * k.transpose()) * scale;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (valid[j]) top = std::max(top, a(i, j));
    }
    if (!std::isfinite(top)) throw ShapeError("attention row has no valid key");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      a(i, j) = valid[j] ? std::exp(a(i, j) - top) : 0.0;
      sum += a(i, j);
    }
    a.row(i) /= sum;
  }
  Mat out = a * v;
  if (weights) *weights = std::move(a);
  return out;
}

namespace {

Mat attention_block(const Mat& x, const Mat& wq, const Mat& wk, const Mat& wv,
                    const Mat& wo, std::size_t n_heads, const std::vector<uint8_t>& valid,
                    LayerCache* c) {
  const Eigen::Index d = x.cols();
  if (d % static_cast<Eigen::Index>(n_heads) != 0) {
    throw ConfigError("hidden size not divisible by head count");
  }
  const Eigen::Index dh = d / static_cast<Eigen::Index>(n_heads);
  Mat q = x * wq, k = x * wk, v = x * wv;
  Mat o(x.rows(), d);
  std::vector<Mat> attn(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
    o.middleCols(c0, dh) = scaled_dot_attention(q.middleCols(c0, dh), k.middleCols(c0, dh),
                                                v.middleCols(c0, dh), valid, &attn[h]);
  }
  Mat z = o * wo;
  if (c) {
    c->q = std::move(q);
    c->k = std::move(k);
    c->v = std::move(v);
    c->attn = std::move(attn);
    c->o = std::move(o);
  }
  return z;
}

}  // namespace

Mat multi_head_attention(const Mat& h, const Mat& wq, const Mat& wk, const Mat& wv,
                         const Mat& wo, std::size_t n_heads,
                         const std::vector<uint8_t>& valid) {
  return attention_block(h, wq, wk, wv, wo, n_heads, valid, nullptr);
}

Mat feed_forward(const Mat& h, const Mat& w1, const RowVec& b1, const Mat& w2,
                 const RowVec& b2, Activation act) {
  if (h.cols() != w1.rows() || w1.cols() != w2.rows() || b1.size() != w1.cols() ||
      b2.size() != w2.cols()) {
    throw ShapeError("feed-forward operands have incompatible shapes");
  }
  Mat u = h * w1;
  u.rowwise() += b1;
  u = u.unaryExpr([act](double x) { return activate(x, act); });
  Mat out = u * w2;
  out.rowwise() += b2;
  return out;
}

Mat layer_norm(const Mat& x, const RowVec& gamma, const RowVec& beta) {
  Mat xhat;
  Eigen::VectorXd inv;
  return layer_norm_cached(x, gamma, beta, xhat, inv);
}

Mat encoder_forward(const ModelConfig& cfg, const Params& p, const EncoderInput& in,
                    EncoderCache* cache) {
  if (in.size() == 0) throw ShapeError("empty encoder input");
  check_valid(in.valid, static_cast<Eigen::Index>(in.size()));
  Mat x = embed_sequence(in, p);
  if (cache) {
    cache->input = in;
    cache->layers.assign(cfg.n_layers, LayerCache{});
  }
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = layer_prefix(l);
    LayerCache local;
    LayerCache& c = cache ? cache->layers[l] : local;
    c.x = x;
    const Mat z = attention_block(x, p[pre + "attn.wq"], p[pre + "attn.wk"],
                                  p[pre + "attn.wv"], p[pre + "attn.wo"], cfg.n_heads,
                                  in.valid, &c);
    c.x1 = layer_norm_cached(x + z, p[pre + "ln1.gamma"], p[pre + "ln1.beta"], c.x1hat,
                             c.inv1);
    c.u = c.x1 * p[pre + "ffn.w1"];
    c.u.rowwise() += RowVec(p[pre + "ffn.b1"]);
    c.g = c.u.unaryExpr([&](double v) { return activate(v, cfg.activation); });
    Mat ffn = c.g * p[pre + "ffn.w2"];
    ffn.rowwise() += RowVec(p[pre + "ffn.b2"]);
    x = layer_norm_cached(c.x1 + ffn, p[pre + "ln2.gamma"], p[pre + "ln2.beta"], c.x2hat,
                          c.inv2);
  }
  return x;
}

void encoder_backward(const ModelConfig& cfg, const Params& p, const EncoderCache& cache,
                      const Mat& d_h, Params& grads) {
  Mat dx = d_h;
  const Eigen::Index dh = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t li = cfg.n_layers; li-- > 0;) {
    const std::string pre = layer_prefix(li);
    const LayerCache& c = cache.layers[li];

    const Mat d_r2 = layer_norm_backward(dx, c.x2hat, c.inv2, p[pre + "ln2.gamma"],
                                         grads[pre + "ln2.gamma"], grads[pre + "ln2.beta"]);
    grads[pre + "ffn.b2"] += d_r2.colwise().sum();
    grads[pre + "ffn.w2"] += c.g.transpose() * d_r2;
    Mat d_u = d_r2 * p[pre + "ffn.w2"].transpose();
    for (Eigen::Index i = 0; i < d_u.size(); ++i) {
      d_u.data()[i] *= activate_grad(c.u.data()[i], cfg.activation);
    }
    grads[pre + "ffn.b1"] += d_u.colwise().sum();
    grads[pre + "ffn.w1"] += c.x1.transpose() * d_u;
    const Mat d_x1 = d_r2 + d_u * p[pre + "ffn.w1"].transpose();

    const Mat d_r1 = layer_norm_backward(d_x1, c.x1hat, c.inv1, p[pre + "ln1.gamma"],
                                         grads[pre + "ln1.gamma"], grads[pre + "ln1.beta"]);
    grads[pre + "attn.wo"] += c.o.transpose() * d_r1;
    const Mat d_o = d_r1 * p[pre + "attn.wo"].transpose();
    Mat d_q(d_o.rows(), d_o.cols()), d_k(d_o.rows(), d_o.cols()), d_v(d_o.rows(), d_o.cols());
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
      const Mat& a = c.attn[h];
      const Mat d_oh = d_o.middleCols(c0, dh);
      d_v.middleCols(c0, dh) = a.transpose() * d_oh;
      const Mat d_a = d_oh * c.v.middleCols(c0, dh).transpose();
      const Eigen::VectorXd row_dot = (d_a.array() * a.array()).rowwise().sum();
      Mat d_s = a.array() * (d_a.colwise() - row_dot).array();
      d_s *= scale;
      d_q.middleCols(c0, dh) = d_s * c.k.middleCols(c0, dh);
      d_k.middleCols(c0, dh) = d_s.transpose() * c.q.middleCols(c0, dh);
    }
    grads[pre + "attn.wq"] += c.x.transpose() * d_q;
    grads[pre + "attn.wk"] += c.x.transpose() * d_k;
    grads[pre + "attn.wv"] += c.x.transpose() * d_v;
    dx = d_r1 + d_q * p[pre + "attn.wq"].transpose() + d_k * p[pre + "attn.wk"].transpose() +
         d_v * p[pre + "attn.wv"].transpose();
  }

  const EncoderInput& in = cache.input;
  Mat& gw = grads["embed.word"];
  Mat& gp = grads["embed.pos"];
  Mat& gs = grads["embed.seq"];
  for (std::size_t i = 0; i < in.size(); ++i) {
    gw.row(in.ids[i]) += dx.row(i);
    gp.row(in.positions[i]) += dx.row(i);
    gs.row(in.seq_ids[i]) += dx.row(i);
  }
}

}  // namespace objforge
