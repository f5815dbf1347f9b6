#include <doctest.h>

#include <filesystem>

#include "gradcheck.hpp"
#include "objforge/error.hpp"
#include "objforge/model.hpp"
#include "objforge/train.hpp"

using namespace objforge;
using objforge::testing::tiny_config;

TEST_CASE("attention rows are distributions and ignore invalid keys") {
  Rng rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat q(6, 4), k(6, 4), v(6, 4);
  for (Mat* m : {&q, &k, &v}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = 3 * n(rng);
  }
  const std::vector<uint8_t> valid{1, 1, 0, 1, 0, 1};
  Mat w;
  scaled_dot_attention(q, k, v, valid, &w);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    CHECK(w.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(w(i, 2) == 0.0);
    CHECK(w(i, 4) == 0.0);
    CHECK(w.row(i).minCoeff() >= 0.0);
  }
}

TEST_CASE("layer norm output statistics") {
  Mat x(3, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<double>(i * i % 7);
  const Mat y = layer_norm(x, RowVec::Ones(8), RowVec::Zero(8));
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(y.row(i).mean() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((y.row(i).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("encoder is permutation equivariant without position information") {
  ModelConfig cfg = tiny_config(true, Activation::kRelu);
  Params p = init_params(cfg, 4);
  p["embed.pos"].setZero();
  p["embed.seq"].setZero();
  const std::vector<TokenId> ids{5, 6, 7, 8, 9, 10};
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  std::vector<TokenId> shuffled(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) shuffled[i] = ids[perm[i]];
  const Mat a = encoder_forward(cfg, p, plain_input(ids));
  const Mat b = encoder_forward(cfg, p, plain_input(shuffled));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK((b.row(static_cast<Eigen::Index>(i)) - a.row(static_cast<Eigen::Index>(perm[i])))
              .norm() < 1e-10);
  }
}

TEST_CASE("padding tokens do not change the fixed layout outputs") {
  ModelConfig cfg = tiny_config(true, Activation::kGelu);
  const Params p = init_params(cfg, 9);
  const SpecialTokens sp;
  EncoderInput a = fixed_input({{5, 6}, {7}}, cfg, sp);
  EncoderInput b = a;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b.valid[i]) b.ids[i] = 11;
  }
  const Mat ha = encoder_forward(cfg, p, a);
  const Mat hb = encoder_forward(cfg, p, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.valid[i]) CHECK(ha.row(static_cast<Eigen::Index>(i)) == hb.row(static_cast<Eigen::Index>(i)));
  }
  const Mat la = head_jointwise(Head::kAEk, Layout::kFixed, cfg, p, ha);
  const Mat lb = head_jointwise(Head::kAEk, Layout::kFixed, cfg, p, hb);
  // candidate 1 has text; candidate 2 is an all-padding slot
  CHECK(la.row(0) == lb.row(0));
}

TEST_CASE("gradients match finite differences") {
  const ModelConfig cfg = tiny_config(false, Activation::kRelu);
  const auto errs = objforge::testing::gradient_errors(init_params(cfg, 1),
                                                       objforge::testing::fixed_layout_loss(cfg));
  for (const auto& [name, e] : errs) {
    INFO(name);
    CHECK(e < 1e-4);
  }
}

TEST_CASE("head and layout compatibility") {
  CHECK_NOTHROW(check_head_layout(Head::kIE1, Layout::kFlexible));
  CHECK_NOTHROW(check_head_layout(Head::kAEk, Layout::kFixed));
  CHECK_THROWS_AS(check_head_layout(Head::kAEk, Layout::kFlexible), ConfigError);
  CHECK_THROWS_AS(check_head_layout(Head::kREk, Layout::kFixed), ConfigError);
  const ModelConfig cfg = tiny_config(true, Activation::kRelu);
  const Params p = init_params(cfg, 1);
  const Mat h = encoder_forward(cfg, p, plain_input({5, 6}));
  CHECK_THROWS_AS(head_jointwise(Head::kIEk, Layout::kFixed, cfg, p, h), ShapeError);
  const Mat full = encoder_forward(cfg, p, fixed_input({{5}}, cfg, SpecialTokens{}));
  CHECK_THROWS_AS(head_jointwise(Head::kLM, Layout::kFixed, cfg, p, full), ConfigError);
}

TEST_CASE("cross entropy ignores -1 and rejects other labels") {
  Mat lg(2, 3);
  lg << 1, 2, 3, 0, 0, 0;
  Mat d;
  const double l = cross_entropy(lg, {-1, 1}, &d);
  CHECK(l == doctest::Approx(std::log(3.0)));
  CHECK(d.row(0).norm() == 0.0);
  CHECK_THROWS_AS(cross_entropy(lg, {-2, 0}), RangeError);
  CHECK_THROWS_AS(cross_entropy(lg, {3, 0}), RangeError);
  CHECK_THROWS_AS(cross_entropy(lg, {0}), ShapeError);
}

TEST_CASE("config validation") {
  ModelConfig c = tiny_config(true, Activation::kRelu);
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config(true, Activation::kRelu);
  c.slot_len = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  const ModelConfig cfg = tiny_config(false, Activation::kGelu);
  const Params p = init_params(cfg, 3);
  const auto dir = std::filesystem::temp_directory_path() / "objforge_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "a.ckpt", cfg, p);
  const auto [c2, p2] = load_checkpoint(dir / "a.ckpt");
  CHECK(config_to_json(c2) == config_to_json(cfg));
  for (const auto& n : p.names()) CHECK(p2[n] == p[n]);
  save_checkpoint(dir / "b.ckpt", cfg, p, CheckpointDtype::kF32);
  const auto [c3, p3] = load_checkpoint(dir / "b.ckpt");
  for (const auto& n : p.names()) CHECK((p3[n] - p[n]).cwiseAbs().maxCoeff() < 1e-6);
  std::filesystem::remove_all(dir);
  CHECK_THROWS(load_checkpoint(dir / "missing.ckpt"));
}
