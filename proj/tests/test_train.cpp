#include <doctest.h>

#include "objforge/error.hpp"
#include "objforge/optim.hpp"
#include "objforge/train.hpp"

using namespace objforge;

TEST_CASE("truncation trims the longest sequence from the end") {
  std::vector<std::vector<TokenId>> s{{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}, {11}};
  truncate_longest_first(s, 8);
  // 5,5,1 -> 4,5,1 -> 4,4,1 -> 3,4,1
  CHECK(s[0] == std::vector<TokenId>{1, 2, 3});
  CHECK(s[1] == std::vector<TokenId>{6, 7, 8, 9});
  CHECK(s[2] == std::vector<TokenId>{11});
  truncate_longest_first(s, 100);
  CHECK(s[0].size() == 3);
}

TEST_CASE("pair input layout") {
  const SpecialTokens sp;
  const auto in = pair_input({10, 11}, {12}, 16, sp);
  CHECK(in.ids == std::vector<TokenId>{sp.bos, 10, 11, sp.eos, 12, sp.eos});
  CHECK(in.seq_ids == std::vector<int>{0, 0, 0, 0, 1, 1});
  CHECK(in.positions == std::vector<int>{0, 1, 2, 3, 4, 5});
  const auto cut = pair_input({10, 11, 12, 13}, {14, 15}, 6, sp);
  CHECK(cut.size() == 6);
  CHECK(cut.ids == std::vector<TokenId>{sp.bos, 10, sp.eos, 14, 15, sp.eos});
}

TEST_CASE("fixed input slots") {
  ModelConfig cfg;
  cfg.k = 2;
  cfg.slot_len = 4;
  cfg.max_len = 12;
  const SpecialTokens sp;
  const auto in = fixed_input({{20, 21, 22, 23}, {24}}, cfg, sp);
  REQUIRE(in.size() == 12);
  CHECK(in.ids[0] == sp.bos);
  CHECK(in.ids[3] == sp.eos);
  CHECK(in.ids[4] == sp.bos);
  CHECK(in.ids[5] == 24);
  CHECK(in.ids[7] == sp.pad);
  CHECK(in.valid[7] == 0);
  CHECK(in.seq_ids[9] == 2);
  for (int i = 8; i < 12; ++i) CHECK(in.valid[static_cast<std::size_t>(i)] == 0);
  CHECK(slot_rows(Layout::kFixed, cfg) == std::vector<std::size_t>{0, 4, 8});
}

TEST_CASE("flexible input") {
  ModelConfig cfg;
  cfg.max_len = 7;
  const SpecialTokens sp;
  const auto in = flexible_input({{1, 2}, {3, 4, 5}, {6}}, cfg, sp);
  CHECK(in.size() == 7);
  CHECK(in.seq_ids[0] == 0);
  CHECK(in.seq_ids.back() == 1);
}

TEST_CASE("triangular schedule") {
  TrainConfig c;
  c.lr_peak = 1.0;
  c.warmup_steps = 10;
  c.total_steps = 30;
  CHECK(triangular_lr(0, c) == 0.0);
  CHECK(triangular_lr(5, c) == doctest::Approx(0.5));
  CHECK(triangular_lr(10, c) == 1.0);
  CHECK(triangular_lr(20, c) == doctest::Approx(0.5));
  CHECK(triangular_lr(30, c) == 0.0);
  CHECK_THROWS_AS(triangular_lr(31, c), RangeError);
  CHECK_THROWS_AS(triangular_lr(-1, c), RangeError);
  c.warmup_steps = 40;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("adamw leaves norms and biases undecayed") {
  CHECK(decays("layer0.attn.wq"));
  CHECK(decays("embed.word"));
  CHECK_FALSE(decays("layer1.ln2.gamma"));
  CHECK_FALSE(decays("layer0.ffn.b1"));
  Params p;
  p.add("layer0.attn.wq", 1, 1);
  p.add("layer0.ln1.gamma", 1, 1);
  p["layer0.attn.wq"](0, 0) = 2.0;
  p["layer0.ln1.gamma"](0, 0) = 2.0;
  TrainConfig c;
  c.weight_decay = 0.5;
  auto st = make_optimizer_state(p);
  adamw_step(p, p.zeros_like(), st, c, 0.1);
  CHECK(p["layer0.attn.wq"](0, 0) == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
  CHECK(p["layer0.ln1.gamma"](0, 0) == 2.0);
  // A first step moves each weight by lr against the gradient sign.
  Params g = p.zeros_like();
  g["layer0.ln1.gamma"](0, 0) = 3.0;
  auto fresh = make_optimizer_state(p);
  adamw_step(p, g, fresh, c, 0.1);
  CHECK(p["layer0.ln1.gamma"](0, 0) == doctest::Approx(1.9).epsilon(1e-6));
}

TEST_CASE("weighted objective parsing") {
  const auto w = parse_weighted_objective("c-rts:0.25");
  CHECK(w.objective == Objective::kCRTS);
  CHECK(w.weight == 0.25);
  CHECK(parse_weighted_objective("ssp").weight == 1.0);
  CHECK_THROWS_AS(parse_weighted_objective("nope:1"), ConfigError);
  CHECK_THROWS_AS(parse_weighted_objective("mlm:x"), ConfigError);
  CHECK_THROWS_AS(parse_weighted_objective("mlm:-1"), ConfigError);
}

TEST_CASE("loss trace helpers") {
  const std::vector<LossRow> rows{{0, "mlm", 4.0, 0.0}, {1, "mlm", 2.0, 0.1},
                                  {1, "ssp", 1.0, 0.1}, {2, "mlm", 1.0, 0.2}};
  CHECK(mean_loss(rows, "mlm", 2, false) == 3.0);
  CHECK(mean_loss(rows, "mlm", 2, true) == 1.5);
  const std::string csv = loss_trace_csv(rows);
  CHECK(csv.rfind("step,objective,loss,lr\n", 0) == 0);
  CHECK(csv.find("1,ssp,") != std::string::npos);
}

namespace {

struct Setup {
  Corpus corpus = synthetic_corpus(4, 3, 5, 2);
  Vocabulary vocab = train_bpe(corpus, 60);
  ModelConfig model;
  TrainConfig train;
  TaskOptions task;

  Setup() {
    model.d = 16;
    model.n_heads = 2;
    model.f = 32;
    model.vocab_size = vocab.size();
    model.max_len = 96;
    model.slot_len = 16;
    task.token_seq_len = 24;
    task.pair_max_len = 48;
    task.sds_max_len = 48;
    task.generator_passes = 1;
    task.n_clusters = 4;
    train.total_steps = 6;
    train.warmup_steps = 2;
    train.batch_size = 4;
    train.seed = 5;
  }
};

}  // namespace

TEST_CASE("trainer runs every objective") {
  Setup s;
  std::vector<WeightedObjective> objs;
  for (auto o : {Objective::kMLM, Objective::kRTS, Objective::kCRTS, Objective::kSLM,
                 Objective::kSSP, Objective::kSP, Objective::kPSD, Objective::kMSPP,
                 Objective::kSDS}) {
    objs.push_back({o, 1.0});
  }
  Trainer t(s.model, s.train, s.task, objs, s.corpus, s.vocab);
  const auto rows = t.run();
  CHECK(t.steps_done() == 6);
  // nine objectives plus the total, per step
  CHECK(rows.size() == 6 * 10);
  for (const auto& r : rows) CHECK(std::isfinite(r.loss));
  REQUIRE(t.f_matrix());
  REQUIRE(t.clusters());
  CHECK(t.f_matrix()->n() == t.clusters()->n());
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  Setup s;
  s.train.lr_peak = 0.0;
  Trainer t(s.model, s.train, s.task, {{Objective::kMLM, 1.0}}, s.corpus, s.vocab);
  const Params before = t.params();
  t.run();
  for (const auto& n : before.names()) CHECK(t.params()[n] == before[n]);
}

TEST_CASE("trainer is deterministic and validates its inputs") {
  Setup s;
  Trainer a(s.model, s.train, s.task, {{Objective::kSSP, 1.0}}, s.corpus, s.vocab);
  Trainer b(s.model, s.train, s.task, {{Objective::kSSP, 1.0}}, s.corpus, s.vocab);
  a.run();
  b.run();
  CHECK(a.trace().back().loss == b.trace().back().loss);
  ModelConfig bad = s.model;
  bad.vocab_size += 1;
  CHECK_THROWS_AS(Trainer(bad, s.train, s.task, {{Objective::kMLM, 1.0}}, s.corpus, s.vocab),
                  ConfigError);
  TaskOptions task = s.task;
  task.token_seq_len = 500;
  CHECK_THROWS_AS(Trainer(s.model, s.train, task, {{Objective::kMLM, 1.0}}, s.corpus, s.vocab),
                  ConfigError);
}
