#include "objforge/train.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "objforge/error.hpp"
#include "objforge/random.hpp"

namespace objforge {

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::kMLM: return "mlm";
    case Objective::kRTS: return "rts";
    case Objective::kCRTS: return "crts";
    case Objective::kSLM: return "slm";
    case Objective::kSSP: return "ssp";
    case Objective::kSP: return "sp";
    case Objective::kPSD: return "psd";
    case Objective::kMSPP: return "mspp";
    case Objective::kSDS: return "sds";
  }
  return "?";
}

std::optional<Objective> parse_objective(std::string_view name) {
  if (name == "c-rts") return Objective::kCRTS;
  for (auto o : {Objective::kMLM, Objective::kRTS, Objective::kCRTS, Objective::kSLM,
                 Objective::kSSP, Objective::kSP, Objective::kPSD, Objective::kMSPP,
                 Objective::kSDS}) {
    if (name == objective_name(o)) return o;
  }
  return std::nullopt;
}

WeightedObjective parse_weighted_objective(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const auto o = parse_objective(name);
  if (!o) throw ConfigError("unknown objective '" + std::string(name) + "'");
  WeightedObjective w{*o, 1.0};
  if (colon != std::string_view::npos) {
    const std::string num(text.substr(colon + 1));
    std::size_t used = 0;
    try {
      w.weight = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != num.size() || num.empty() || !(w.weight >= 0.0)) {
      throw ConfigError("objective weight '" + num + "' is not a non-negative number");
    }
  }
  return w;
}

void TaskOptions::validate() const {
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("rate must be in (0, 1)");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (token_seq_len < 3) throw ConfigError("token_seq_len must be at least 3");
  if (pair_max_len < 5) throw ConfigError("pair_max_len must be at least 5");
  if (sds_max_len < 3) throw ConfigError("sds_max_len must be at least 3");
  if (generator_passes < 1) throw ConfigError("generator_passes must be at least 1");
  if (n_clusters < 1) throw ConfigError("n_clusters must be at least 1");
  if (mspp_head == Head::kLM || mspp_head == Head::kBinary) {
    throw ConfigError("mspp needs a jointwise head");
  }
  gen.validate();
}

void truncate_longest_first(std::vector<std::vector<TokenId>>& seqs, std::size_t budget) {
  std::size_t total = 0;
  for (const auto& s : seqs) total += s.size();
  while (total > budget) {
    std::size_t longest = 0;
    for (std::size_t i = 1; i < seqs.size(); ++i) {
      if (seqs[i].size() > seqs[longest].size()) longest = i;
    }
    seqs[longest].pop_back();
    --total;
  }
}

namespace {

void push(EncoderInput& in, TokenId id, int seq, bool valid = true) {
  in.positions.push_back(static_cast<int>(in.ids.size()));
  in.ids.push_back(id);
  in.seq_ids.push_back(seq);
  in.valid.push_back(valid ? 1 : 0);
}

EncoderInput packed_input(std::vector<std::vector<TokenId>> seqs, std::size_t max_len,
                          const SpecialTokens& sp) {
  const std::size_t specials = seqs.size() + 1;
  if (max_len < specials + seqs.size()) throw ConfigError("max_len too small for input");
  truncate_longest_first(seqs, max_len - specials);
  EncoderInput in;
  push(in, sp.bos, 0);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const int sid = i == 0 ? 0 : 1;
    for (TokenId t : seqs[i]) push(in, t, sid);
    push(in, sp.eos, sid);
  }
  return in;
}

}  // namespace

EncoderInput pair_input(const std::vector<TokenId>& l, const std::vector<TokenId>& r,
                        std::size_t max_len, const SpecialTokens& sp) {
  return packed_input({l, r}, max_len, sp);
}

EncoderInput flexible_input(std::vector<std::vector<TokenId>> seqs, const ModelConfig& cfg,
                            const SpecialTokens& sp) {
  if (seqs.empty() || seqs.size() > cfg.k + 1) {
    throw ShapeError("flexible input takes 1..k+1 sequences");
  }
  return packed_input(std::move(seqs), cfg.max_len, sp);
}

EncoderInput fixed_input(const std::vector<std::vector<TokenId>>& seqs,
                         const ModelConfig& cfg, const SpecialTokens& sp) {
  if (seqs.size() > cfg.k + 1) throw ShapeError("fixed input takes at most k+1 sequences");
  if (cfg.slot_len < 2) throw ConfigError("slot_len must be at least 2");
  if (cfg.n_seq_ids < cfg.k + 1) throw ConfigError("fixed layout needs k+1 sequence ids");
  EncoderInput in;
  for (std::size_t slot = 0; slot <= cfg.k; ++slot) {
    const int sid = static_cast<int>(slot);
    std::size_t used = 0;
    if (slot < seqs.size()) {
      push(in, sp.bos, sid);
      const std::size_t n = std::min(seqs[slot].size(), cfg.slot_len - 2);
      for (std::size_t i = 0; i < n; ++i) push(in, seqs[slot][i], sid);
      push(in, sp.eos, sid);
      used = n + 2;
    }
    for (; used < cfg.slot_len; ++used) push(in, sp.pad, sid, false);
  }
  return in;
}

std::string loss_trace_csv(const std::vector<LossRow>& rows) {
  std::string out = "step,objective,loss,lr\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.10g,%.10g\n", r.step, r.objective.c_str(), r.loss,
                  r.lr);
    out += buf;
  }
  return out;
}

double mean_loss(const std::vector<LossRow>& rows, std::string_view objective,
                 std::size_t n, bool last) {
  std::vector<double> xs;
  for (const auto& r : rows) {
    if (r.objective == objective) xs.push_back(r.loss);
  }
  if (xs.empty() || n == 0) throw RangeError("no losses recorded for " + std::string(objective));
  n = std::min(n, xs.size());
  const auto begin = last ? xs.end() - static_cast<std::ptrdiff_t>(n) : xs.begin();
  double s = 0.0;
  for (auto it = begin; it != begin + static_cast<std::ptrdiff_t>(n); ++it) s += *it;
  return s / static_cast<double>(n);
}

namespace {

struct PairItem {
  std::vector<TokenId> l, r;
  int y = 0;
};

struct JointItem {
  std::vector<std::vector<TokenId>> seqs;  // pivot first
  std::vector<int> ys;
};

struct SummaryItem {
  std::vector<TokenId> src;
  RowVec target;
};

// One encoder pass worth of supervision.
struct Item {
  EncoderInput input;
  std::vector<int> labels;
  RowVec target;
  std::optional<CorruptionOutput> corruption;
};

bool is_token_objective(Objective o) {
  return o == Objective::kMLM || o == Objective::kRTS || o == Objective::kCRTS ||
         o == Objective::kSLM;
}

StructObjective struct_of(Objective o) {
  switch (o) {
    case Objective::kSSP: return StructObjective::kSSP;
    case Objective::kSP: return StructObjective::kSP;
    case Objective::kPSD: return StructObjective::kPSD;
    case Objective::kMSPP: return StructObjective::kMSPP;
    case Objective::kSDS: return StructObjective::kSDS;
    default: throw ConfigError("not a structural objective");
  }
}

}  // namespace

struct Trainer::Impl {
  ModelConfig mcfg;
  TrainConfig tcfg;
  TaskOptions task;
  std::vector<WeightedObjective> objectives;
  const Corpus& corpus;
  const Vocabulary& vocab;

  Params params;
  OptimizerState opt;
  std::vector<LossRow> trace;
  int steps = 0;

  std::vector<std::vector<TokenId>> paragraphs;
  std::map<Objective, std::vector<PairItem>> pairs;
  std::vector<JointItem> joint;
  std::vector<SummaryItem> summaries;
  std::optional<ClusterMap> clusters;
  std::optional<FMatrix> f;

  Impl(ModelConfig m, TrainConfig t, TaskOptions k, std::vector<WeightedObjective> objs,
       const Corpus& c, const Vocabulary& v, const ClusterMap* cm)
      : mcfg(m), tcfg(t), task(std::move(k)), objectives(std::move(objs)), corpus(c),
        vocab(v) {
    mcfg.validate();
    tcfg.validate();
    task.validate();
    if (objectives.empty()) throw ConfigError("no training objective given");
    if (mcfg.vocab_size != vocab.size()) {
      throw ConfigError("model vocab_size " + std::to_string(mcfg.vocab_size) +
                        " does not match the vocabulary (" + std::to_string(vocab.size()) +
                        " tokens)");
    }
    if (task.pair_max_len > mcfg.max_len || task.token_seq_len > mcfg.max_len ||
        task.sds_max_len > mcfg.max_len) {
      throw ConfigError("task sequence lengths exceed the model's max_len");
    }
    params = init_params(mcfg, derive_seed(tcfg.seed, "params"));
    opt = make_optimizer_state(params);
    task.gen.seed = derive_seed(tcfg.seed, "gen");
    task.gen.passes = task.generator_passes;
    for (const auto& w : objectives) prepare(w.objective, cm);
  }

  std::vector<TokenId> tokens(const std::string& text) const { return encode(vocab, text).ids; }

  void prepare(Objective o, const ClusterMap* cm) {
    if (is_token_objective(o)) {
      if (paragraphs.empty()) {
        for (const auto& d : corpus.documents()) {
          for (const auto& p : d.paragraphs) {
            std::vector<TokenId> ids{vocab.specials().bos};
            for (TokenId t : tokens(p.text())) {
              if (ids.size() + 1 >= task.token_seq_len) break;
              ids.push_back(t);
            }
            ids.push_back(vocab.specials().eos);
            paragraphs.push_back(std::move(ids));
          }
        }
      }
      if (o == Objective::kCRTS && !f) {
        if (cm) {
          clusters = *cm;
        } else {
          SkipgramOptions sg;
          sg.dim = 16;
          sg.epochs = 2;
          sg.seed = derive_seed(tcfg.seed, "crts-embed");
          const EmbeddingTable e = train_skipgram(corpus, vocab, sg);
          KMeansOptions km;
          km.n = std::min(task.n_clusters, vocab.size());
          km.restarts = 2;
          km.seed = derive_seed(tcfg.seed, "crts-kmeans");
          clusters = kmeans(e, km).clusters;
        }
        if (clusters->size() != vocab.size()) {
          throw ConfigError("cluster map does not cover the vocabulary");
        }
        f.emplace(clusters->n());
      }
      return;
    }
    const StructObjective so = struct_of(o);
    const std::size_t n = anchor_count(so, corpus, task.gen);
    if (o == Objective::kMSPP) {
      if (!joint.empty()) return;
      for (const auto& ex : gen_mspp(corpus, task.gen, 0, n)) {
        JointItem item;
        item.seqs.push_back(tokens(ex.pivot));
        for (const auto& cand : ex.candidates) item.seqs.push_back(tokens(cand));
        item.ys = ex.labels;
        joint.push_back(std::move(item));
      }
      if (joint.empty()) throw InsufficientMaterial("corpus yields no mspp examples");
      if (joint.front().ys.size() != mcfg.k) {
        throw ConfigError("mspp candidate count must equal the model's k");
      }
      return;
    }
    if (o == Objective::kSDS) {
      if (!summaries.empty()) return;
      for (const auto& ex : gen_sds(corpus, task.gen, 0, n)) {
        SummaryItem item;
        item.src = tokens(ex.source);
        item.target = RowVec::Zero(static_cast<Eigen::Index>(vocab.size()));
        for (TokenId t : tokens(ex.target)) {
          if (!vocab.is_special(t)) item.target(t) += 1.0;
        }
        if (item.target.sum() <= 0.0) continue;
        item.target /= item.target.sum();
        summaries.push_back(std::move(item));
      }
      if (summaries.empty()) throw InsufficientMaterial("corpus yields no sds examples");
      return;
    }
    auto& pool = pairs[o];
    if (!pool.empty()) return;
    for (const auto& ex : gen_pairs(so, corpus, task.gen)) {
      pool.push_back({tokens(ex.left), tokens(ex.right),
                      ex.label == PairLabel::kPositive ? 1 : 0});
    }
    if (pool.empty()) throw InsufficientMaterial(std::string("corpus yields no ") +
                                                 objective_name(o) + " examples");
  }

  Layout mspp_layout() const {
    return task.mspp_head == Head::kREk ? Layout::kFlexible : Layout::kFixed;
  }

  std::vector<Item> batch(Objective o, int step) const {
    Rng rng = make_rng(tcfg.seed, std::string("batch/") + objective_name(o),
                       static_cast<uint64_t>(step));
    const auto& sp = vocab.specials();
    std::vector<Item> items(static_cast<std::size_t>(tcfg.batch_size));
    for (Item& it : items) {
      if (is_token_objective(o)) {
        const auto& ids = paragraphs[uniform_index(rng, paragraphs.size())];
        CorruptionOutput c;
        switch (o) {
          case Objective::kMLM: c = mlm_corrupt(ids, task.rate, rng, vocab); break;
          case Objective::kRTS: c = rts_corrupt(ids, task.rate, rng, vocab); break;
          case Objective::kSLM: c = slm_corrupt(ids, task.rate, rng, vocab); break;
          default:
            c = crts_corrupt(ids, CrtsConfig{task.gamma, task.rate}, *clusters, *f, rng, vocab);
        }
        it.input = plain_input(c.ids);
        it.labels = c.labels;
        if (o == Objective::kRTS || o == Objective::kCRTS) {
          for (std::size_t i = 0; i < ids.size(); ++i) {
            if (vocab.is_special(ids[i])) it.labels[i] = -1;
          }
        }
        it.corruption = std::move(c);
      } else if (o == Objective::kMSPP) {
        const JointItem& j = joint[uniform_index(rng, joint.size())];
        it.input = mspp_layout() == Layout::kFixed ? fixed_input(j.seqs, mcfg, sp)
                                                   : flexible_input(j.seqs, mcfg, sp);
        it.labels = j.ys;
        if (task.mspp_head == Head::kIE1 || task.mspp_head == Head::kAE1) {
          const bool any = std::any_of(j.ys.begin(), j.ys.end(), [](int y) { return y == 1; });
          it.labels = {any ? 1 : 0};
        }
      } else if (o == Objective::kSDS) {
        const SummaryItem& s = summaries[uniform_index(rng, summaries.size())];
        std::vector<TokenId> ids{sp.bos};
        for (TokenId t : s.src) {
          if (ids.size() + 1 >= task.sds_max_len) break;
          ids.push_back(t);
        }
        ids.push_back(sp.eos);
        it.input = plain_input(ids);
        it.target = s.target;
      } else {
        const auto& pool = pairs.at(o);
        const PairItem& p = pool[uniform_index(rng, pool.size())];
        it.input = pair_input(p.l, p.r, task.pair_max_len, sp);
        it.labels = {p.y};
      }
    }
    return items;
  }

  Mat logits(Objective o, const Mat& h) const {
    switch (o) {
      case Objective::kMLM:
      case Objective::kSLM: return head_lm(mcfg, params, h);
      case Objective::kRTS:
      case Objective::kCRTS: return head_binary(params, h);
      case Objective::kMSPP:
        return head_jointwise(task.mspp_head, mspp_layout(), mcfg, params, h);
      case Objective::kSDS: return head_lm(mcfg, params, h.topRows(1));
      default: return head_jointwise(Head::kIE1, Layout::kPairwise, mcfg, params, h);
    }
  }

  void head_backward(Objective o, const Mat& h, const Mat& d_logits, Params& grads,
                     Mat& d_h) const {
    switch (o) {
      case Objective::kMLM:
      case Objective::kSLM: head_lm_backward(mcfg, params, h, d_logits, grads, d_h); return;
      case Objective::kRTS:
      case Objective::kCRTS: head_binary_backward(params, h, d_logits, grads, d_h); return;
      case Objective::kMSPP:
        head_jointwise_backward(task.mspp_head, mspp_layout(), mcfg, params, h, d_logits,
                                grads, d_h);
        return;
      case Objective::kSDS: {
        Mat d_top = Mat::Zero(1, h.cols());
        head_lm_backward(mcfg, params, h.topRows(1), d_logits, grads, d_top);
        d_h.row(0) += d_top.row(0);
        return;
      }
      default:
        head_jointwise_backward(Head::kIE1, Layout::kPairwise, mcfg, params, h, d_logits,
                                grads, d_h);
    }
  }

  // Mean loss over the batch; gradients of weight * mean are added to grads.
  double run_objective(Objective o, int step, Params* grads, double weight, bool update_f) {
    const std::vector<Item> items = batch(o, step);
    std::size_t count = 0;
    for (const Item& it : items) {
      if (o == Objective::kSDS) {
        ++count;
      } else {
        for (int y : it.labels) count += y >= 0 ? 1 : 0;
      }
    }
    if (count == 0) return 0.0;
    const double scale = weight / static_cast<double>(count);
    double sum = 0.0;
    FMatrix delta = f ? FMatrix(f->n()) : FMatrix();
    for (const Item& it : items) {
      EncoderCache cache;
      const Mat h = encoder_forward(mcfg, params, it.input, grads ? &cache : nullptr);
      const Mat lg = logits(o, h);
      Mat d_logits;
      if (o == Objective::kSDS) {
        RowVec d_row;
        sum += soft_cross_entropy(lg.row(0), it.target, grads ? &d_row : nullptr, scale);
        d_logits = d_row;
      } else {
        sum += cross_entropy_sum(lg, it.labels, grads ? &d_logits : nullptr, scale).sum;
      }
      if (o == Objective::kCRTS && update_f) {
        std::vector<int> pred(static_cast<std::size_t>(lg.rows()));
        for (Eigen::Index i = 0; i < lg.rows(); ++i) pred[i] = lg(i, 1) > lg(i, 0) ? 1 : 0;
        crts_update_positions(delta, *it.corruption, pred);
      }
      if (grads) {
        Mat d_h = Mat::Zero(h.rows(), h.cols());
        head_backward(o, h, d_logits, *grads, d_h);
        encoder_backward(mcfg, params, cache, d_h, *grads);
      }
    }
    // Sampling within a step reads one snapshot; the step's tallies land
    // together afterwards.
    if (o == Objective::kCRTS && update_f) *f += delta;
    return sum / static_cast<double>(count);
  }

  double accuracy(Objective o, int step) const {
    if (o == Objective::kSDS) throw ConfigError("sds has no accuracy");
    std::size_t hit = 0, n = 0;
    for (const Item& it : batch(o, step)) {
      const Mat lg = logits(o, encoder_forward(mcfg, params, it.input, nullptr));
      for (Eigen::Index i = 0; i < lg.rows(); ++i) {
        const int y = it.labels[static_cast<std::size_t>(i)];
        if (y < 0) continue;
        Eigen::Index best = 0;
        lg.row(i).maxCoeff(&best);
        hit += best == y ? 1 : 0;
        ++n;
      }
    }
    return n ? static_cast<double>(hit) / static_cast<double>(n) : 0.0;
  }

  std::vector<LossRow> step() {
    if (steps >= tcfg.total_steps) throw RangeError("training already finished");
    const int s = steps + 1;
    const double lr = triangular_lr(s, tcfg);
    Params grads = params.zeros_like();
    std::vector<LossRow> rows;
    double total = 0.0;
    for (const auto& w : objectives) {
      const double loss = run_objective(w.objective, s, &grads, w.weight, true);
      total += w.weight * loss;
      rows.push_back({s, objective_name(w.objective), loss, lr});
    }
    if (objectives.size() > 1) rows.push_back({s, "total", total, lr});
    if (!grads.all_finite()) throw NumericError("non-finite gradient at step " + std::to_string(s));
    optimizer_step(params, grads, opt, tcfg, lr);
    steps = s;
    trace.insert(trace.end(), rows.begin(), rows.end());
    return rows;
  }
};

Trainer::Trainer(ModelConfig model_cfg, TrainConfig train_cfg, TaskOptions task,
                 std::vector<WeightedObjective> objectives, const Corpus& corpus,
                 const Vocabulary& vocab, const ClusterMap* clusters)
    : impl_(std::make_unique<Impl>(model_cfg, train_cfg, std::move(task),
                                   std::move(objectives), corpus, vocab, clusters)) {}

Trainer::~Trainer() = default;

std::vector<LossRow> Trainer::step() { return impl_->step(); }

std::vector<LossRow> Trainer::run() {
  std::vector<LossRow> rows;
  while (impl_->steps < impl_->tcfg.total_steps) {
    auto r = impl_->step();
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

double Trainer::batch_loss(Objective o, int step, Params* grads) {
  impl_->prepare(o, impl_->clusters ? &*impl_->clusters : nullptr);
  return impl_->run_objective(o, step, grads, 1.0, false);
}

double Trainer::batch_accuracy(Objective o, int step) {
  impl_->prepare(o, impl_->clusters ? &*impl_->clusters : nullptr);
  return impl_->accuracy(o, step);
}

const Params& Trainer::params() const { return impl_->params; }
Params& Trainer::params() { return impl_->params; }
const ModelConfig& Trainer::model_config() const { return impl_->mcfg; }
const std::vector<LossRow>& Trainer::trace() const { return impl_->trace; }
const FMatrix* Trainer::f_matrix() const { return impl_->f ? &*impl_->f : nullptr; }
const ClusterMap* Trainer::clusters() const {
  return impl_->clusters ? &*impl_->clusters : nullptr;
}
int Trainer::steps_done() const { return impl_->steps; }

}  // namespace objforge
