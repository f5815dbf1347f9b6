#include "objforge/generators.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "objforge/error.hpp"
#include "objforge/io.hpp"
#include "objforge/text.hpp"

namespace objforge {

using nlohmann::json;

const char* objective_name(StructObjective o) {
  switch (o) {
    case StructObjective::kSSP: return "ssp";
    case StructObjective::kSP: return "sp";
    case StructObjective::kPSD: return "psd";
    case StructObjective::kMSPP: return "mspp";
    case StructObjective::kSDC: return "sdc";
    case StructObjective::kDPC: return "dpc";
    case StructObjective::kDSLC: return "dslc";
    case StructObjective::kSDS: return "sds";
  }
  return "?";
}

std::optional<StructObjective> parse_struct_objective(std::string_view name) {
  for (auto o : {StructObjective::kSSP, StructObjective::kSP, StructObjective::kPSD,
                 StructObjective::kMSPP, StructObjective::kSDC, StructObjective::kDPC,
                 StructObjective::kDSLC, StructObjective::kSDS}) {
    if (name == objective_name(o)) return o;
  }
  return std::nullopt;
}

const char* label_name(PairLabel y) {
  switch (y) {
    case PairLabel::kPositive: return "positive";
    case PairLabel::kHardNegative: return "hard_negative";
    case PairLabel::kEasyNegative: return "easy_negative";
  }
  return "?";
}

std::optional<PairLabel> parse_label(std::string_view name) {
  for (auto y : {PairLabel::kPositive, PairLabel::kHardNegative, PairLabel::kEasyNegative}) {
    if (name == label_name(y)) return y;
  }
  return std::nullopt;
}

const LengthDistribution& left_length_distribution() {
  static const LengthDistribution d{{0.70, 0.20, 0.10}};
  return d;
}

const LengthDistribution& right_length_distribution() {
  static const LengthDistribution d{{0.14, 0.24, 0.24, 0.24, 0.14}};
  return d;
}

std::size_t sample_left_length(Rng& rng) { return left_length_distribution().sample(rng); }
std::size_t sample_right_length(Rng& rng) { return right_length_distribution().sample(rng); }

namespace {

const char* right_mode_name(RightMode m) {
  switch (m) {
    case RightMode::kSpan: return "span";
    case RightMode::kRemainder: return "remainder";
    case RightMode::kParagraph: return "paragraph";
  }
  return "?";
}

json span_json(const Span& s) {
  return json::array({s.where.doc, s.where.para, s.start, s.end});
}

json sentence_json(const SentenceRef& r) {
  return json::array({r.where.doc, r.where.para, r.sentence});
}

}  // namespace

std::string PairExample::to_json() const {
  json j;
  j["l"] = left;
  j["r"] = right;
  j["y"] = label_name(label);
  j["obj"] = objective_name(objective);
  j["prov"] = {{"group", group},
               {"l", span_json(left_span)},
               {"r", span_json(right_span)},
               {"r_mode", right_mode_name(right_mode)}};
  return j.dump();
}

std::string JointExample::to_json() const {
  json j;
  j["pivot"] = pivot;
  j["cands"] = candidates;
  j["ys"] = labels;
  json refs = json::array();
  for (const auto& r : candidate_refs) refs.push_back(sentence_json(r));
  j["prov"] = {{"group", group}, {"pivot", sentence_json(pivot_ref)}, {"cands", refs}};
  return j.dump();
}

std::string ContextExample::to_json() const {
  json j;
  j["a"] = a;
  j["b"] = b;
  j["c"] = context;
  j["y"] = label_name(label);
  j["kind"] = objective_name(kind);
  j["prov"] = {{"group", group},
               {"a", span_json(a_span)},
               {"b", span_json(b_span)},
               {"c", json::array({context_where.doc, context_where.para,
                                  context_sentences})}};
  return j.dump();
}

std::string SummaryExample::to_json() const {
  json j;
  j["src"] = source;
  j["tgt"] = target;
  j["prov"] = {{"doc", doc}};
  return j.dump();
}

void GenOptions::validate() const {
  if (passes < 1) throw ConfigError("passes must be at least 1");
  if (quota.total() < 1) throw ConfigError("negative quota must be at least 1");
  if (mspp.k() < 1) throw ConfigError("mspp candidate count must be at least 1");
}

std::size_t anchor_count(StructObjective o, const Corpus& c, const GenOptions& opts) {
  if (o == StructObjective::kSDS) return c.size();
  return c.paragraph_index().size() * opts.passes;
}

bool sds_accepts(const Document& d, const GenOptions& opts) {
  if (d.paragraphs.size() < 2) return false;
  const Paragraph& first = d.paragraphs.front();
  return first.size() >= opts.sds_min_sentences &&
         text::code_point_count(first.text()) >= opts.sds_min_chars;
}

namespace {

using Indices = std::vector<std::size_t>;

Span full_span(const Corpus& c, ParagraphRef r) {
  return Span{r, 0, c.paragraph(r).size() - 1};
}

std::string join_sentences(const Paragraph& p, const Indices& idx) {
  std::vector<std::string> parts;
  for (std::size_t i : idx) parts.push_back(p.sentences.at(i));
  return text::join(parts, " ");
}

// Sentences of the paragraph outside every given span.
Indices remainder(const Paragraph& p, std::initializer_list<const Span*> spans) {
  Indices out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    bool covered = false;
    for (const Span* s : spans) covered = covered || s->contains(i);
    if (!covered) out.push_back(i);
  }
  return out;
}

// Sentences directly before and after `b`, minus those in `a` when `a`
// shares b's paragraph.
Indices local_context(const Paragraph& p, const Span& b, const Span* a) {
  Indices out;
  auto keep = [&](std::size_t i) {
    return !(a && a->where == b.where && a->contains(i));
  };
  if (b.start > 0 && keep(b.start - 1)) out.push_back(b.start - 1);
  if (b.end + 1 < p.size() && keep(b.end + 1)) out.push_back(b.end + 1);
  return out;
}

std::set<std::size_t> as_set(const Span& s) {
  std::set<std::size_t> out;
  for (std::size_t i = s.start; i <= s.end; ++i) out.insert(i);
  return out;
}

// k distinct elements drawn uniformly (partial Fisher-Yates).
template <typename T>
std::vector<T> pick_distinct(Rng& rng, std::vector<T> pool, std::size_t k) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

template <typename T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

// Paragraphs satisfying some predicate, with per-document counts so that
// "anywhere but document d" can be sampled by rejection.
class Pool {
 public:
  template <typename Pred>
  Pool(const Corpus& c, Pred pred) : per_doc_(c.size(), 0) {
    for (const ParagraphRef& r : c.paragraph_index()) {
      if (pred(r, c.paragraph(r))) {
        refs_.push_back(r);
        ++per_doc_[r.doc];
      }
    }
  }

  std::size_t outside(std::size_t doc) const { return refs_.size() - per_doc_[doc]; }

  ParagraphRef sample_outside(Rng& rng, std::size_t doc) const {
    if (outside(doc) == 0) {
      throw InsufficientMaterial("no other document offers material for easy negatives");
    }
    for (;;) {
      const ParagraphRef r = refs_[uniform_index(rng, refs_.size())];
      if (r.doc != doc) return r;
    }
  }

 private:
  std::vector<ParagraphRef> refs_;
  std::vector<std::size_t> per_doc_;
};

struct Material {
  Pool all;
  Pool multi;      // paragraphs with at least two sentences
  Pool non_first;  // paragraphs other than a document's first

  explicit Material(const Corpus& c)
      : all(c, [](ParagraphRef, const Paragraph&) { return true; }),
        multi(c, [](ParagraphRef, const Paragraph& p) { return p.size() >= 2; }),
        non_first(c, [](ParagraphRef r, const Paragraph&) { return r.para >= 1; }) {}
};

// Other paragraphs of the anchor's document that satisfy `pred`.
template <typename Pred>
std::vector<ParagraphRef> siblings(const Corpus& c, ParagraphRef anchor, Pred pred) {
  std::vector<ParagraphRef> out;
  const auto& d = c.doc(anchor.doc);
  for (std::size_t l = 0; l < d.paragraphs.size(); ++l) {
    if (l == anchor.para) continue;
    const ParagraphRef r{anchor.doc, l};
    if (pred(r, d.paragraphs[l])) out.push_back(r);
  }
  return out;
}

bool any_paragraph(ParagraphRef, const Paragraph&) { return true; }
bool multi_sentence(ParagraphRef, const Paragraph& p) { return p.size() >= 2; }
bool not_first(ParagraphRef r, const Paragraph&) { return r.para >= 1; }

ParagraphRef anchor_ref(const Corpus& c, std::size_t anchor) {
  const auto& flat = c.paragraph_index();
  return flat[anchor % flat.size()];
}

void require_documents(const Corpus& c, std::string_view objective) {
  if (c.size() < 2) {
    throw InsufficientMaterial(std::string(objective) +
                               " needs at least two documents for easy negatives");
  }
}

// Left span then a disjoint right span in the same paragraph; nullopt when
// the left span leaves no room.
std::optional<std::pair<Span, Span>> disjoint_pair(const Paragraph& p, ParagraphRef r,
                                                   Rng& rng) {
  if (p.size() < 2) return std::nullopt;
  const Span left = sample_span(p, r, left_length_distribution(), rng);
  if (left.length() == p.size()) return std::nullopt;
  const Span right = sample_span(p, r, right_length_distribution(), rng, as_set(left));
  return std::make_pair(left, right);
}

// Span that leaves at least one sentence of the paragraph outside it.
Span proper_span(const Paragraph& p, ParagraphRef r, std::size_t length, Rng& rng) {
  return place_span(p, r, std::min(length, p.size() - 1), rng);
}

// ---- pair objectives ----

std::vector<PairExample> ssp_group(const Corpus& c, const Material& mat,
                                   const GenOptions& opts, std::size_t anchor) {
  Rng rng = make_rng(opts.seed, "ssp", anchor);
  const ParagraphRef ref = anchor_ref(c, anchor);
  const auto pos = disjoint_pair(c.paragraph(ref), ref, rng);
  if (!pos) return {};
  const auto& [left, right] = *pos;
  const std::string ltext = c.span_text(left);
  std::vector<PairExample> out;
  auto emit = [&](const Span& r, PairLabel y) {
    out.push_back({ltext, c.span_text(r), y, StructObjective::kSSP, anchor, left, r,
                   RightMode::kSpan});
  };
  emit(right, PairLabel::kPositive);
  for (const ParagraphRef& h :
       pick_distinct(rng, siblings(c, ref, any_paragraph), opts.quota.hard)) {
    emit(sample_span(c.paragraph(h), h, right_length_distribution(), rng),
         PairLabel::kHardNegative);
  }
  while (out.size() < 1 + opts.quota.total()) {
    const ParagraphRef e = mat.all.sample_outside(rng, ref.doc);
    emit(sample_span(c.paragraph(e), e, right_length_distribution(), rng),
         PairLabel::kEasyNegative);
  }
  return out;
}

std::vector<PairExample> sp_group(const Corpus& c, const Material& mat,
                                  const GenOptions& opts, std::size_t anchor) {
  Rng rng = make_rng(opts.seed, "sp", anchor);
  const ParagraphRef ref = anchor_ref(c, anchor);
  const Paragraph& p = c.paragraph(ref);
  if (p.size() < 2) return {};
  const Span left = proper_span(p, ref, sample_left_length(rng), rng);
  const std::string ltext = c.span_text(left);
  std::vector<PairExample> out;
  auto emit = [&](const Span& cut, PairLabel y) {
    const Paragraph& q = c.paragraph(cut.where);
    out.push_back({ltext, join_sentences(q, remainder(q, {&cut})), y,
                   StructObjective::kSP, anchor, left, cut, RightMode::kRemainder});
  };
  emit(left, PairLabel::kPositive);
  for (const ParagraphRef& h :
       pick_distinct(rng, siblings(c, ref, multi_sentence), opts.quota.hard)) {
    emit(proper_span(c.paragraph(h), h, sample_left_length(rng), rng),
         PairLabel::kHardNegative);
  }
  while (out.size() < 1 + opts.quota.total()) {
    const ParagraphRef e = mat.multi.sample_outside(rng, ref.doc);
    emit(proper_span(c.paragraph(e), e, sample_left_length(rng), rng),
         PairLabel::kEasyNegative);
  }
  return out;
}

std::vector<PairExample> psd_group(const Corpus& c, const Material& mat,
                                   const GenOptions& opts, std::size_t anchor) {
  Rng rng = make_rng(opts.seed, "psd", anchor);
  const ParagraphRef ref = anchor_ref(c, anchor);
  const auto others = siblings(c, ref, any_paragraph);
  if (others.empty()) return {};
  const Span left = full_span(c, ref);
  const std::string ltext = c.span_text(left);
  std::vector<PairExample> out;
  auto emit = [&](ParagraphRef r, PairLabel y) {
    const Span s = full_span(c, r);
    out.push_back({ltext, c.span_text(s), y, StructObjective::kPSD, anchor, left, s,
                   RightMode::kParagraph});
  };
  emit(others[uniform_index(rng, others.size())], PairLabel::kPositive);
  while (out.size() < 1 + opts.quota.total()) {
    emit(mat.all.sample_outside(rng, ref.doc), PairLabel::kEasyNegative);
  }
  return out;
}

// ---- jointwise ----

std::vector<JointExample> mspp_group(const Corpus& c, const Material& mat,
                                     const GenOptions& opts, std::size_t anchor) {
  Rng rng = make_rng(opts.seed, "mspp", anchor);
  const ParagraphRef ref = anchor_ref(c, anchor);
  const Paragraph& p = c.paragraph(ref);
  if (p.size() < 2) return {};
  const std::size_t s0 = uniform_index(rng, p.size());

  std::vector<SentenceRef> same_para;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i != s0) same_para.push_back({ref, i});
  }
  std::vector<SentenceRef> same_doc;
  for (const ParagraphRef& r : siblings(c, ref, any_paragraph)) {
    for (std::size_t i = 0; i < c.paragraph(r).size(); ++i) same_doc.push_back({r, i});
  }
  std::vector<SentenceRef> cands = pick_distinct(rng, same_para, opts.mspp.same_paragraph);
  for (const auto& s : pick_distinct(rng, same_doc, opts.mspp.same_document)) {
    cands.push_back(s);
  }
  // Shortfalls on either in-document quota are filled from other documents.
  while (cands.size() < opts.mspp.k()) {
    const ParagraphRef e = mat.all.sample_outside(rng, ref.doc);
    cands.push_back({e, uniform_index(rng, c.paragraph(e).size())});
  }
  shuffle(rng, cands);

  JointExample ex;
  ex.group = anchor;
  ex.pivot_ref = {ref, s0};
  ex.pivot = p.sentences[s0];
  for (const auto& s : cands) {
    ex.candidates.push_back(c.paragraph(s.where).sentences[s.sentence]);
    ex.labels.push_back(s.where == ref ? 1 : 0);
  }
  ex.candidate_refs = std::move(cands);
  return {std::move(ex)};
}

// ---- context objectives ----

ContextExample make_context(const Corpus& c, StructObjective kind, std::size_t group,
                            const Span& a, const Span& b, PairLabel y,
                            ParagraphRef cw, Indices cs) {
  ContextExample ex;
  ex.a = c.span_text(a);
  ex.b = c.span_text(b);
  ex.context = join_sentences(c.paragraph(cw), cs);
  ex.label = y;
  ex.kind = kind;
  ex.group = group;
  ex.a_span = a;
  ex.b_span = b;
  ex.context_where = cw;
  ex.context_sentences = std::move(cs);
  return ex;
}

Indices all_sentences(const Paragraph& p) {
  Indices out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = i;
  return out;
}

// Positive (a, b) draws are repeated this often before an anchor whose
// draws leave no context is skipped.
constexpr int kContextAttempts = 16;

std::vector<ContextExample> sdc_group(const Corpus& c, const Material& mat,
                                      const GenOptions& opts, std::size_t anchor) {
  Rng rng = make_rng(opts.seed, "sdc", anchor);
  const ParagraphRef ref = anchor_ref(c, anchor);
  if (ref.para == 0) return {};
  const auto pos = disjoint_pair(c.paragraph(ref), ref, rng);
  if (!pos) return {};
  const auto& [a, b] = *pos;
  std::vector<ContextExample> out;
  auto emit = [&](const Span& bb, PairLabel y) {
    const ParagraphRef first{bb.where.doc, 0};
    out.push_back(make_context(c, StructObjective::kSDC, anchor, a, bb, y, first,
                               all_sentences(c.paragraph(first))));
  };
  emit(b, PairLabel::kPositive);
  for (const ParagraphRef& h :
       pick_distinct(rng, siblings(c, ref, not_first), opts.quota.hard)) {
    emit(sample_span(c.paragraph(h), h, right_length_distribution(), rng),
         PairLabel::kHardNegative);
  }
  while (out.size() < 1 + opts.quota.total()) {
    const ParagraphRef e = mat.non_first.sample_outside(rng, ref.doc);
    emit(sample_span(c.paragraph(e), e, right_length_distribution(), rng),
         PairLabel::kEasyNegative);
  }
  return out;
}

std::vector<ContextExample> dpc_group(const Corpus& c, const Material& mat,
                                      const GenOptions& opts, std::size_t anchor) {
  Rng rng = make_rng(opts.seed, "dpc", anchor);
  const ParagraphRef ref = anchor_ref(c, anchor);
  const Paragraph& p = c.paragraph(ref);
  Span a, b;
  Indices rest;
  for (int attempt = 0; attempt < kContextAttempts && rest.empty(); ++attempt) {
    const auto pos = disjoint_pair(p, ref, rng);
    if (!pos) return {};
    std::tie(a, b) = *pos;
    rest = remainder(p, {&a, &b});
  }
  if (rest.empty()) return {};
  std::vector<ContextExample> out;
  out.push_back(make_context(c, StructObjective::kDPC, anchor, a, b,
                             PairLabel::kPositive, ref, std::move(rest)));
  auto emit = [&](ParagraphRef r, PairLabel y) {
    const Paragraph& q = c.paragraph(r);
    const Span bb = proper_span(q, r, sample_right_length(rng), rng);
    out.push_back(make_context(c, StructObjective::kDPC, anchor, a, bb, y, r,
                               remainder(q, {&bb})));
  };
  for (const ParagraphRef& h :
       pick_distinct(rng, siblings(c, ref, multi_sentence), opts.quota.hard)) {
    emit(h, PairLabel::kHardNegative);
  }
  while (out.size() < 1 + opts.quota.total()) {
    emit(mat.multi.sample_outside(rng, ref.doc), PairLabel::kEasyNegative);
  }
  return out;
}

std::vector<ContextExample> dslc_group(const Corpus& c, const Material& mat,
                                       const GenOptions& opts, std::size_t anchor) {
  Rng rng = make_rng(opts.seed, "dslc", anchor);
  const ParagraphRef ref = anchor_ref(c, anchor);
  const Paragraph& p = c.paragraph(ref);
  Span a, b;
  Indices ctx;
  for (int attempt = 0; attempt < kContextAttempts && ctx.empty(); ++attempt) {
    const auto pos = disjoint_pair(p, ref, rng);
    if (!pos) return {};
    std::tie(a, b) = *pos;
    ctx = local_context(p, b, &a);
  }
  if (ctx.empty()) return {};
  std::vector<ContextExample> out;
  out.push_back(make_context(c, StructObjective::kDSLC, anchor, a, b,
                             PairLabel::kPositive, ref, std::move(ctx)));
  auto emit = [&](ParagraphRef r, PairLabel y) {
    const Paragraph& q = c.paragraph(r);
    const Span bb = proper_span(q, r, sample_right_length(rng), rng);
    out.push_back(make_context(c, StructObjective::kDSLC, anchor, a, bb, y, r,
                               local_context(q, bb, &a)));
  };
  for (const ParagraphRef& h :
       pick_distinct(rng, siblings(c, ref, multi_sentence), opts.quota.hard)) {
    emit(h, PairLabel::kHardNegative);
  }
  while (out.size() < 1 + opts.quota.total()) {
    emit(mat.multi.sample_outside(rng, ref.doc), PairLabel::kEasyNegative);
  }
  return out;
}

std::optional<SummaryExample> sds_example(const Corpus& c, const GenOptions& opts,
                                          std::size_t doc) {
  const Document& d = c.doc(doc);
  if (!sds_accepts(d, opts)) return std::nullopt;
  std::vector<std::string> rest;
  for (std::size_t l = 1; l < d.paragraphs.size(); ++l) rest.push_back(d.paragraphs[l].text());
  return SummaryExample{text::join(rest, "\n\n"), d.paragraphs[0].text(), doc};
}

template <typename Group>
auto run_groups(const Corpus& c, const GenOptions& opts, StructObjective o,
                std::size_t begin, std::size_t end, Group group) {
  opts.validate();
  end = std::min(end, anchor_count(o, c, opts));
  const Material mat(c);
  decltype(group(c, mat, opts, 0)) out;
  for (std::size_t a = begin; a < end; ++a) {
    auto g = group(c, mat, opts, a);
    std::move(g.begin(), g.end(), std::back_inserter(out));
  }
  return out;
}

}  // namespace

std::vector<PairExample> gen_ssp(const Corpus& c, const GenOptions& opts,
                                 std::size_t begin, std::size_t end) {
  require_documents(c, "ssp");
  return run_groups(c, opts, StructObjective::kSSP, begin, end, ssp_group);
}

std::vector<PairExample> gen_sp(const Corpus& c, const GenOptions& opts,
                                std::size_t begin, std::size_t end) {
  require_documents(c, "sp");
  return run_groups(c, opts, StructObjective::kSP, begin, end, sp_group);
}

std::vector<PairExample> gen_psd(const Corpus& c, const GenOptions& opts,
                                 std::size_t begin, std::size_t end) {
  require_documents(c, "psd");
  const bool any = std::any_of(c.documents().begin(), c.documents().end(),
                               [](const Document& d) { return d.paragraphs.size() >= 2; });
  if (!any) throw InsufficientMaterial("psd needs a document with two paragraphs");
  return run_groups(c, opts, StructObjective::kPSD, begin, end, psd_group);
}

std::vector<JointExample> gen_mspp(const Corpus& c, const GenOptions& opts,
                                   std::size_t begin, std::size_t end) {
  require_documents(c, "mspp");
  return run_groups(c, opts, StructObjective::kMSPP, begin, end, mspp_group);
}

std::vector<ContextExample> gen_sdc(const Corpus& c, const GenOptions& opts,
                                    std::size_t begin, std::size_t end) {
  require_documents(c, "sdc");
  return run_groups(c, opts, StructObjective::kSDC, begin, end, sdc_group);
}

std::vector<ContextExample> gen_dpc(const Corpus& c, const GenOptions& opts,
                                    std::size_t begin, std::size_t end) {
  require_documents(c, "dpc");
  return run_groups(c, opts, StructObjective::kDPC, begin, end, dpc_group);
}

std::vector<ContextExample> gen_dslc(const Corpus& c, const GenOptions& opts,
                                     std::size_t begin, std::size_t end) {
  require_documents(c, "dslc");
  return run_groups(c, opts, StructObjective::kDSLC, begin, end, dslc_group);
}

std::vector<SummaryExample> gen_sds(const Corpus& c, const GenOptions& opts,
                                    std::size_t begin, std::size_t end) {
  opts.validate();
  std::vector<SummaryExample> out;
  for (std::size_t d = begin; d < std::min(end, c.size()); ++d) {
    if (auto ex = sds_example(c, opts, d)) out.push_back(std::move(*ex));
  }
  return out;
}

std::vector<PairExample> gen_pairs(StructObjective o, const Corpus& c,
                                   const GenOptions& opts) {
  const std::size_t n = anchor_count(o, c, opts);
  switch (o) {
    case StructObjective::kSSP: return gen_ssp(c, opts, 0, n);
    case StructObjective::kSP: return gen_sp(c, opts, 0, n);
    case StructObjective::kPSD: return gen_psd(c, opts, 0, n);
    default: throw ConfigError(std::string(objective_name(o)) + " does not produce pairs");
  }
}

std::vector<ContextExample> gen_contexts(StructObjective o, const Corpus& c,
                                         const GenOptions& opts) {
  const std::size_t n = anchor_count(o, c, opts);
  switch (o) {
    case StructObjective::kSDC: return gen_sdc(c, opts, 0, n);
    case StructObjective::kDPC: return gen_dpc(c, opts, 0, n);
    case StructObjective::kDSLC: return gen_dslc(c, opts, 0, n);
    default:
      throw ConfigError(std::string(objective_name(o)) + " does not produce contexts");
  }
}

namespace {

template <typename T>
std::vector<std::string> lines(const std::vector<T>& xs) {
  std::vector<std::string> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(x.to_json());
  return out;
}

}  // namespace

std::vector<std::string> generate_records(StructObjective o, const Corpus& c,
                                          const GenOptions& opts,
                                          std::size_t begin, std::size_t end) {
  switch (o) {
    case StructObjective::kSSP: return lines(gen_ssp(c, opts, begin, end));
    case StructObjective::kSP: return lines(gen_sp(c, opts, begin, end));
    case StructObjective::kPSD: return lines(gen_psd(c, opts, begin, end));
    case StructObjective::kMSPP: return lines(gen_mspp(c, opts, begin, end));
    case StructObjective::kSDC: return lines(gen_sdc(c, opts, begin, end));
    case StructObjective::kDPC: return lines(gen_dpc(c, opts, begin, end));
    case StructObjective::kDSLC: return lines(gen_dslc(c, opts, begin, end));
    case StructObjective::kSDS: return lines(gen_sds(c, opts, begin, end));
  }
  return {};
}

std::vector<std::filesystem::path> write_shards(StructObjective o, const Corpus& c,
                                                const GenOptions& opts,
                                                std::size_t shards,
                                                const std::filesystem::path& out_dir,
                                                int jobs) {
  if (shards < 1) throw ConfigError("shard count must be at least 1");
  opts.validate();
  const std::size_t n = anchor_count(o, c, opts);
  std::vector<std::filesystem::path> paths(shards);
  std::vector<std::string> bodies(shards);
  std::vector<std::exception_ptr> errors(shards);
  auto work = [&](std::size_t s) {
    try {
      const std::size_t begin = n * s / shards;
      const std::size_t end = n * (s + 1) / shards;
      std::string body;
      for (const auto& line : generate_records(o, c, opts, begin, end)) {
        body += line;
        body += '\n';
      }
      bodies[s] = std::move(body);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, shards);
  if (workers == 1) {
    for (std::size_t s = 0; s < shards; ++s) work(s);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < shards; s += workers) work(s);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t s = 0; s < shards; ++s) {
    char name[64];
    std::snprintf(name, sizeof name, "%s-%05zu.jsonl", objective_name(o), s);
    paths[s] = out_dir / name;
    io::write_file(paths[s], bodies[s]);
  }
  return paths;
}

// ---- audits ----

namespace {

std::optional<PairLabel> relation(ParagraphRef x, ParagraphRef y) {
  if (x == y) return PairLabel::kPositive;
  if (x.doc == y.doc) return PairLabel::kHardNegative;
  return PairLabel::kEasyNegative;
}

bool valid_span(const Corpus& c, const Span& s) {
  if (s.where.doc >= c.size()) return false;
  if (s.where.para >= c.doc(s.where.doc).paragraphs.size()) return false;
  return s.start <= s.end && s.end < c.paragraph(s.where).size();
}

bool overlaps(const Span& x, const Span& y) {
  return x.where == y.where && x.start <= y.end && y.start <= x.end;
}

}  // namespace

std::optional<std::string> audit(const Corpus& c, const PairExample& ex) {
  if (!valid_span(c, ex.left_span) || !valid_span(c, ex.right_span)) {
    return "provenance out of bounds";
  }
  if (ex.left != c.span_text(ex.left_span)) return "left text does not match provenance";
  const Paragraph& rp = c.paragraph(ex.right_span.where);
  std::string expect_right;
  switch (ex.right_mode) {
    case RightMode::kSpan: expect_right = c.span_text(ex.right_span); break;
    case RightMode::kRemainder:
      expect_right = join_sentences(rp, remainder(rp, {&ex.right_span}));
      break;
    case RightMode::kParagraph:
      if (ex.right_span != full_span(c, ex.right_span.where)) return "right is not a paragraph";
      expect_right = rp.text();
      break;
  }
  if (ex.right != expect_right) return "right text does not match provenance";
  if (ex.left.empty() || ex.right.empty()) return "empty text";

  PairLabel derived = *relation(ex.left_span.where, ex.right_span.where);
  switch (ex.objective) {
    case StructObjective::kSSP:
      if (ex.right_mode != RightMode::kSpan) return "ssp right must be a span";
      if (derived == PairLabel::kPositive && overlaps(ex.left_span, ex.right_span)) {
        return "positive spans overlap";
      }
      break;
    case StructObjective::kSP:
      if (ex.right_mode != RightMode::kRemainder) return "sp right must be a remainder";
      if (derived == PairLabel::kPositive && ex.right_span != ex.left_span) {
        return "positive remainder does not remove the left span";
      }
      break;
    case StructObjective::kPSD:
      if (ex.right_mode != RightMode::kParagraph) return "psd right must be a paragraph";
      if (ex.left_span != full_span(c, ex.left_span.where)) return "psd left is not a paragraph";
      if (derived == PairLabel::kPositive) return "psd pairs a paragraph with itself";
      if (derived == PairLabel::kHardNegative) derived = PairLabel::kPositive;
      break;
    default: return "not a pair objective";
  }
  if (derived != ex.label) {
    return std::string("label ") + label_name(ex.label) + " but provenance implies " +
           label_name(derived);
  }
  return std::nullopt;
}

std::optional<std::string> audit(const Corpus& c, const JointExample& ex) {
  if (ex.candidates.size() != ex.labels.size() ||
      ex.candidates.size() != ex.candidate_refs.size()) {
    return "candidate, label and provenance counts differ";
  }
  auto text_of = [&](const SentenceRef& r) -> std::optional<std::string> {
    if (!valid_span(c, Span{r.where, r.sentence, r.sentence})) return std::nullopt;
    return c.paragraph(r.where).sentences[r.sentence];
  };
  if (text_of(ex.pivot_ref) != ex.pivot) return "pivot text does not match provenance";
  for (std::size_t i = 0; i < ex.candidates.size(); ++i) {
    const auto& r = ex.candidate_refs[i];
    if (r == ex.pivot_ref) return "pivot appears among candidates";
    if (text_of(r) != ex.candidates[i]) return "candidate text does not match provenance";
    const int y = r.where == ex.pivot_ref.where ? 1 : 0;
    if (y != ex.labels[i]) return "candidate " + std::to_string(i) + " label mismatch";
  }
  return std::nullopt;
}

std::optional<std::string> audit(const Corpus& c, const ContextExample& ex) {
  if (!valid_span(c, ex.a_span) || !valid_span(c, ex.b_span)) {
    return "provenance out of bounds";
  }
  if (ex.a != c.span_text(ex.a_span) || ex.b != c.span_text(ex.b_span)) {
    return "a/b text does not match provenance";
  }
  const Paragraph& bp = c.paragraph(ex.b_span.where);
  Indices expect;
  ParagraphRef where = ex.b_span.where;
  const bool same = ex.a_span.where == ex.b_span.where;
  if (same && overlaps(ex.a_span, ex.b_span)) return "a and b overlap";
  switch (ex.kind) {
    case StructObjective::kSDC:
      if (ex.a_span.where.para == 0 || ex.b_span.where.para == 0) {
        return "sdc drew a or b from a first paragraph";
      }
      where = ParagraphRef{ex.b_span.where.doc, 0};
      expect = all_sentences(c.paragraph(where));
      break;
    case StructObjective::kDPC:
      expect = same ? remainder(bp, {&ex.a_span, &ex.b_span}) : remainder(bp, {&ex.b_span});
      break;
    case StructObjective::kDSLC:
      expect = local_context(bp, ex.b_span, &ex.a_span);
      break;
    default: return "not a context objective";
  }
  if (ex.context_where != where || ex.context_sentences != expect) {
    return "context does not follow the construction rule";
  }
  if (expect.empty()) return "empty context";
  if (ex.context != join_sentences(c.paragraph(where), expect)) {
    return "context text does not match provenance";
  }
  const PairLabel derived = *relation(ex.a_span.where, ex.b_span.where);
  if (derived != ex.label) {
    return std::string("label ") + label_name(ex.label) + " but provenance implies " +
           label_name(derived);
  }
  return std::nullopt;
}

std::optional<std::string> audit(const Corpus& c, const SummaryExample& ex,
                                 const GenOptions& opts) {
  if (ex.doc >= c.size()) return "document out of range";
  const auto expect = sds_example(c, opts, ex.doc);
  if (!expect) return "document fails the summary filter";
  if (expect->source != ex.source || expect->target != ex.target) {
    return "texts do not match the document";
  }
  return std::nullopt;
}

}  // namespace objforge
