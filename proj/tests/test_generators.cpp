#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "objforge/error.hpp"
#include "objforge/generators.hpp"
#include "support.hpp"

using namespace objforge;
using objforge::testing::make_doc;

namespace {

std::vector<std::string> sentences(const std::string& tag, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(tag + " sentence " + std::to_string(i) + ".");
  return out;
}

std::size_t count_label(const std::vector<PairExample>& xs, std::size_t group, PairLabel y) {
  return static_cast<std::size_t>(std::count_if(xs.begin(), xs.end(), [&](const auto& x) {
    return x.group == group && x.label == y;
  }));
}

}  // namespace

TEST_CASE("length distributions") {
  const auto& l = left_length_distribution().weights;
  const auto& r = right_length_distribution().weights;
  CHECK(l == std::vector<double>{0.7, 0.2, 0.1});
  CHECK(r == std::vector<double>{0.14, 0.24, 0.24, 0.24, 0.14});
  CHECK(std::accumulate(r.begin(), r.end(), 0.0) == doctest::Approx(1.0));
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto a = sample_left_length(rng);
    const auto b = sample_right_length(rng);
    CHECK((a >= 1 && a <= 3));
    CHECK((b >= 1 && b <= 5));
  }
}

TEST_CASE("single-paragraph documents get only easy negatives") {
  const Corpus c({make_doc("a", {sentences("a", 6)}), make_doc("b", {sentences("b", 6)}),
                  make_doc("c", {sentences("c", 6)})});
  GenOptions o;
  o.seed = 3;
  const auto xs = gen_ssp(c, o, 0, 3);
  for (std::size_t g = 0; g < 3; ++g) {
    CHECK(count_label(xs, g, PairLabel::kPositive) == 1);
    CHECK(count_label(xs, g, PairLabel::kHardNegative) == 0);
    CHECK(count_label(xs, g, PairLabel::kEasyNegative) == 4);
  }
  for (const auto& x : xs) CHECK_FALSE(audit(c, x));
}

TEST_CASE("one document is not enough") {
  const Corpus c({make_doc("a", {sentences("a", 6), sentences("b", 6)})});
  GenOptions o;
  CHECK_THROWS_AS(gen_ssp(c, o, 0, 2), InsufficientMaterial);
  CHECK_THROWS_AS(gen_mspp(c, o, 0, 2), InsufficientMaterial);
}

TEST_CASE("ssp positives are disjoint and same paragraph") {
  const Corpus c = synthetic_corpus(3, 3, 6, 4);
  GenOptions o;
  o.seed = 8;
  const auto xs = gen_ssp(c, o, 0, anchor_count(StructObjective::kSSP, c, o));
  CHECK(xs.size() == 9 * 5);
  for (const auto& x : xs) {
    CHECK_FALSE(audit(c, x));
    if (x.label == PairLabel::kPositive) {
      CHECK(x.left_span.where == x.right_span.where);
      CHECK((x.left_span.end < x.right_span.start || x.right_span.end < x.left_span.start));
    }
    if (x.label == PairLabel::kHardNegative) {
      CHECK(x.left_span.where.doc == x.right_span.where.doc);
      CHECK(x.left_span.where.para != x.right_span.where.para);
    }
  }
}

TEST_CASE("sp positive partitions the paragraph") {
  const Corpus c = synthetic_corpus(3, 3, 6, 4);
  GenOptions o;
  for (const auto& x : gen_sp(c, o, 0, 9)) {
    CHECK_FALSE(audit(c, x));
    CHECK(x.right_mode == RightMode::kRemainder);
    if (x.label != PairLabel::kPositive) continue;
    const Paragraph& p = c.paragraph(x.left_span.where);
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!x.left_span.contains(i)) rest.push_back(p.sentences[i]);
    }
    CHECK(x.right == Paragraph{rest}.text());
  }
}

TEST_CASE("psd negatives cross documents") {
  const Corpus c = synthetic_corpus(4, 3, 4, 1);
  GenOptions o;
  for (const auto& x : gen_psd(c, o, 0, 12)) {
    CHECK_FALSE(audit(c, x));
    const bool same_doc = x.left_span.where.doc == x.right_span.where.doc;
    CHECK(same_doc == (x.label == PairLabel::kPositive));
    if (x.label != PairLabel::kPositive) CHECK(x.label == PairLabel::kEasyNegative);
  }
}

TEST_CASE("mspp backfills a short paragraph from other documents") {
  // Pivot paragraph has two sentences and its document only one paragraph:
  // one same-paragraph candidate, no same-document ones, four backfilled.
  const Corpus c({make_doc("a", {sentences("a", 2)}), make_doc("b", {sentences("b", 5)}),
                  make_doc("c", {sentences("c", 5)})});
  GenOptions o;
  o.seed = 2;
  const auto xs = gen_mspp(c, o, 0, 1);
  REQUIRE(xs.size() == 1);
  const auto& x = xs[0];
  CHECK(x.labels.size() == 5);
  CHECK(std::accumulate(x.labels.begin(), x.labels.end(), 0) == 1);
  std::size_t other = 0;
  for (const auto& r : x.candidate_refs) other += r.where.doc != 0;
  CHECK(other == 4);
  CHECK_FALSE(audit(c, x));
}

TEST_CASE("dslc context is the neighbours of b") {
  const Corpus c = synthetic_corpus(3, 2, 5, 6);
  GenOptions o;
  o.seed = 4;
  for (const auto& x : gen_dslc(c, o, 0, 6)) {
    CHECK_FALSE(audit(c, x));
    CHECK_FALSE(x.context_sentences.empty());
    for (std::size_t s : x.context_sentences) {
      CHECK((s + 1 == x.b_span.start || s == x.b_span.end + 1));
      if (x.context_where == x.a_span.where) CHECK_FALSE(x.a_span.contains(s));
    }
  }
}

TEST_CASE("sds filter") {
  GenOptions o;
  const std::string long_sentence(80, 'x');
  CHECK_FALSE(sds_accepts(make_doc("a", {{"One sentence."}}), o));
  CHECK_FALSE(sds_accepts(make_doc("a", {{long_sentence + "."}, {"b."}}), o));
  CHECK_FALSE(sds_accepts(make_doc("a", {{"Short one.", "Tiny two."}, {"b."}}), o));
  CHECK(sds_accepts(make_doc("a", {{"This first sentence is long.", "And so is the second."},
                                   {"b."}}),
                    o));
}

TEST_CASE("records do not depend on how anchors are split") {
  const Corpus c = synthetic_corpus(5, 3, 6, 2);
  GenOptions o;
  o.seed = 7;
  o.passes = 2;
  for (auto obj : {StructObjective::kSSP, StructObjective::kMSPP, StructObjective::kDPC,
                   StructObjective::kSDS}) {
    const std::size_t n = anchor_count(obj, c, o);
    const auto all = generate_records(obj, c, o, 0, n);
    auto left = generate_records(obj, c, o, 0, n / 3);
    const auto right = generate_records(obj, c, o, n / 3, n);
    left.insert(left.end(), right.begin(), right.end());
    CHECK(left == all);
  }
}
