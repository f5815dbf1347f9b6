#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "objforge/random.hpp"

namespace objforge {

struct Paragraph {
  std::vector<std::string> sentences;

  std::size_t size() const { return sentences.size(); }
  // Sentences joined with single spaces.
  std::string text() const;
};

struct Document {
  std::string id;
  std::vector<Paragraph> paragraphs;
};

// Location of a paragraph inside a corpus.
struct ParagraphRef {
  std::size_t doc = 0;
  std::size_t para = 0;

  friend bool operator==(const ParagraphRef&, const ParagraphRef&) = default;
};

// Contiguous run of sentences [start, end] (inclusive) within one paragraph.
struct Span {
  ParagraphRef where;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  bool contains(std::size_t sentence) const {
    return sentence >= start && sentence <= end;
  }
  friend bool operator==(const Span&, const Span&) = default;
};

struct CorpusStats {
  std::size_t n_docs = 0;
  std::size_t n_paragraphs = 0;
  std::size_t n_sentences = 0;
  std::size_t n_words = 0;
  double words_per_doc = 0.0;
  double paras_per_doc = 0.0;
  double sents_per_para = 0.0;
};

class Corpus {
 public:
  Corpus() = default;
  // Throws EmptyCorpusError if `documents` is empty and ValidationError on
  // duplicate ids or empty documents/paragraphs/sentences.
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const { return docs_; }
  const Document& doc(std::size_t i) const { return docs_.at(i); }
  const Paragraph& paragraph(ParagraphRef r) const {
    return docs_.at(r.doc).paragraphs.at(r.para);
  }
  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }

  // Paragraphs in document order, flattened. Generators enumerate anchors
  // over this list.
  const std::vector<ParagraphRef>& paragraph_index() const { return flat_; }

  std::string span_text(const Span& s) const;

 private:
  std::vector<Document> docs_;
  std::vector<ParagraphRef> flat_;
};

struct SegmentationConfig {
  std::string doc_delimiter = "---DOC---";
  // Tokens ending in a terminator that must not end a sentence.
  std::vector<std::string> abbreviations = default_abbreviations();
  std::string id_prefix = "doc";

  static std::vector<std::string> default_abbreviations();
  static std::vector<std::string> load_abbreviations(
      const std::filesystem::path& path);
};

std::vector<std::string> split_sentences(std::string_view paragraph,
                                         const SegmentationConfig& cfg = {});

// Raw text to documents. Documents are separated by `cfg.doc_delimiter`
// lines, paragraphs by blank lines. Returns documents without wrapping them
// in a Corpus so callers can ingest several files.
std::vector<Document> segment_text(std::string_view raw,
                                   const SegmentationConfig& cfg,
                                   std::string_view id_prefix);

Corpus ingest_text(std::string_view raw, const SegmentationConfig& cfg = {});

// One document per file unless a file itself contains delimiter lines.
Corpus ingest_files(const std::vector<std::filesystem::path>& paths,
                    const SegmentationConfig& cfg = {});

// Canonical corpus JSONL: {"id": ..., "paragraphs": [[sentence, ...], ...]}.
Corpus read_corpus_jsonl(std::istream& in);
Corpus read_corpus_jsonl(const std::filesystem::path& path);
void write_corpus_jsonl(const Corpus& c, std::ostream& out);

// Loads .jsonl files as canonical corpora and everything else as raw text.
Corpus load_corpus(const std::vector<std::filesystem::path>& paths,
                   const SegmentationConfig& cfg = {});

CorpusStats corpus_stats(const Corpus& c);

// Discrete distribution over span lengths 1..weights.size().
struct LengthDistribution {
  std::vector<double> weights;

  std::size_t sample(Rng& rng) const;
  std::size_t max_length() const { return weights.size(); }
};

// Places a span of (at most) `length` sentences uniformly among the
// positions that avoid `exclude`. The length is truncated to the longest
// contiguous run of usable sentences. Throws InsufficientMaterial when no
// sentence is usable.
Span place_span(const Paragraph& p, ParagraphRef where, std::size_t length,
                Rng& rng, const std::set<std::size_t>& exclude = {});

Span sample_span(const Paragraph& p, ParagraphRef where,
                 const LengthDistribution& len_dist, Rng& rng,
                 const std::set<std::size_t>& exclude = {});

// Synthetic corpus with per-document topic words and per-paragraph
// sub-topic words; sentence structure is identical across documents so
// only the lexical overlap carries the structural signal.
Corpus synthetic_corpus(std::size_t n_docs, std::size_t paras_per_doc,
                        std::size_t sents_per_para, uint64_t seed);

}  // namespace objforge
