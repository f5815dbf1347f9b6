#include "objforge/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "objforge/error.hpp"
#include "objforge/io.hpp"
#include "objforge/text.hpp"

namespace objforge {

using nlohmann::json;

std::string Paragraph::text() const { return text::join(sentences, " "); }

Corpus::Corpus(std::vector<Document> documents) : docs_(std::move(documents)) {
  if (docs_.empty()) throw EmptyCorpusError();
  std::unordered_set<std::string> ids;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    const Document& doc = docs_[d];
    if (!ids.insert(doc.id).second) {
      throw ValidationError("duplicate document id: " + doc.id);
    }
    if (doc.paragraphs.empty()) {
      throw ValidationError("document without paragraphs: " + doc.id);
    }
    for (std::size_t p = 0; p < doc.paragraphs.size(); ++p) {
      if (doc.paragraphs[p].sentences.empty()) {
        throw ValidationError("empty paragraph in document " + doc.id);
      }
      for (const auto& s : doc.paragraphs[p].sentences) {
        if (text::normalize_whitespace(s).empty()) {
          throw ValidationError("empty sentence in document " + doc.id);
        }
      }
      flat_.push_back({d, p});
    }
  }
}

std::string Corpus::span_text(const Span& s) const {
  const Paragraph& p = paragraph(s.where);
  if (s.start > s.end || s.end >= p.size()) {
    throw RangeError("span out of paragraph bounds");
  }
  std::vector<std::string> parts(p.sentences.begin() + s.start,
                                 p.sentences.begin() + s.end + 1);
  return text::join(parts, " ");
}

std::vector<std::string> SegmentationConfig::default_abbreviations() {
  return {"Dr.",   "Mr.",  "Mrs.", "Ms.",  "Prof.", "St.",  "Jr.",
          "Sr.",   "vs.",  "etc.", "e.g.", "i.e.",  "Inc.", "Ltd.",
          "Co.",   "Corp.", "Mt.", "No.",  "Fig.",  "Gen.", "Gov.",
          "Sen.",  "Rep.", "Col.", "Lt.",  "Capt.", "Sgt.", "Jan.",
          "Feb.",  "Mar.", "Apr.", "Jun.", "Jul.",  "Aug.", "Sep.",
          "Sept.", "Oct.", "Nov.", "Dec.", "U.S.",  "U.K.", "approx."};
}

std::vector<std::string> SegmentationConfig::load_abbreviations(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open abbreviation list: " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = text::normalize_whitespace(line);
    if (t.empty() || t[0] == '#') continue;
    out.push_back(t);
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view paragraph,
                                         const SegmentationConfig& cfg) {
  const std::vector<std::string> words = text::split_whitespace(paragraph);
  std::vector<std::string> out;
  std::vector<std::string> current;
  for (std::size_t i = 0; i < words.size(); ++i) {
    current.push_back(words[i]);
    const std::string& w = words[i];
    const char last = w.back();
    const bool terminator = last == '.' || last == '!' || last == '?';
    if (!terminator || i + 1 == words.size()) continue;
    if (!text::starts_with_uppercase(words[i + 1])) continue;
    if (std::find(cfg.abbreviations.begin(), cfg.abbreviations.end(), w) !=
        cfg.abbreviations.end()) {
      continue;
    }
    out.push_back(text::join(current, " "));
    current.clear();
  }
  if (!current.empty()) out.push_back(text::join(current, " "));
  return out;
}

std::vector<Document> segment_text(std::string_view raw,
                                   const SegmentationConfig& cfg,
                                   std::string_view id_prefix) {
  text::validate_utf8(raw);
  const std::string normalized = text::nfc(raw);

  std::vector<Document> docs;
  Document doc;
  std::string para_buf;

  auto flush_paragraph = [&] {
    const std::string t = text::normalize_whitespace(para_buf);
    para_buf.clear();
    if (t.empty()) return;
    doc.paragraphs.push_back(Paragraph{split_sentences(t, cfg)});
  };
  auto flush_document = [&] {
    flush_paragraph();
    if (doc.paragraphs.empty()) return;
    doc.id = std::string(id_prefix) + "-" + std::to_string(docs.size());
    docs.push_back(std::move(doc));
    doc = Document{};
  };

  std::istringstream lines(normalized);
  std::string line;
  while (std::getline(lines, line)) {
    const std::string trimmed = text::normalize_whitespace(line);
    if (trimmed == cfg.doc_delimiter) {
      flush_document();
    } else if (trimmed.empty()) {
      flush_paragraph();
    } else {
      para_buf.append(line);
      para_buf.push_back(' ');
    }
  }
  flush_document();
  return docs;
}

Corpus ingest_text(std::string_view raw, const SegmentationConfig& cfg) {
  auto docs = segment_text(raw, cfg, cfg.id_prefix);
  if (docs.empty()) throw EmptyCorpusError();
  return Corpus(std::move(docs));
}

Corpus ingest_files(const std::vector<std::filesystem::path>& paths,
                    const SegmentationConfig& cfg) {
  std::vector<Document> all;
  for (std::size_t f = 0; f < paths.size(); ++f) {
    const std::string prefix =
        paths[f].stem().string() + "#" + std::to_string(f);
    for (auto& d : segment_text(io::read_file(paths[f]), cfg, prefix)) {
      all.push_back(std::move(d));
    }
  }
  if (all.empty()) throw EmptyCorpusError();
  return Corpus(std::move(all));
}

Corpus read_corpus_jsonl(std::istream& in) {
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::normalize_whitespace(line).empty()) continue;
    text::validate_utf8(line);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError("corpus line " + std::to_string(lineno) + ": " +
                            e.what());
    }
    if (!j.contains("id") || !j["id"].is_string()) {
      throw ValidationError("corpus line " + std::to_string(lineno) +
                            ": field \"id\" must be a string");
    }
    if (!j.contains("paragraphs") || !j["paragraphs"].is_array()) {
      throw ValidationError("corpus line " + std::to_string(lineno) +
                            ": field \"paragraphs\" must be an array");
    }
    Document d;
    d.id = j["id"].get<std::string>();
    for (const auto& p : j["paragraphs"]) {
      if (!p.is_array()) {
        throw ValidationError("corpus line " + std::to_string(lineno) +
                              ": field \"paragraphs\" must hold arrays");
      }
      Paragraph para;
      for (const auto& s : p) {
        if (!s.is_string()) {
          throw ValidationError("corpus line " + std::to_string(lineno) +
                                ": sentences must be strings");
        }
        para.sentences.push_back(
            text::normalize_whitespace(text::nfc(s.get<std::string>())));
      }
      d.paragraphs.push_back(std::move(para));
    }
    docs.push_back(std::move(d));
  }
  if (docs.empty()) throw EmptyCorpusError();
  return Corpus(std::move(docs));
}

Corpus read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus: " + path.string());
  return read_corpus_jsonl(in);
}

void write_corpus_jsonl(const Corpus& c, std::ostream& out) {
  for (const auto& d : c.documents()) {
    json paras = json::array();
    for (const auto& p : d.paragraphs) paras.push_back(p.sentences);
    out << json{{"id", d.id}, {"paragraphs", paras}}.dump() << '\n';
  }
}

Corpus load_corpus(const std::vector<std::filesystem::path>& paths,
                   const SegmentationConfig& cfg) {
  if (paths.empty()) throw ValidationError("no corpus input given");
  bool all_jsonl = true;
  bool any_jsonl = false;
  for (const auto& p : paths) {
    const bool j = p.extension() == ".jsonl";
    all_jsonl = all_jsonl && j;
    any_jsonl = any_jsonl || j;
  }
  if (any_jsonl && !all_jsonl) {
    throw ValidationError("cannot mix .jsonl corpora with raw text inputs");
  }
  if (!all_jsonl) return ingest_files(paths, cfg);
  std::vector<Document> docs;
  for (const auto& p : paths) {
    Corpus c = read_corpus_jsonl(p);
    for (const auto& d : c.documents()) docs.push_back(d);
  }
  return Corpus(std::move(docs));
}

CorpusStats corpus_stats(const Corpus& c) {
  if (c.empty()) throw EmptyCorpusError();
  CorpusStats s;
  s.n_docs = c.size();
  for (const auto& d : c.documents()) {
    s.n_paragraphs += d.paragraphs.size();
    for (const auto& p : d.paragraphs) {
      s.n_sentences += p.sentences.size();
      for (const auto& sent : p.sentences) {
        s.n_words += text::split_whitespace(sent).size();
      }
    }
  }
  s.words_per_doc = static_cast<double>(s.n_words) / s.n_docs;
  s.paras_per_doc = static_cast<double>(s.n_paragraphs) / s.n_docs;
  s.sents_per_para = static_cast<double>(s.n_sentences) / s.n_paragraphs;
  return s;
}

std::size_t LengthDistribution::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(rng) + 1;
}

Span place_span(const Paragraph& p, ParagraphRef where, std::size_t length,
                Rng& rng, const std::set<std::size_t>& exclude) {
  // Maximal runs of usable sentences.
  std::vector<std::pair<std::size_t, std::size_t>> runs;  // [begin, end)
  std::size_t i = 0;
  while (i < p.size()) {
    while (i < p.size() && exclude.count(i)) ++i;
    std::size_t j = i;
    while (j < p.size() && !exclude.count(j)) ++j;
    if (j > i) runs.emplace_back(i, j);
    i = j;
  }
  if (runs.empty()) {
    throw InsufficientMaterial("no usable sentence left in paragraph");
  }
  std::size_t longest = 0;
  for (auto [b, e] : runs) longest = std::max(longest, e - b);
  const std::size_t len = std::clamp<std::size_t>(length, 1, longest);

  std::vector<std::size_t> starts;
  for (auto [b, e] : runs) {
    for (std::size_t s = b; s + len <= e; ++s) starts.push_back(s);
  }
  const std::size_t start = starts[uniform_index(rng, starts.size())];
  return Span{where, start, start + len - 1};
}

Span sample_span(const Paragraph& p, ParagraphRef where,
                 const LengthDistribution& len_dist, Rng& rng,
                 const std::set<std::size_t>& exclude) {
  if (exclude.size() >= p.size()) {
    bool any = false;
    for (std::size_t i = 0; i < p.size() && !any; ++i) any = !exclude.count(i);
    if (!any) throw InsufficientMaterial("no usable sentence left in paragraph");
  }
  return place_span(p, where, len_dist.sample(rng), rng, exclude);
}

namespace {

const char* const kOnsets[] = {"b", "d", "f", "g", "k", "l", "m",
                               "n", "p", "r", "s", "t", "v", "z"};
const char* const kVowels[] = {"a", "e", "i", "o", "u"};

std::string pseudo_word(Rng& rng, std::size_t syllables) {
  std::string w;
  for (std::size_t s = 0; s < syllables; ++s) {
    w += kOnsets[uniform_index(rng, std::size(kOnsets))];
    w += kVowels[uniform_index(rng, std::size(kVowels))];
  }
  return w;
}

std::vector<std::string> distinct_words(Rng& rng, std::size_t n,
                                        std::size_t syllables,
                                        std::unordered_set<std::string>& used) {
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w = pseudo_word(rng, syllables);
    if (used.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::string capitalize(std::string w) {
  if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

}  // namespace

Corpus synthetic_corpus(std::size_t n_docs, std::size_t paras_per_doc,
                        std::size_t sents_per_para, uint64_t seed) {
  if (n_docs == 0 || paras_per_doc == 0 || sents_per_para == 0) {
    throw ConfigError("synthetic corpus dimensions must be positive");
  }
  Rng rng = make_rng(seed, "synthetic-corpus");
  std::unordered_set<std::string> used;
  const std::vector<std::string> fillers = distinct_words(rng, 12, 1, used);
  std::vector<Document> docs;
  for (std::size_t d = 0; d < n_docs; ++d) {
    Document doc;
    doc.id = "syn-" + std::to_string(d);
    const std::string topic = distinct_words(rng, 1, 3, used)[0];
    for (std::size_t p = 0; p < paras_per_doc; ++p) {
      const std::string sub = distinct_words(rng, 1, 2, used)[0];
      Paragraph para;
      for (std::size_t s = 0; s < sents_per_para; ++s) {
        std::vector<std::string> words;
        words.push_back(capitalize(fillers[uniform_index(rng, fillers.size())]));
        words.push_back(topic);
        words.push_back(fillers[uniform_index(rng, fillers.size())]);
        words.push_back(sub);
        words.push_back(fillers[uniform_index(rng, fillers.size())] + ".");
        para.sentences.push_back(text::join(words, " "));
      }
      doc.paragraphs.push_back(std::move(para));
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs));
}

}  // namespace objforge
