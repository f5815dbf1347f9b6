#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "objforge/corruption.hpp"
#include "objforge/error.hpp"
#include "objforge/generators.hpp"
#include "objforge/pipeline.hpp"
#include "objforge/tokenizer.hpp"

namespace py = pybind11;
using namespace objforge;

namespace {

// Holds a validated config plus the loaded vocabulary, corpus and clusters so
// repeated calls reuse them. Streams and seeds match the CLI.
class Session {
 public:
  Session(const std::string& config_text, std::optional<uint64_t> seed,
          const std::vector<std::string>& corpus, const std::string& vocab,
          const std::string& clusters) {
    cfg_ = config_text.empty() ? PipelineConfig{} : parse_config(config_text);
    if (seed) cfg_.seed = *seed;
    if (!corpus.empty()) cfg_.corpus.assign(corpus.begin(), corpus.end());
    if (!vocab.empty()) cfg_.vocab = vocab;
    if (!clusters.empty()) cfg_.clusters = clusters;
    validate_config(cfg_);
    if (!cfg_.vocab.empty()) vocab_ = Vocabulary::load(cfg_.vocab);
    if (!cfg_.clusters.empty()) clusters_ = ClusterMap::load(cfg_.clusters);
  }

  std::pair<std::vector<TokenId>, std::vector<bool>> encode_text(const std::string& text) {
    TokenSequence seq = encode(vocab(), text);
    return {std::move(seq.ids), std::move(seq.word_start)};
  }

  // Without boundary flags every token after the first starts a word.
  std::string decode_ids(const std::vector<TokenId>& ids,
                         std::optional<std::vector<bool>> word_start) {
    TokenSequence seq;
    seq.ids = ids;
    seq.word_start = word_start ? *word_start : std::vector<bool>(ids.size(), true);
    if (seq.word_start.size() != ids.size()) {
      throw ValidationError("word_start must have one flag per id");
    }
    return decode(vocab(), seq);
  }

  // Same record the CLI writes for the paragraph with index `counter`.
  std::string corrupt_ids(const std::string& objective, const std::vector<TokenId>& ids,
                          uint64_t counter) {
    const auto o = parse_token_objective(objective);
    if (!o) throw ValidationError("unknown objective '" + objective + "'");
    Rng rng = make_rng(cfg_.seed, std::string("corrupt/") + objective_name(*o), counter);
    switch (*o) {
      case TokenObjective::kMLM: return mlm_corrupt(ids, cfg_.task.rate, rng, vocab()).to_json();
      case TokenObjective::kRTS: return rts_corrupt(ids, cfg_.task.rate, rng, vocab()).to_json();
      case TokenObjective::kSLM: return slm_corrupt(ids, cfg_.task.rate, rng, vocab()).to_json();
      case TokenObjective::kCRTS: {
        if (!clusters_) throw ValidationError("crts needs a cluster map");
        const FMatrix f(clusters_->n());
        return crts_corrupt(ids, CrtsConfig{cfg_.task.gamma, cfg_.task.rate}, *clusters_, f, rng,
                            vocab())
            .to_json();
      }
    }
    return {};
  }

  std::vector<std::string> generate(const std::string& objective, std::size_t begin,
                                    std::optional<std::size_t> end) {
    const auto o = parse_struct_objective(objective);
    if (!o) throw ValidationError("unknown objective '" + objective + "'");
    const Corpus& c = corpus();
    const std::size_t n = anchor_count(*o, c, cfg_.task.gen);
    return generate_records(*o, c, cfg_.task.gen, std::min(begin, n), std::min(end.value_or(n), n));
  }

  void close() {
    vocab_.reset();
    corpus_.reset();
    clusters_.reset();
    closed_ = true;
  }

 private:
  void check_open() const {
    if (closed_) throw ValidationError("session is closed");
  }
  const Vocabulary& vocab() {
    check_open();
    if (!vocab_) throw ValidationError("session has no vocabulary");
    return *vocab_;
  }
  const Corpus& corpus() {
    check_open();
    if (!corpus_) {
      if (cfg_.corpus.empty()) throw ValidationError("session has no corpus");
      corpus_ = load_corpus(cfg_.corpus);
    }
    return *corpus_;
  }

  PipelineConfig cfg_;
  std::optional<Vocabulary> vocab_;
  std::optional<Corpus> corpus_;
  std::optional<ClusterMap> clusters_;
  bool closed_ = false;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "objforge native module";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());

  py::class_<Session>(m, "Session")
      .def("encode", &Session::encode_text, py::arg("text"))
      .def("decode", &Session::decode_ids, py::arg("ids"), py::arg("word_start") = py::none())
      .def("corrupt", &Session::corrupt_ids, py::arg("objective"), py::arg("ids"),
           py::arg("counter") = 0)
      .def("generate", &Session::generate, py::arg("objective"), py::arg("begin") = 0,
           py::arg("end") = py::none())
      .def("close", &Session::close);

  m.def(
      "open_session",
      [](const std::string& config_text, std::optional<uint64_t> seed,
         const std::vector<std::string>& corpus, const std::string& vocab,
         const std::string& clusters) {
        return std::make_unique<Session>(config_text, seed, corpus, vocab, clusters);
      },
      py::arg("config") = "", py::arg("seed") = py::none(),
      py::arg("corpus") = std::vector<std::string>{}, py::arg("vocab") = "",
      py::arg("clusters") = "");
}
