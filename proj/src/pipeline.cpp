#include "objforge/pipeline.hpp"

#include <cstdlib>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "objforge/error.hpp"
#include "objforge/io.hpp"
#include "objforge/random.hpp"

namespace objforge {

using nlohmann::json;

namespace {

json toml_to_json(const toml::node& n) {
  if (auto t = n.as_table()) {
    json j = json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (auto a = n.as_array()) {
    json j = json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (auto s = n.as_string()) return s->get();
  if (auto i = n.as_integer()) return i->get();
  if (auto f = n.as_floating_point()) return f->get();
  if (auto b = n.as_boolean()) return b->get();
  throw ConfigError("unsupported TOML value type");
}

class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("field '" + name_ + "' must be a table");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  std::string path(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  template <typename T>
  void uint(const char* key, T& out) {
    if (!has(key)) return;
    const json& v = j_[key];
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError("field '" + path(key) + "' must be a non-negative integer");
    }
    out = static_cast<T>(v.get<unsigned long long>());
  }

  void integer(const char* key, int& out) {
    if (!has(key)) return;
    if (!j_[key].is_number_integer()) {
      throw ConfigError("field '" + path(key) + "' must be an integer");
    }
    out = j_[key].get<int>();
  }

  void real(const char* key, double& out) {
    if (!has(key)) return;
    if (!j_[key].is_number()) throw ConfigError("field '" + path(key) + "' must be a number");
    out = j_[key].get<double>();
  }

  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    if (!j_[key].is_boolean()) throw ConfigError("field '" + path(key) + "' must be a boolean");
    out = j_[key].get<bool>();
  }

  bool string(const char* key, std::string& out) {
    if (!has(key)) return false;
    if (!j_[key].is_string()) throw ConfigError("field '" + path(key) + "' must be a string");
    out = j_[key].get<std::string>();
    return true;
  }

  std::vector<std::string> strings(const char* key) {
    std::vector<std::string> out;
    if (!has(key)) return out;
    const json& v = j_[key];
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) throw ConfigError("field '" + path(key) + "' must be a string list");
    for (const auto& e : v) {
      if (!e.is_string()) throw ConfigError("field '" + path(key) + "' must be a string list");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  const json& sub(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) {
        throw ConfigError("unknown field '" + (name_.empty() ? k : name_ + "." + k) + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

PipelineConfig from_json(const json& root) {
  PipelineConfig cfg;
  Section top(root, "");
  top.uint("seed", cfg.seed);
  top.uint("jobs", cfg.jobs);

  if (top.has("paths")) {
    Section s(top.sub("paths"), "paths");
    for (const auto& p : s.strings("corpus")) cfg.corpus.emplace_back(p);
    std::string str;
    if (s.string("vocab", str)) cfg.vocab = str;
    if (s.string("clusters", str)) cfg.clusters = str;
    if (s.string("abbreviations", str)) cfg.abbreviations = str;
    if (s.string("out_dir", str)) cfg.out_dir = str;
    s.finish();
  }

  if (top.has("tokenizer")) {
    Section s(top.sub("tokenizer"), "tokenizer");
    std::string kind;
    if (s.string("algorithm", kind)) {
      if (kind == "bpe") {
        cfg.tokenizer.kind = TokenizerKind::kBPE;
      } else if (kind == "wordpiece") {
        cfg.tokenizer.kind = TokenizerKind::kWordPiece;
      } else if (kind == "unigram") {
        cfg.tokenizer.kind = TokenizerKind::kUnigram;
      } else {
        throw ConfigError("field 'tokenizer.algorithm' must be bpe, wordpiece or unigram");
      }
    }
    s.uint("k", cfg.tokenizer.k);
    std::string mode;
    if (s.string("mode", mode)) {
      if (mode == "word") {
        cfg.tokenizer.mode = TokenizerMode::kWordBoundary;
      } else if (mode == "whitespace") {
        cfg.tokenizer.mode = TokenizerMode::kWhitespaceSymbol;
      } else {
        throw ConfigError("field 'tokenizer.mode' must be word or whitespace");
      }
    }
    s.finish();
  }

  if (top.has("objectives")) {
    Section s(top.sub("objectives"), "objectives");
    TaskOptions& t = cfg.task;
    s.real("rate", t.rate);
    s.real("gamma", t.gamma);
    s.uint("hard_negatives", t.gen.quota.hard);
    s.uint("easy_negatives", t.gen.quota.easy);
    s.uint("mspp_same_paragraph", t.gen.mspp.same_paragraph);
    s.uint("mspp_same_document", t.gen.mspp.same_document);
    s.uint("mspp_other_document", t.gen.mspp.other_document);
    s.uint("passes", t.gen.passes);
    s.uint("sds_min_sentences", t.gen.sds_min_sentences);
    s.uint("sds_min_chars", t.gen.sds_min_chars);
    s.uint("token_seq_len", t.token_seq_len);
    s.uint("pair_max_len", t.pair_max_len);
    s.uint("sds_max_len", t.sds_max_len);
    s.uint("train_passes", t.generator_passes);
    s.uint("n_clusters", t.n_clusters);
    std::string head;
    if (s.string("mspp_head", head)) {
      bool found = false;
      for (auto h : {Head::kIE1, Head::kAE1, Head::kIEk, Head::kAEk, Head::kREk}) {
        if (head == head_name(h)) {
          t.mspp_head = h;
          found = true;
        }
      }
      if (!found) throw ConfigError("field 'objectives.mspp_head' names no jointwise head");
    }
    for (const auto& w : s.strings("weights")) {
      try {
        cfg.objectives.push_back(parse_weighted_objective(w));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("field 'objectives.weights': ") + e.what());
      }
    }
    s.finish();
  }

  if (top.has("model")) {
    Section s(top.sub("model"), "model");
    ModelConfig& m = cfg.model;
    s.uint("d", m.d);
    s.uint("n_layers", m.n_layers);
    s.uint("n_heads", m.n_heads);
    s.uint("f", m.f);
    s.uint("max_len", m.max_len);
    s.uint("vocab_size", m.vocab_size);
    s.uint("n_seq_ids", m.n_seq_ids);
    s.uint("k", m.k);
    s.uint("slot_len", m.slot_len);
    s.boolean("tied_lm", m.tied_lm);
    s.real("init_std", m.init_std);
    s.boolean("sinusoidal_init", m.sinusoidal_init);
    std::string act;
    if (s.string("activation", act)) {
      if (act == "relu") {
        m.activation = Activation::kRelu;
      } else if (act == "gelu") {
        m.activation = Activation::kGelu;
      } else {
        throw ConfigError("field 'model.activation' must be relu or gelu");
      }
    }
    s.finish();
  }

  if (top.has("train")) {
    Section s(top.sub("train"), "train");
    TrainConfig& t = cfg.train;
    s.real("lr", t.lr_peak);
    s.integer("warmup_steps", t.warmup_steps);
    s.integer("steps", t.total_steps);
    s.real("beta1", t.beta1);
    s.real("beta2", t.beta2);
    s.real("eps", t.eps);
    s.real("weight_decay", t.weight_decay);
    s.integer("batch_size", t.batch_size);
    std::string opt;
    if (s.string("optimizer", opt)) {
      if (opt == "adamw") {
        t.optimizer = OptimizerKind::kAdamW;
      } else if (opt == "sgd") {
        t.optimizer = OptimizerKind::kSGD;
      } else {
        throw ConfigError("field 'train.optimizer' must be adamw or sgd");
      }
    }
    s.finish();
  }
  top.finish();
  return cfg;
}

}  // namespace

PipelineConfig parse_config_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is neither TOML nor JSON: ") + e.what());
  }
  return from_json(j);
}

PipelineConfig parse_config_toml(std::string_view text) {
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config TOML: " << e.description() << " at line " << e.source().begin.line;
    throw ConfigError(msg.str());
  }
  return from_json(toml_to_json(t));
}

PipelineConfig parse_config(std::string_view text) {
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error&) {
    return parse_config_json(text);
  }
  return from_json(toml_to_json(t));
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  if (path.extension() == ".json") return parse_config_json(text);
  if (path.extension() == ".toml") return parse_config_toml(text);
  return parse_config(text);
}

void validate_config(PipelineConfig& cfg) {
  auto need = [](const std::filesystem::path& p, const char* field) {
    if (!p.empty() && !std::filesystem::exists(p)) {
      throw ConfigError(std::string("field '") + field + "': no such file " + p.string());
    }
  };
  for (const auto& p : cfg.corpus) need(p, "paths.corpus");
  need(cfg.vocab, "paths.vocab");
  need(cfg.clusters, "paths.clusters");
  need(cfg.abbreviations, "paths.abbreviations");
  if (cfg.tokenizer.k == 0) throw ConfigError("field 'tokenizer.k' must be positive");
  cfg.task.gen.seed = derive_seed(cfg.seed, "gen");
  cfg.train.seed = derive_seed(cfg.seed, "train");
  cfg.model.validate();
  cfg.train.validate();
  cfg.task.validate();
  if (cfg.vocab.empty() &&
      cfg.model.vocab_size != cfg.tokenizer.k + SpecialTokens::kCount) {
    throw ConfigError("field 'model.vocab_size' must equal tokenizer.k + 5 when the "
                      "vocabulary is trained from the config");
  }
  for (const auto& w : cfg.objectives) {
    if (w.objective == Objective::kMSPP && cfg.task.gen.mspp.k() != cfg.model.k) {
      throw ConfigError("field 'model.k' must equal the mspp candidate quota total");
    }
  }
}

std::string describe_config(const PipelineConfig& cfg) {
  std::ostringstream o;
  o << "seed " << cfg.seed << ", jobs " << cfg.jobs << "\n";
  o << "corpus:";
  for (const auto& p : cfg.corpus) o << " " << p.string();
  o << "\nvocab " << (cfg.vocab.empty() ? "(trained)" : cfg.vocab.string()) << "\n";
  o << "tokenizer k=" << cfg.tokenizer.k << "\n";
  o << "model d=" << cfg.model.d << " layers=" << cfg.model.n_layers
    << " heads=" << cfg.model.n_heads << " vocab=" << cfg.model.vocab_size << "\n";
  o << "train steps=" << cfg.train.total_steps << " lr=" << cfg.train.lr_peak
    << " batch=" << cfg.train.batch_size << "\n";
  o << "objectives:";
  for (const auto& w : cfg.objectives) o << " " << objective_name(w.objective) << ":" << w.weight;
  o << "\n";
  return o.str();
}

Vocabulary train_tokenizer(const Corpus& c, const TokenizerSettings& s) {
  switch (s.kind) {
    case TokenizerKind::kBPE: return train_bpe(c, s.k, s.mode);
    case TokenizerKind::kWordPiece: return train_wordpiece(c, s.k, s.mode);
    case TokenizerKind::kUnigram: return train_unigram(c, s.k, {}, s.mode);
  }
  throw ConfigError("unknown tokenizer");
}

std::size_t resolve_jobs(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("OBJFORGE_JOBS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) {
      throw ConfigError("OBJFORGE_JOBS must be a positive integer");
    }
    return static_cast<std::size_t>(n);
  }
  return 1;
}

}  // namespace objforge
