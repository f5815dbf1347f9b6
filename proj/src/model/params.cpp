#include <bit>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "objforge/error.hpp"
#include "objforge/io.hpp"
#include "objforge/model.hpp"
#include "objforge/random.hpp"

namespace objforge {

using nlohmann::json;

const char* head_name(Head h) {
  switch (h) {
    case Head::kLM: return "lm";
    case Head::kBinary: return "binary";
    case Head::kIE1: return "ie1";
    case Head::kAE1: return "ae1";
    case Head::kIEk: return "iek";
    case Head::kAEk: return "aek";
    case Head::kREk: return "rek";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (d == 0 || n_layers == 0 || n_heads == 0 || f == 0) {
    throw ConfigError("model sizes must be positive");
  }
  if (d % n_heads != 0) {
    throw ConfigError("hidden size " + std::to_string(d) + " is not divisible by " +
                      std::to_string(n_heads) + " heads");
  }
  if (vocab_size <= static_cast<std::size_t>(SpecialTokens::kCount)) {
    throw ConfigError("vocab_size must exceed the special tokens");
  }
  if (max_len == 0) throw ConfigError("max_len must be positive");
  if (k == 0) throw ConfigError("k must be positive");
  if ((k + 1) * slot_len > max_len) {
    throw ConfigError("fixed layout needs (k+1)*slot_len <= max_len");
  }
  if (n_seq_ids < 2) throw ConfigError("n_seq_ids must be at least 2");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
}

void Params::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (tensors_.count(name)) throw ShapeError("duplicate tensor " + name);
  order_.push_back(name);
  tensors_.emplace(name, Mat::Zero(rows, cols));
}

Mat& Params::operator[](const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeError("no tensor named " + name);
  return it->second;
}

const Mat& Params::operator[](const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeError("no tensor named " + name);
  return it->second;
}

Params Params::zeros_like() const {
  Params out;
  for (const auto& n : order_) {
    const Mat& m = tensors_.at(n);
    out.add(n, m.rows(), m.cols());
  }
  return out;
}

void Params::set_zero() {
  for (auto& [_, m] : tensors_) m.setZero();
}

std::size_t Params::count() const {
  std::size_t n = 0;
  for (const auto& [_, m] : tensors_) n += static_cast<std::size_t>(m.size());
  return n;
}

void Params::axpy(double a, const Params& other) {
  for (const auto& n : order_) {
    Mat& m = tensors_.at(n);
    const Mat& o = other[n];
    if (m.rows() != o.rows() || m.cols() != o.cols()) {
      throw ShapeError("shape mismatch for " + n);
    }
    m += a * o;
  }
}

bool Params::all_finite() const {
  for (const auto& [_, m] : tensors_) {
    if (!m.allFinite()) return false;
  }
  return true;
}

Params init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  const auto d = static_cast<Eigen::Index>(cfg.d);
  const auto f = static_cast<Eigen::Index>(cfg.f);
  const auto v = static_cast<Eigen::Index>(cfg.vocab_size);
  Params p;
  p.add("embed.word", v, d);
  p.add("embed.pos", static_cast<Eigen::Index>(cfg.max_len), d);
  p.add("embed.seq", static_cast<Eigen::Index>(cfg.n_seq_ids), d);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    p.add(pre + "attn.wq", d, d);
    p.add(pre + "attn.wk", d, d);
    p.add(pre + "attn.wv", d, d);
    p.add(pre + "attn.wo", d, d);
    p.add(pre + "ln1.gamma", 1, d);
    p.add(pre + "ln1.beta", 1, d);
    p.add(pre + "ffn.w1", d, f);
    p.add(pre + "ffn.b1", 1, f);
    p.add(pre + "ffn.w2", f, d);
    p.add(pre + "ffn.b2", 1, d);
    p.add(pre + "ln2.gamma", 1, d);
    p.add(pre + "ln2.beta", 1, d);
  }
  if (!cfg.tied_lm) p.add("head.lm", v, d);
  p.add("head.binary", 2, d);
  p.add("head.ie1", 2, d);
  p.add("head.ae1", 2, d);
  p.add("head.iek", 2, d);
  p.add("head.aek", 2, 2 * d);
  p.add("head.rek", 2 * static_cast<Eigen::Index>(cfg.k), d);

  Rng rng = make_rng(seed, "init");
  std::normal_distribution<double> normal(0.0, cfg.init_std);
  for (const auto& name : p.names()) {
    Mat& m = p[name];
    if (name.find("gamma") != std::string::npos) {
      m.setOnes();
    } else if (name.find("beta") != std::string::npos ||
               name.find(".b1") != std::string::npos ||
               name.find(".b2") != std::string::npos) {
      m.setZero();
    } else {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    }
  }
  if (cfg.sinusoidal_init) {
    Mat& pos = p["embed.pos"];
    for (Eigen::Index i = 0; i < pos.rows(); ++i) {
      for (Eigen::Index j = 0; j < pos.cols(); ++j) {
        pos(i, j) = sinusoid_position(i, j, cfg.d);
      }
    }
  }
  return p;
}

std::string config_to_json(const ModelConfig& cfg) {
  json j;
  j["d"] = cfg.d;
  j["n_layers"] = cfg.n_layers;
  j["n_heads"] = cfg.n_heads;
  j["f"] = cfg.f;
  j["max_len"] = cfg.max_len;
  j["vocab_size"] = cfg.vocab_size;
  j["n_seq_ids"] = cfg.n_seq_ids;
  j["k"] = cfg.k;
  j["slot_len"] = cfg.slot_len;
  j["tied_lm"] = cfg.tied_lm;
  j["activation"] = cfg.activation == Activation::kGelu ? "gelu" : "relu";
  j["init_std"] = cfg.init_std;
  j["sinusoidal_init"] = cfg.sinusoidal_init;
  return j.dump();
}

ModelConfig config_from_json(std::string_view json_text) {
  ModelConfig cfg;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  auto count = [&](const char* key, std::size_t& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned()) {
      throw ValidationError(std::string("model config: field '") + key +
                            "' must be a non-negative integer");
    }
    out = j[key].get<std::size_t>();
  };
  count("d", cfg.d);
  count("n_layers", cfg.n_layers);
  count("n_heads", cfg.n_heads);
  count("f", cfg.f);
  count("max_len", cfg.max_len);
  count("vocab_size", cfg.vocab_size);
  count("n_seq_ids", cfg.n_seq_ids);
  count("k", cfg.k);
  count("slot_len", cfg.slot_len);
  if (j.contains("tied_lm")) cfg.tied_lm = j["tied_lm"].get<bool>();
  if (j.contains("activation")) {
    const auto a = j["activation"].get<std::string>();
    if (a == "relu") {
      cfg.activation = Activation::kRelu;
    } else if (a == "gelu") {
      cfg.activation = Activation::kGelu;
    } else {
      throw ValidationError("model config: field 'activation' must be relu or gelu");
    }
  }
  if (j.contains("init_std")) cfg.init_std = j["init_std"].get<double>();
  if (j.contains("sinusoidal_init")) cfg.sinusoidal_init = j["sinusoidal_init"].get<bool>();
  cfg.validate();
  return cfg;
}

namespace {

constexpr char kMagic[8] = {'O', 'B', 'J', 'F', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T x) {
  using U = std::conditional_t<sizeof(T) == 8, uint64_t,
                               std::conditional_t<sizeof(T) == 4, uint32_t, uint8_t>>;
  const U u = std::bit_cast<U>(x);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, uint64_t,
                                 std::conditional_t<sizeof(T) == 4, uint32_t, uint8_t>>;
    need(sizeof(T));
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<U>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return std::bit_cast<T>(u);
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string out(s_.substr(pos_, n));
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw ValidationError("checkpoint is truncated");
  }
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const Params& p, CheckpointDtype dtype) {
  std::string out(kMagic, sizeof kMagic);
  put<uint32_t>(out, kVersion);
  const std::string cj = config_to_json(cfg);
  put<uint32_t>(out, static_cast<uint32_t>(cj.size()));
  out += cj;
  put<uint32_t>(out, static_cast<uint32_t>(p.names().size()));
  for (const auto& name : p.names()) {
    const Mat& m = p[name];
    put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out += name;
    put<uint8_t>(out, static_cast<uint8_t>(dtype));
    put<uint64_t>(out, static_cast<uint64_t>(m.rows()));
    put<uint64_t>(out, static_cast<uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (dtype == CheckpointDtype::kF64) {
        put<double>(out, m.data()[i]);
      } else {
        put<float>(out, static_cast<float>(m.data()[i]));
      }
    }
  }
  io::write_file(path, out);
}

std::pair<ModelConfig, Params> load_checkpoint(const std::filesystem::path& path) {
  const std::string raw = io::read_file(path);
  Reader r(raw);
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw ValidationError("not a checkpoint: " + path.string());
  }
  if (r.get<uint32_t>() != kVersion) throw ValidationError("unsupported checkpoint version");
  const ModelConfig cfg = config_from_json(r.bytes(r.get<uint32_t>()));
  Params p;
  const uint32_t n = r.get<uint32_t>();
  for (uint32_t t = 0; t < n; ++t) {
    const std::string name = r.bytes(r.get<uint32_t>());
    const auto dtype = r.get<uint8_t>();
    if (dtype > 1) throw ValidationError("checkpoint tensor " + name + " has unknown dtype");
    const auto rows = static_cast<Eigen::Index>(r.get<uint64_t>());
    const auto cols = static_cast<Eigen::Index>(r.get<uint64_t>());
    p.add(name, rows, cols);
    Mat& m = p[name];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = dtype == 0 ? r.get<double>() : static_cast<double>(r.get<float>());
    }
  }
  if (!r.done()) throw ValidationError("checkpoint has trailing bytes");
  return {cfg, std::move(p)};
}

}  // namespace objforge
