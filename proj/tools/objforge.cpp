#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "objforge/corpus.hpp"
#include "objforge/corruption.hpp"
#include "objforge/embed_cluster.hpp"
#include "objforge/error.hpp"
#include "objforge/generators.hpp"
#include "objforge/io.hpp"
#include "objforge/metrics.hpp"
#include "objforge/pipeline.hpp"
#include "objforge/tokenizer.hpp"
#include "objforge/train.hpp"

namespace fs = std::filesystem;
using namespace objforge;
using nlohmann::json;

namespace {

struct Globals {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out_dir;
  std::size_t jobs = 0;
  bool dry_run = false;
};

struct Inputs {
  std::vector<std::string> corpus;
  std::string vocab;
  std::string clusters;
  std::string output;
};

PipelineConfig load(const Globals& g, const Inputs& in) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.jobs) cfg.jobs = g.jobs;
  cfg.jobs = resolve_jobs(cfg.jobs);
  if (!in.corpus.empty()) cfg.corpus.assign(in.corpus.begin(), in.corpus.end());
  if (!in.vocab.empty()) cfg.vocab = in.vocab;
  if (!in.clusters.empty()) cfg.clusters = in.clusters;
  return cfg;
}

Corpus corpus_of(const PipelineConfig& cfg) {
  if (cfg.corpus.empty()) throw ValidationError("no corpus given (positional or paths.corpus)");
  SegmentationConfig seg;
  if (!cfg.abbreviations.empty()) {
    seg.abbreviations = SegmentationConfig::load_abbreviations(cfg.abbreviations);
  }
  return load_corpus(cfg.corpus, seg);
}

Vocabulary vocab_of(const PipelineConfig& cfg) {
  if (cfg.vocab.empty()) throw ValidationError("no vocabulary given (--vocab or paths.vocab)");
  return Vocabulary::load(cfg.vocab);
}

fs::path output_path(const PipelineConfig& cfg, const Inputs& in, const char* name) {
  return in.output.empty() ? cfg.out_dir / name : fs::path(in.output);
}

// Runs `body` unless --dry-run was given, in which case only the
// configuration is validated and described.
int finish(const Globals& g, PipelineConfig& cfg, const std::function<void()>& body) {
  validate_config(cfg);
  if (g.dry_run) {
    std::cout << describe_config(cfg) << "dry run: configuration is valid\n";
    return 0;
  }
  body();
  return 0;
}

void add_inputs(CLI::App* cmd, Inputs& in, bool corpus, bool vocab, bool output) {
  if (corpus) cmd->add_option("corpus", in.corpus, "Corpus files (.jsonl or raw text)");
  if (vocab) cmd->add_option("--vocab", in.vocab, "Vocabulary JSON");
  if (output) cmd->add_option("-o,--output", in.output, "Output file");
}

std::string objective_list() { return "ssp, sp, psd, mspp, sdc, dpc, dslc, sds"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"objforge: pre-training objective data and model toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "TOML or JSON pipeline config");
  app.add_option("--seed", g.seed, "Root seed");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker threads (default: OBJFORGE_JOBS or 1)");
  app.add_flag("--dry-run", g.dry_run, "Validate the configuration and exit");
  app.fallthrough();

  Inputs in;
  int rc = 0;
  std::function<int()> action;

  // corpus
  auto* corpus = app.add_subcommand("corpus", "Corpus ingestion and statistics");
  corpus->require_subcommand(1);
  auto* ingest = corpus->add_subcommand("ingest", "Segment raw text into corpus JSONL");
  add_inputs(ingest, in, true, false, true);
  ingest->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      return finish(g, cfg, [&] {
        std::ostringstream out;
        write_corpus_jsonl(corpus_of(cfg), out);
        io::write_file(output_path(cfg, in, "corpus.jsonl"), out.str());
      });
    };
  });
  auto* stats = corpus->add_subcommand("stats", "Print corpus statistics as JSON");
  add_inputs(stats, in, true, false, false);
  stats->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      return finish(g, cfg, [&] {
        const CorpusStats s = corpus_stats(corpus_of(cfg));
        json j{{"n_docs", s.n_docs},           {"n_paragraphs", s.n_paragraphs},
               {"n_sentences", s.n_sentences}, {"n_words", s.n_words},
               {"words_per_doc", s.words_per_doc}, {"paras_per_doc", s.paras_per_doc},
               {"sents_per_para", s.sents_per_para}};
        std::cout << j.dump() << "\n";
      });
    };
  });
  std::size_t synth_docs = 50, synth_paras = 5, synth_sents = 8;
  auto* synth = corpus->add_subcommand("synth", "Write a synthetic corpus");
  synth->add_option("--docs", synth_docs);
  synth->add_option("--paras", synth_paras);
  synth->add_option("--sents", synth_sents);
  add_inputs(synth, in, false, false, true);
  synth->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      return finish(g, cfg, [&] {
        std::ostringstream out;
        write_corpus_jsonl(synthetic_corpus(synth_docs, synth_paras, synth_sents, cfg.seed),
                           out);
        io::write_file(output_path(cfg, in, "synthetic.jsonl"), out.str());
      });
    };
  });

  // tok
  auto* tok = app.add_subcommand("tok", "Subword tokenizers");
  tok->require_subcommand(1);
  std::string algo;
  std::optional<std::size_t> tok_k;
  auto* tok_train = tok->add_subcommand("train", "Train a vocabulary");
  add_inputs(tok_train, in, true, false, true);
  tok_train->add_option("--algo", algo, "bpe, wordpiece or unigram")
      ->check(CLI::IsMember({"bpe", "wordpiece", "unigram"}));
  tok_train->add_option("--k", tok_k, "Learned tokens, specials excluded");
  tok_train->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      if (algo == "bpe") cfg.tokenizer.kind = TokenizerKind::kBPE;
      if (algo == "wordpiece") cfg.tokenizer.kind = TokenizerKind::kWordPiece;
      if (algo == "unigram") cfg.tokenizer.kind = TokenizerKind::kUnigram;
      if (tok_k) {
        cfg.tokenizer.k = *tok_k;
        cfg.model.vocab_size = *tok_k + SpecialTokens::kCount;
      }
      return finish(g, cfg, [&] {
        train_tokenizer(corpus_of(cfg), cfg.tokenizer).save(output_path(cfg, in, "vocab.json"));
      });
    };
  });
  std::string text_file;
  auto* tok_encode = tok->add_subcommand("encode", "Encode text lines to id JSONL");
  tok_encode->add_option("text", text_file, "Text file, one input per line")->required();
  add_inputs(tok_encode, in, false, true, true);
  tok_encode->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      return finish(g, cfg, [&] {
        const Vocabulary v = vocab_of(cfg);
        std::istringstream lines(io::read_file(text_file));
        std::string line, out;
        while (std::getline(lines, line)) out += json(encode(v, line).ids).dump() + "\n";
        if (in.output.empty()) {
          std::cout << out;
        } else {
          io::write_file(in.output, out);
        }
      });
    };
  });

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Token embeddings and clustering");
  cluster->require_subcommand(1);
  SkipgramOptions sg;
  auto* embed = cluster->add_subcommand("embed", "Train skip-gram token embeddings");
  add_inputs(embed, in, true, true, true);
  embed->add_option("--dim", sg.dim);
  embed->add_option("--epochs", sg.epochs);
  embed->add_option("--window", sg.window);
  embed->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      return finish(g, cfg, [&] {
        sg.seed = derive_seed(cfg.seed, "skipgram");
        train_skipgram(corpus_of(cfg), vocab_of(cfg), sg)
            .save(output_path(cfg, in, "embeddings.json"));
      });
    };
  });
  std::string emb_file;
  KMeansOptions km;
  auto* kmeans_cmd = cluster->add_subcommand("kmeans", "Cluster embeddings");
  kmeans_cmd->add_option("embeddings", emb_file)->required();
  kmeans_cmd->add_option("--n", km.n);
  kmeans_cmd->add_option("--restarts", km.restarts);
  add_inputs(kmeans_cmd, in, false, false, true);
  kmeans_cmd->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      return finish(g, cfg, [&] {
        km.seed = derive_seed(cfg.seed, "kmeans");
        km.jobs = static_cast<int>(cfg.jobs);
        const KMeansResult r = kmeans(EmbeddingTable::load(emb_file), km);
        r.clusters.save(output_path(cfg, in, "clusters.json"));
        const auto s = cluster_size_stats(r.clusters);
        std::cout << json{{"inertia", r.inertia}, {"restart", r.restart},
                          {"size_min", s.min}, {"size_max", s.max},
                          {"size_mean", s.mean}, {"size_var", s.variance}}
                         .dump()
                  << "\n";
      });
    };
  });
  std::vector<std::size_t> candidates{4, 8, 16};
  int proxy_steps = 40;
  auto* select = cluster->add_subcommand(
      "select", "Pick the cluster count whose short C-RTS run leaves the detector weakest");
  select->add_option("embeddings", emb_file)->required();
  select->add_option("--candidates", candidates)->delimiter(',');
  select->add_option("--proxy-steps", proxy_steps);
  add_inputs(select, in, true, true, false);
  select->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      cfg.train.total_steps = proxy_steps;
      cfg.train.warmup_steps = std::max(1, proxy_steps / 10);
      return finish(g, cfg, [&] {
        const Corpus c = corpus_of(cfg);
        const Vocabulary v = vocab_of(cfg);
        const EmbeddingTable e = EmbeddingTable::load(emb_file);
        ModelConfig m = cfg.model;
        m.vocab_size = v.size();
        json trace = json::array();
        const auto best = select_cluster_count(candidates, [&](std::size_t n) {
          KMeansOptions o;
          o.n = n;
          o.seed = derive_seed(cfg.seed, "kmeans");
          const ClusterMap cm = kmeans(e, o).clusters;
          Trainer t(m, cfg.train, cfg.task, {{Objective::kCRTS, 1.0}}, c, v, &cm);
          t.run();
          const double acc = t.batch_accuracy(Objective::kCRTS, proxy_steps + 1);
          trace.push_back({{"n", n}, {"accuracy", acc}});
          return acc;
        });
        std::cout << json{{"selected", best}, {"candidates", trace}}.dump() << "\n";
      });
    };
  });

  // gen
  std::string gen_obj;
  std::size_t shards = 1;
  std::optional<std::size_t> passes;
  auto* gen = app.add_subcommand("gen", "Generate structural examples as JSONL shards");
  gen->add_option("objective", gen_obj, objective_list())->required();
  add_inputs(gen, in, true, false, false);
  gen->add_option("--shards", shards);
  gen->add_option("--passes", passes);
  gen->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      const auto o = parse_struct_objective(gen_obj);
      if (!o) throw ValidationError("unknown objective '" + gen_obj + "'");
      if (passes) cfg.task.gen.passes = *passes;
      if (shards == 0) throw ValidationError("--shards must be positive");
      return finish(g, cfg, [&] {
        const auto files = write_shards(*o, corpus_of(cfg), cfg.task.gen, shards, cfg.out_dir,
                                        static_cast<int>(cfg.jobs));
        for (const auto& f : files) std::cout << f.string() << "\n";
      });
    };
  });

  // corrupt
  std::string corrupt_obj;
  std::string fmatrix_file;
  auto* corrupt = app.add_subcommand("corrupt", "Corrupt every paragraph of a corpus");
  corrupt->add_option("objective", corrupt_obj, "mlm, rts, slm or crts")->required();
  add_inputs(corrupt, in, true, true, true);
  corrupt->add_option("--clusters", in.clusters, "Cluster map JSON (crts)");
  corrupt->add_option("--fmatrix", fmatrix_file, "F matrix file (crts; default all zeros)");
  corrupt->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      const auto o = parse_token_objective(corrupt_obj);
      if (!o) throw ValidationError("unknown objective '" + corrupt_obj + "'");
      if (*o == TokenObjective::kCRTS && cfg.clusters.empty()) {
        throw ValidationError("crts needs --clusters");
      }
      return finish(g, cfg, [&] {
        const Corpus c = corpus_of(cfg);
        const Vocabulary v = vocab_of(cfg);
        std::optional<ClusterMap> cm;
        FMatrix f;
        if (*o == TokenObjective::kCRTS) {
          cm = ClusterMap::load(cfg.clusters);
          f = fmatrix_file.empty() ? FMatrix(cm->n()) : FMatrix::load(fmatrix_file);
        }
        const std::string stream = std::string("corrupt/") + objective_name(*o);
        std::string out;
        std::size_t i = 0;
        for (const auto& d : c.documents()) {
          for (const auto& p : d.paragraphs) {
            Rng rng = make_rng(cfg.seed, stream, i++);
            const auto ids = encode(v, p.text()).ids;
            CorruptionOutput r;
            switch (*o) {
              case TokenObjective::kMLM: r = mlm_corrupt(ids, cfg.task.rate, rng, v); break;
              case TokenObjective::kRTS: r = rts_corrupt(ids, cfg.task.rate, rng, v); break;
              case TokenObjective::kSLM: r = slm_corrupt(ids, cfg.task.rate, rng, v); break;
              case TokenObjective::kCRTS:
                r = crts_corrupt(ids, CrtsConfig{cfg.task.gamma, cfg.task.rate}, *cm, f, rng, v);
                break;
            }
            out += r.to_json() + "\n";
          }
        }
        io::write_file(output_path(cfg, in, (stream.substr(8) + ".jsonl").c_str()), out);
      });
    };
  });

  // train
  std::vector<std::string> train_objs;
  std::optional<int> steps;
  std::optional<std::size_t> model_d;
  auto* train = app.add_subcommand("train", "Pre-train the encoder on weighted objectives");
  train->add_option("objectives", train_objs, "objective[:weight] ...");
  train->add_option("--corpus", in.corpus, "Corpus files");
  train->add_option("--vocab", in.vocab, "Vocabulary JSON (trained from the config if absent)");
  train->add_option("--clusters", in.clusters, "Cluster map for crts");
  train->add_option("--steps", steps);
  train->add_option("--d", model_d, "Hidden size");
  train->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      if (!train_objs.empty()) {
        cfg.objectives.clear();
        for (const auto& s : train_objs) cfg.objectives.push_back(parse_weighted_objective(s));
      }
      if (cfg.objectives.empty()) throw ValidationError("no objectives given");
      if (steps) {
        cfg.train.total_steps = *steps;
        cfg.train.warmup_steps = std::min(cfg.train.warmup_steps, *steps);
      }
      if (model_d) cfg.model.d = *model_d;
      return finish(g, cfg, [&] {
        const Corpus c = corpus_of(cfg);
        const Vocabulary v = cfg.vocab.empty() ? train_tokenizer(c, cfg.tokenizer) : vocab_of(cfg);
        cfg.model.vocab_size = v.size();
        std::optional<ClusterMap> cm;
        if (!cfg.clusters.empty()) cm = ClusterMap::load(cfg.clusters);
        Trainer t(cfg.model, cfg.train, cfg.task, cfg.objectives, c, v, cm ? &*cm : nullptr);
        t.run();
        io::write_file(cfg.out_dir / "loss_trace.csv", loss_trace_csv(t.trace()));
        save_checkpoint(cfg.out_dir / "model.ckpt", cfg.model, t.params());
        if (t.f_matrix()) t.f_matrix()->save(cfg.out_dir / "fmatrix.bin");
        for (const auto& w : cfg.objectives) {
          const char* name = objective_name(w.objective);
          const std::size_t n = std::min<std::size_t>(20, t.steps_done());
          std::printf("%-5s first %.4f last %.4f\n", name, mean_loss(t.trace(), name, n, false),
                      mean_loss(t.trace(), name, n, true));
        }
      });
    };
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluation");
  eval->require_subcommand(1);
  std::string rank_file;
  std::size_t hr_k = 1;
  auto* rank = eval->add_subcommand("rank", "MAP/MRR/P@1 over scored groups");
  rank->add_option("groups", rank_file, "JSONL of {\"scores\",\"labels\"}")->required();
  rank->add_option("--k", hr_k, "Cut-off for HR@k");
  rank->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      return finish(g, cfg, [&] {
        std::vector<std::string> warnings;
        const auto r =
            evaluate_ranking(parse_ranking_jsonl(io::read_file(rank_file)), hr_k, &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        std::cout << r.to_json() << "\n";
      });
    };
  });

  // flops
  auto* flops = app.add_subcommand("flops", "Classification head cost accounting");
  flops->require_subcommand(1);
  std::size_t flops_d = 768, flops_vocab = 30522, flops_k = 5;
  auto* report = flops->add_subcommand("report", "Head parameters and FLOPs per token");
  report->add_option("--d", flops_d);
  report->add_option("--vocab", flops_vocab);
  report->add_option("--k", flops_k, "Candidates for the jointwise latency ratio");
  report->callback([&] {
    action = [&] {
      auto cfg = load(g, in);
      return finish(g, cfg, [&] {
        std::cout << flops_report(flops_d, flops_vocab);
        std::printf("jointwise latency ratio (k=%zu): %.6g\n", flops_k,
                    jointwise_latency_ratio(flops_k));
      });
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  try {
    rc = action ? action() : 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
