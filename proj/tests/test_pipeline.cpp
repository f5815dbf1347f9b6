#include <doctest.h>

#include <cstdlib>

#include "objforge/error.hpp"
#include "objforge/pipeline.hpp"
#include "objforge/random.hpp"

using namespace objforge;

namespace {

const std::string kData = OBJFORGE_DATA_DIR;

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("toml and json configs agree") {
  const auto a = parse_config_toml(
      "seed = 4\n[tokenizer]\nalgorithm = 'wordpiece'\nk = 40\n"
      "[objectives]\nweights = ['mlm:0.5', 'ssp']\n[model]\nd = 16\n");
  const auto b = parse_config_json(
      R"({"seed":4,"tokenizer":{"algorithm":"wordpiece","k":40},)"
      R"("objectives":{"weights":["mlm:0.5","ssp"]},"model":{"d":16}})");
  for (const auto* c : {&a, &b}) {
    CHECK(c->seed == 4);
    CHECK(c->tokenizer.kind == TokenizerKind::kWordPiece);
    CHECK(c->tokenizer.k == 40);
    CHECK(c->model.d == 16);
    REQUIRE(c->objectives.size() == 2);
    CHECK(c->objectives[0].weight == 0.5);
    CHECK(c->objectives[1].objective == Objective::kSSP);
  }
  CHECK(parse_config("{\"seed\": 9}").seed == 9);
}

TEST_CASE("config errors name the field") {
  CHECK(message_of("[model]\nwidth = 3\n").find("model.width") != std::string::npos);
  CHECK(message_of("[train]\nlr = 'fast'\n").find("train.lr") != std::string::npos);
  CHECK(message_of("seed = -1\n").find("seed") != std::string::npos);
  CHECK(message_of("[tokenizer]\nalgorithm = 'lz'\n").find("tokenizer.algorithm") !=
        std::string::npos);
  CHECK(message_of("[objectives]\nweights = ['mlm:zero']\n").find("objectives.weights") !=
        std::string::npos);
}

TEST_CASE("validation catches inconsistent settings") {
  PipelineConfig c = parse_config("[paths]\ncorpus = '/no/such/file.jsonl'\n");
  CHECK_THROWS_AS(validate_config(c), ValidationError);

  c = load_config(kData + "/toy.toml");
  for (auto& p : c.corpus) p = kData + "/" + p.filename().string();
  c.abbreviations = kData + "/abbreviations.txt";
  CHECK_NOTHROW(validate_config(c));
  CHECK(c.train.seed == derive_seed(c.seed, "train"));
  CHECK(describe_config(c).find("toy_corpus.jsonl") != std::string::npos);

  PipelineConfig bad = c;
  bad.model.vocab_size = 7;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = c;
  bad.objectives = {{Objective::kMSPP, 1.0}};
  bad.model.k = 3;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
  bad = c;
  bad.task.rate = 1.5;
  CHECK_THROWS_AS(validate_config(bad), ConfigError);
}

TEST_CASE("worker count falls back to the environment") {
  CHECK(resolve_jobs(3) == 3);
  setenv("OBJFORGE_JOBS", "2", 1);
  CHECK(resolve_jobs(0) == 2);
  unsetenv("OBJFORGE_JOBS");
  CHECK(resolve_jobs(0) == 1);
}
