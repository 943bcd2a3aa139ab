#include <unistd.h>

#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gci/common.hpp"
#include "gci/pipeline.hpp"

using namespace gci;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("gci-" + tag + "-" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

PipelineInputs write_inputs(const fs::path& dir, std::size_t n, std::uint64_t seed) {
  const auto data = synth_corpus(disambiguation_spec(), n, seed);
  PipelineInputs in{dir / "corpus.jsonl", dir / "charges.txt", dir / "embeddings.txt"};
  write_corpus(data.corpus, in.corpus, in.charges);
  std::ofstream emb(*in.embeddings);
  write_embeddings(data.embeddings, emb);
  return in;
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.q = 8;
  cfg.Q = 3;
  cfg.n_trees = 15;
  cfg.master_seed = 11;
  return cfg;
}

const std::vector<std::string> kArtifacts = {"factors.json", "table.csv",      "pag.json",        "dags.json",
                                             "strengths.json", "strengths.csv", "model.json",      "predictions.csv",
                                             "metrics.json",   "manifest.json"};

}  // namespace

TEST_CASE("config JSON round trip and validation") {
  PipelineConfig cfg = small_config();
  cfg.caliper = 0.02;
  cfg.weight_mode = WeightMode::raw;
  const auto back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(back.caliper == std::optional<double>(0.02));

  const auto partial = config_from_json(Json{{"Q", 9}}, cfg);
  CHECK(partial.Q == 9);
  CHECK(partial.q == 8);
  CHECK_THROWS_AS(config_from_json(Json{{"bogus", 1}}), Error);
  CHECK_THROWS_AS(config_from_json(Json{{"alpha", 1.5}}), Error);
  CHECK_THROWS_AS(config_from_json(Json{{"Q", 0}}), Error);
}

TEST_CASE("tiers set keyword and factor budgets") {
  CHECK(PipelineConfig::tier(1).p == 15);
  CHECK(PipelineConfig::tier(1).q == 20);
  CHECK(PipelineConfig::tier(2).p == 25);
  CHECK(PipelineConfig::tier(2).q == 30);
  CHECK(PipelineConfig::tier(3).p == 40);
  CHECK(PipelineConfig::tier(3).q == 60);
  CHECK_THROWS_AS(PipelineConfig::tier(4), Error);
}

TEST_CASE("stage seeds differ per stream and follow the master seed") {
  PipelineConfig a, b;
  b.master_seed = 1;
  CHECK(stage_seed(a, SeedStream::sample) != stage_seed(a, SeedStream::forest));
  CHECK(stage_seed(a, SeedStream::sample) != stage_seed(b, SeedStream::sample));
  CHECK(stage_seed(a, SeedStream::sample) == stage_seed(PipelineConfig{}, SeedStream::sample));
}

TEST_CASE("pipeline writes every artifact and is byte-reproducible") {
  TempDir tmp("pipeline");
  const auto in = write_inputs(tmp.path(), 1500, 2);
  const auto cfg = small_config();
  const auto m1 = run_pipeline(in, cfg, tmp.path() / "run1");
  const auto m2 = run_pipeline(in, cfg, tmp.path() / "run2");
  CHECK(m1.n == 300);
  CHECK(m1.accuracy > 0.8);
  CHECK(m1.accuracy == m2.accuracy);
  for (const auto& name : kArtifacts) {
    INFO(name);
    REQUIRE(fs::exists(tmp.path() / "run1" / name));
    CHECK(slurp(tmp.path() / "run1" / name) == slurp(tmp.path() / "run2" / name));
  }

  // Re-running one stage from its inputs reproduces the same file.
  const auto before = slurp(tmp.path() / "run1" / "dags.json");
  run_sample_stage(cfg, tmp.path() / "run1");
  CHECK(slurp(tmp.path() / "run1" / "dags.json") == before);

  const auto manifest = read_json(tmp.path() / "run1" / "manifest.json");
  CHECK(manifest.at("config") == config_to_json(cfg));
  CHECK(manifest.at("artifacts").contains("model.json"));
}

TEST_CASE("stage artifacts load back consistently") {
  TempDir tmp("artifacts");
  const auto in = write_inputs(tmp.path(), 800, 3);
  const auto cfg = small_config();
  const auto out = tmp.path() / "run";
  run_factors_stage(in, cfg, out);
  const auto art = load_factor_artifacts(out);
  CHECK(art.charges == std::vector<std::string>{"fraud", "extortion"});
  CHECK(art.vocab.size() <= cfg.q);
  const auto table = load_table(out, art.charges);
  CHECK(table.factor_count() == art.vocab.size());
  CHECK(table.charge_count() == 2);
  // Charges never cause anything.
  for (const auto& c : art.charges)
    for (const auto& f : art.vocab.ids()) CHECK(art.background.forbids(charge_variable(c), f));
}

TEST_CASE("a failing stage is named") {
  TempDir tmp("failing");
  PipelineInputs in{tmp.path() / "missing.jsonl", tmp.path() / "missing.txt", std::nullopt};
  try {
    run_pipeline(in, small_config(), tmp.path() / "run");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("stage 'factors'") != std::string::npos);
  }
  CHECK_THROWS_AS(run_discover_stage(small_config(), tmp.path() / "empty"), Error);
}

TEST_CASE("graph and model serialization round trips") {
  const auto table = synth_table(latent_spec(), 2000, 4);
  const auto disc = discover(table, {});
  const auto pag_back = pag_from_json(pag_to_json(disc.pag, disc.sepsets));
  CHECK(pag_back.pag == disc.pag);
  CHECK(pag_back.sepsets == disc.sepsets);

  const auto set = weight_graphs(sample_dags(disc.pag, 4, {}, 1), table);
  const auto set_back = dags_from_json(dags_to_json(set));
  CHECK(set_back.dags == set.dags);
  CHECK(set_back.weights == set.weights);
  CHECK(set_back.raw_bic == set.raw_bic);

  const std::vector<std::string> outcomes = {"B"};
  const auto m = aggregate_strengths(estimate_all(set, table, outcomes), set, outcomes);
  const auto m_back = strengths_from_json(strengths_to_json(m));
  CHECK(m_back.factors == m.factors);
  CHECK(m_back.psi_tilde == m.psi_tilde);
  CHECK(m_back.provenance.size() == m.provenance.size());

  const std::vector<std::vector<double>> x = {{0.0}, {1.0}, {0.2}, {0.9}};
  const std::vector<std::size_t> y = {0, 1, 0, 1};
  const auto forest = train_forest(x, y, {"a", "b"}, 3, 2, 1);
  CHECK(forest_from_json(forest_to_json(forest)) == forest);
}

TEST_CASE("factor and spec serialization round trips") {
  const std::vector<KeywordScore> kw = {{"lie", "fraud", 0.125}, {"threaten", "extortion", 3.0}};
  CHECK(keywords_from_json(keywords_to_json(kw)) == kw);
  const FactorVocabulary vocab({{"f0", {"lie", "deceive"}, "lie", 0.5}});
  CHECK(vocabulary_from_json(vocabulary_to_json(vocab)) == vocab);
  BackgroundKnowledge bk;
  bk.forbidden = {{"a", "b"}, {"Y_x", "a"}};
  CHECK(background_from_json(background_to_json(bk)) == bk);

  const auto spec = disambiguation_spec();
  const auto back = scm_from_json(scm_to_json(spec));
  CHECK(scm_to_json(back) == scm_to_json(spec));
  CHECK(synth_table(back, 200, 1) == synth_table(spec, 200, 1));
  CHECK_THROWS_AS(scm_from_json(Json{{"variables", 3}}), Error);
}
