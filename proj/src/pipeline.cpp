#include "gci/pipeline.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "gci/common.hpp"

namespace gci {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  if (p < 1) throw Error("p must be at least 1");
  if (q < 1) throw Error("q must be at least 1");
  if (Q < 1) throw Error("Q must be at least 1");
  discovery().validate();
  if (!(temporal_threshold > 0.5 && temporal_threshold <= 1.0)) throw Error("temporal_threshold must lie in (0.5, 1]");
  if (n_trees < 1) throw Error("n_trees must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw Error("train_fraction must lie in (0, 1]");
  if (caliper && !(*caliper > 0.0)) throw Error("caliper must be positive");
}

DiscoveryConfig PipelineConfig::discovery() const {
  return {alpha, max_cond, min_count_per_cell_multiplier, use_score_init};
}

PipelineConfig PipelineConfig::tier(int level) {
  PipelineConfig c;
  switch (level) {
    case 1:
      c.p = 15, c.q = 20;
      break;
    case 2:
      c.p = 25, c.q = 30;
      break;
    case 3:
      c.p = 40, c.q = 60;
      break;
    default:
      throw Error("unknown tier " + std::to_string(level) + " (expected 1, 2 or 3)");
  }
  return c;
}

Json config_to_json(const PipelineConfig& c) {
  Json j = {{"p", c.p},
            {"q", c.q},
            {"Q", c.Q},
            {"alpha", c.alpha},
            {"max_cond", c.max_cond},
            {"min_count_per_cell_multiplier", c.min_count_per_cell_multiplier},
            {"use_score_init", c.use_score_init},
            {"temporal_threshold", c.temporal_threshold},
            {"min_co", c.min_co},
            {"n_trees", c.n_trees},
            {"max_depth", c.max_depth},
            {"master_seed", c.master_seed},
            {"weight_mode", std::string(to_string(c.weight_mode))},
            {"train_fraction", c.train_fraction},
            {"balance", c.balance}};
  j["caliper"] = c.caliper ? Json(*c.caliper) : Json(nullptr);
  return j;
}

PipelineConfig config_from_json(const Json& j, PipelineConfig c) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  static const std::set<std::string> known = {
      "p",      "q",          "Q",       "alpha",     "max_cond",    "min_count_per_cell_multiplier",
      "use_score_init", "temporal_threshold", "min_co", "n_trees", "max_depth", "master_seed",
      "weight_mode", "train_fraction", "balance", "caliper"};
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) throw Error("unknown config key '" + k + "'");
  try {
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    take("p", c.p);
    take("q", c.q);
    take("Q", c.Q);
    take("alpha", c.alpha);
    take("max_cond", c.max_cond);
    take("min_count_per_cell_multiplier", c.min_count_per_cell_multiplier);
    take("use_score_init", c.use_score_init);
    take("temporal_threshold", c.temporal_threshold);
    take("min_co", c.min_co);
    take("n_trees", c.n_trees);
    take("max_depth", c.max_depth);
    take("master_seed", c.master_seed);
    take("train_fraction", c.train_fraction);
    take("balance", c.balance);
    if (j.contains("weight_mode")) c.weight_mode = parse_weight_mode(j.at("weight_mode").get<std::string>());
    if (j.contains("caliper")) {
      if (j.at("caliper").is_null()) c.caliper.reset();
      else c.caliper = j.at("caliper").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t stage_seed(const PipelineConfig& cfg, SeedStream stream) {
  return derive_seed(cfg.master_seed, static_cast<std::uint64_t>(stream));
}

namespace {

template <typename F>
auto stage(std::string_view name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error("stage '" + std::string(name) + "' failed: " + e.what());
  }
}

Corpus prepared_corpus(const PipelineInputs& in, const PipelineConfig& cfg) {
  Corpus corpus = load_corpus(in.corpus, in.charges);
  if (cfg.train_fraction < 1.0) corpus = subsample_training(corpus, cfg.train_fraction, stage_seed(cfg, SeedStream::subsample));
  if (cfg.balance) corpus = balance_corpus(corpus, stage_seed(cfg, SeedStream::balance));
  return corpus;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

FactorArtifacts load_factor_artifacts(const fs::path& dir) {
  const Json j = read_json(dir / "factors.json");
  try {
    return {j.at("charges").get<std::vector<std::string>>(), keywords_from_json(j.at("keywords")),
            vocabulary_from_json(j.at("factors")), background_from_json(j.at("background_knowledge"))};
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed factors.json: " + std::string(e.what()));
  }
}

FactorTable load_table(const fs::path& dir, std::span<const std::string> charges) {
  std::ifstream in(dir / "table.csv");
  if (!in) throw Error("cannot open " + (dir / "table.csv").string());
  return read_table_csv(in, charges, (dir / "table.csv").string());
}

void run_factors_stage(const PipelineInputs& in, const PipelineConfig& cfg, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  const Corpus corpus = prepared_corpus(in, cfg);
  const Corpus train = corpus.filtered(Split::train);
  const auto keywords = score_keywords(train, cfg.p);
  const EmbeddingTable emb = in.embeddings ? load_embeddings(*in.embeddings) : EmbeddingTable(1, {});
  const FactorVocabulary vocab = cluster_keywords(keywords, emb, cfg.q, stage_seed(cfg, SeedStream::cluster));
  const FactorTable table = binarize(train, vocab);
  const auto stats = temporal_precedence(train, vocab);
  const auto bk = background_knowledge(stats, corpus.charges(), cfg.temporal_threshold, cfg.min_co);

  write_json(out / "factors.json", {{"charges", corpus.charges()},
                                    {"keywords", keywords_to_json(keywords)},
                                    {"factors", vocabulary_to_json(vocab)},
                                    {"background_knowledge", background_to_json(bk)}});
  std::ostringstream csv;
  write_table_csv(table, csv);
  write_text(out / "table.csv", csv.str());
}

void run_discover_stage(const PipelineConfig& cfg, const fs::path& out) {
  const auto f = load_factor_artifacts(out);
  const auto table = load_table(out, f.charges);
  const auto result = discover(table, f.background, cfg.discovery());
  write_json(out / "pag.json", pag_to_json(result.pag, result.sepsets));
}

void run_sample_stage(const PipelineConfig& cfg, const fs::path& out) {
  const auto f = load_factor_artifacts(out);
  const auto table = load_table(out, f.charges);
  const auto pag = pag_from_json(read_json(out / "pag.json")).pag;
  const std::uint64_t seed = stage_seed(cfg, SeedStream::sample);
  auto dags = sample_dags(pag, cfg.Q, f.background, seed);
  write_json(out / "dags.json", dags_to_json(weight_graphs(std::move(dags), table, cfg.weight_mode, seed)));
}

void run_estimate_stage(const PipelineConfig& cfg, const fs::path& out) {
  const auto f = load_factor_artifacts(out);
  const auto table = load_table(out, f.charges);
  const auto dags = dags_from_json(read_json(out / "dags.json"));
  const auto outcomes = table.charge_names();
  EstimateOptions opts;
  opts.matching.caliper = cfg.caliper;
  const auto strengths = estimate_all(dags, table, outcomes, opts);
  const auto matrix = aggregate_strengths(strengths, dags, outcomes);
  write_json(out / "strengths.json", strengths_to_json(matrix));
  std::ostringstream csv;
  write_strengths_csv(matrix, csv);
  write_text(out / "strengths.csv", csv.str());
}

void run_train_stage(const PipelineConfig& cfg, const fs::path& out) {
  const auto f = load_factor_artifacts(out);
  const auto table = load_table(out, f.charges);
  const auto strengths = strengths_from_json(read_json(out / "strengths.json"));
  const auto scores = score_table(table, strengths);
  std::vector<std::vector<double>> x;
  std::vector<std::size_t> y;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto label = table.label_of(r);
    if (!label) continue;
    x.push_back(scores[r].scores);
    y.push_back(*label);
  }
  const auto model = train_forest(x, y, f.charges, cfg.n_trees, cfg.max_depth, stage_seed(cfg, SeedStream::forest));
  write_json(out / "model.json", forest_to_json(model));
}

EvaluationMetrics run_predict_stage(const PipelineInputs& in, const fs::path& out) {
  const auto f = load_factor_artifacts(out);
  const auto strengths = strengths_from_json(read_json(out / "strengths.json"));
  const auto model = forest_from_json(read_json(out / "model.json"));
  const Corpus test = load_corpus(in.corpus, in.charges).filtered(Split::test);
  if (test.charges() != f.charges) throw Error("corpus charges differ from the trained charges");
  const FactorTable table = binarize(test, f.vocab);
  const auto scores = score_table(table, strengths);

  const std::size_t m = f.charges.size();
  std::vector<double> tp(m, 0), fp(m, 0), fn(m, 0);
  EvaluationMetrics metrics;
  std::size_t correct = 0;
  std::ostringstream csv;
  csv << "id,predicted,gold\n";
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const std::size_t pred = predict_index(model, scores[r].scores);
    const auto& doc = test.documents()[r];
    csv << doc.id << ',' << f.charges[pred] << ',' << doc.charge.value_or("") << '\n';
    if (!doc.charge) continue;
    const std::size_t gold = test.charge_index(*doc.charge);
    ++metrics.n;
    if (pred == gold) {
      ++correct;
      tp[gold] += 1;
    } else {
      fp[pred] += 1;
      fn[gold] += 1;
    }
  }
  Json per = Json::array();
  for (std::size_t c = 0; c < m; ++c) {
    const double precision = tp[c] + fp[c] > 0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
    const double recall = tp[c] + fn[c] > 0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    metrics.macro_f1 += f1 / static_cast<double>(m);
    per.push_back({{"charge", f.charges[c]}, {"precision", precision}, {"recall", recall}, {"f1", f1}});
  }
  metrics.accuracy = metrics.n ? static_cast<double>(correct) / static_cast<double>(metrics.n) : 0.0;
  write_text(out / "predictions.csv", csv.str());
  write_json(out / "metrics.json",
             {{"n_test", metrics.n}, {"accuracy", metrics.accuracy}, {"macro_f1", metrics.macro_f1}, {"per_charge", per}});
  return metrics;
}

EvaluationMetrics run_pipeline(const PipelineInputs& in, const PipelineConfig& cfg, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  stage("factors", [&] { run_factors_stage(in, cfg, out); });
  stage("discover", [&] { run_discover_stage(cfg, out); });
  stage("sample", [&] { run_sample_stage(cfg, out); });
  stage("estimate", [&] { run_estimate_stage(cfg, out); });
  stage("train", [&] { run_train_stage(cfg, out); });
  const auto metrics = stage("predict", [&] { return run_predict_stage(in, out); });

  Json artifacts = Json::object();
  for (const char* name : {"factors.json", "table.csv", "pag.json", "dags.json", "strengths.json", "strengths.csv",
                           "model.json", "predictions.csv", "metrics.json"}) {
    const std::string text = read_text(out / name);
    artifacts[name] = {{"bytes", text.size()}};
  }
  Json inputs = {{"corpus", in.corpus.filename().string()}, {"charges", in.charges.filename().string()}};
  inputs["embeddings"] = in.embeddings ? Json(in.embeddings->filename().string()) : Json(nullptr);
  write_json(out / "manifest.json", {{"config", config_to_json(cfg)},
                                     {"stage_seeds",
                                      {{"subsample", stage_seed(cfg, SeedStream::subsample)},
                                       {"balance", stage_seed(cfg, SeedStream::balance)},
                                       {"cluster", stage_seed(cfg, SeedStream::cluster)},
                                       {"sample", stage_seed(cfg, SeedStream::sample)},
                                       {"forest", stage_seed(cfg, SeedStream::forest)}}},
                                     {"inputs", inputs},
                                     {"artifacts", artifacts}});
  return metrics;
}

}  // namespace gci
