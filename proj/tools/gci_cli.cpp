// Command-line front end for the GCI pipeline stages.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "gci/common.hpp"
#include "gci/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gci;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = "gci_out";
  int tier = 0;
};

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig cfg = g.tier ? PipelineConfig::tier(g.tier) : PipelineConfig{};
  if (!g.config.empty()) cfg = config_from_json(read_json(g.config), cfg);
  if (g.seed) cfg.master_seed = *g.seed;
  cfg.validate();
  return cfg;
}

const Document& find_document(const Corpus& corpus, const std::string& id) {
  for (const auto& d : corpus.documents())
    if (d.id == id) return d;
  throw Error("no document with id '" + id + "'");
}

void emit(const Json& j, const std::string& file) {
  if (file.empty()) std::cout << j.dump(2) << '\n';
  else write_json(file, j);
}

/// Parses predictions.csv rows (id,predicted,gold).
std::vector<std::array<std::string, 3>> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::array<std::string, 3>> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::array<std::string, 3> row;
    std::stringstream ss(line);
    for (auto& cell : row) std::getline(ss, cell, ',');
    if (row[0].empty() || row[1].empty()) throw ParseError(path.string(), n, "expected id,predicted,gold");
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-based causal inference for charge disambiguation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed (overrides the config file)");
  app.add_option("--config", g.config, "PipelineConfig JSON")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Artifact directory")->capture_default_str();
  app.add_option("--tier", g.tier, "Keyword/factor budget tier (1, 2 or 3)")->check(CLI::Range(1, 3));

  std::string corpus, charges, embeddings;
  auto corpus_options = [&](CLI::App* sub, bool with_embeddings) {
    sub->add_option("--corpus", corpus, "JSONL corpus")->required()->check(CLI::ExistingFile);
    sub->add_option("--charges", charges, "Charge list, one per line")->required()->check(CLI::ExistingFile);
    if (with_embeddings) sub->add_option("--embeddings", embeddings, "Word vectors")->check(CLI::ExistingFile);
  };
  auto inputs = [&] {
    PipelineInputs in{corpus, charges, std::nullopt};
    if (!embeddings.empty()) in.embeddings = embeddings;
    return in;
  };

  auto* factors = app.add_subcommand("factors", "Extract keywords, factors, table and background knowledge");
  corpus_options(factors, true);
  auto* discover_cmd = app.add_subcommand("discover", "Learn the PAG from the factor table");
  auto* sample = app.add_subcommand("sample", "Sample and weight DAGs from the PAG");
  auto* estimate = app.add_subcommand("estimate", "Estimate and aggregate causal strengths");
  auto* train = app.add_subcommand("train", "Train the forest on charge scores");
  auto* predict_cmd = app.add_subcommand("predict", "Predict charges for the test split");
  corpus_options(predict_cmd, false);

  auto* refute_cmd = app.add_subcommand("refute", "Run a sensitivity refuter on one edge");
  std::string treatment, outcome, mode = "placebo_treatment", file;
  std::size_t repeats = 10, graph = 0;
  std::vector<std::string> confounders;
  bool explicit_z = false;
  refute_cmd->add_option("--treatment", treatment)->required();
  refute_cmd->add_option("--outcome", outcome)->required();
  refute_cmd->add_option("--mode", mode, "random_confounder, placebo_treatment or data_subset")->capture_default_str();
  refute_cmd->add_option("--repeats", repeats)->capture_default_str()->check(CLI::PositiveNumber);
  refute_cmd->add_option("--graph", graph, "Sampled graph supplying the confounder set")->capture_default_str();
  refute_cmd->add_option("--confounders", confounders, "Explicit confounder set");
  refute_cmd->add_flag("--no-confounders", explicit_z, "Use an empty confounder set");
  refute_cmd->add_option("--file", file, "Write the report here instead of stdout");

  auto* chains_cmd = app.add_subcommand("chains", "Causal chains behind one document's charge");
  corpus_options(chains_cmd, false);
  std::string doc_id, charge;
  std::size_t max_len = 4;
  chains_cmd->add_option("--doc", doc_id)->required();
  chains_cmd->add_option("--charge", charge, "Defaults to the document's label");
  chains_cmd->add_option("--max-len", max_len)->capture_default_str()->check(CLI::PositiveNumber);
  chains_cmd->add_option("--file", file);

  auto* attention = app.add_subcommand("attention-targets", "Per-token supervision targets for one document");
  corpus_options(attention, false);
  attention->add_option("--doc", doc_id)->required();
  attention->add_option("--charge", charge, "Defaults to the document's label");
  attention->add_option("--file", file);

  auto* fairness = app.add_subcommand("fairness", "FPED/FNED of predictions across document groups");
  corpus_options(fairness, false);
  std::string predictions_path, positive;
  fairness->add_option("--predictions", predictions_path, "Defaults to <out>/predictions.csv");
  fairness->add_option("--positive", positive, "Positive charge")->required();
  fairness->add_option("--file", file);

  auto* dot = app.add_subcommand("export-dot", "Render the PAG or a sampled DAG as DOT");
  std::string what = "pag";
  dot->add_option("--what", what, "pag or dag")->capture_default_str()->check(CLI::IsMember({"pag", "dag"}));
  dot->add_option("--graph", graph, "Graph index for --what dag")->capture_default_str();
  bool label_strengths = false;
  dot->add_flag("--strengths", label_strengths, "Label DAG edges with aggregated strengths");
  dot->add_option("--file", file);

  auto* synth = app.add_subcommand("synth", "Generate synthetic data from an SCM");
  std::string preset = "confounded", spec_path;
  std::size_t n = 5000;
  synth->add_option("--preset", preset, "confounded, collider, chain, latent or disambiguation")->capture_default_str();
  synth->add_option("--spec", spec_path, "SCM spec JSON (overrides --preset)")->check(CLI::ExistingFile);
  synth->add_option("--n", n, "Rows or documents")->capture_default_str()->check(CLI::PositiveNumber);

  auto* pipeline = app.add_subcommand("pipeline", "Run every stage end to end");
  corpus_options(pipeline, true);

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out = g.out;
    const PipelineConfig cfg = resolve_config(g);

    if (*factors) {
      run_factors_stage(inputs(), cfg, out);
    } else if (*discover_cmd) {
      run_discover_stage(cfg, out);
    } else if (*sample) {
      run_sample_stage(cfg, out);
    } else if (*estimate) {
      run_estimate_stage(cfg, out);
    } else if (*train) {
      run_train_stage(cfg, out);
    } else if (*predict_cmd) {
      const auto m = run_predict_stage(inputs(), out);
      std::cout << "accuracy " << m.accuracy << " macro_f1 " << m.macro_f1 << " n " << m.n << '\n';
    } else if (*refute_cmd) {
      const auto f = load_factor_artifacts(out);
      const auto table = load_table(out, f.charges);
      std::vector<std::string> z = confounders;
      if (z.empty() && !explicit_z) {
        const auto dags = dags_from_json(read_json(out / "dags.json"));
        if (graph >= dags.dags.size()) throw Error("graph index out of range");
        z = confounder_set(dags.dags[graph], treatment, outcome);
      }
      const auto report = refute(table, treatment, outcome, z, parse_refuter_mode(mode), repeats,
                                 stage_seed(cfg, SeedStream::refute));
      emit(refutation_to_json(report), file);
    } else if (*chains_cmd) {
      const auto f = load_factor_artifacts(out);
      const auto dags = dags_from_json(read_json(out / "dags.json"));
      const Corpus c = load_corpus(corpus, charges);
      const auto& doc = find_document(c, doc_id);
      const std::string target = charge.empty() ? doc.charge.value_or("") : charge;
      if (target.empty()) throw Error("document '" + doc_id + "' is unlabeled; pass --charge");
      std::set<std::string, std::less<>> present;
      for (const auto& tok : doc.tokens)
        if (auto idx = f.vocab.factor_of(tok)) present.insert(f.vocab.factors()[*idx].id);
      emit(chains_to_json(extract_chains(dags, present, target, max_len)), file);
    } else if (*attention) {
      const auto f = load_factor_artifacts(out);
      const auto strengths = strengths_from_json(read_json(out / "strengths.json"));
      const Corpus c = load_corpus(corpus, charges);
      const auto& doc = find_document(c, doc_id);
      const std::string gold = charge.empty() ? doc.charge.value_or("") : charge;
      if (gold.empty()) throw Error("document '" + doc_id + "' is unlabeled; pass --charge");
      const auto g_i = attention_targets(doc, f.vocab, strengths, gold);
      emit({{"id", doc.id}, {"charge", gold}, {"tokens", doc.tokens}, {"targets", g_i}}, file);
    } else if (*fairness) {
      const Corpus c = load_corpus(corpus, charges);
      std::map<std::string, const Document*> by_id;
      for (const auto& d : c.documents()) by_id[d.id] = &d;
      std::vector<std::string> preds, golds, groups;
      for (const auto& row : read_predictions(predictions_path.empty() ? out / "predictions.csv" : fs::path(predictions_path))) {
        auto it = by_id.find(row[0]);
        if (it == by_id.end()) throw Error("prediction for unknown document '" + row[0] + "'");
        if (!it->second->charge) continue;
        preds.push_back(row[1]);
        golds.push_back(*it->second->charge);
        groups.push_back(it->second->group.value_or("unknown"));
      }
      emit(fairness_to_json(fairness_metrics(preds, golds, groups, positive)), file);
    } else if (*dot) {
      std::string text;
      if (what == "pag") {
        text = export_dot(pag_from_json(read_json(out / "pag.json")).pag);
      } else {
        const auto dags = dags_from_json(read_json(out / "dags.json"));
        if (graph >= dags.dags.size()) throw Error("graph index out of range");
        EdgeLabels labels;
        if (label_strengths) {
          const auto m = strengths_from_json(read_json(out / "strengths.json"));
          for (const auto& [a, b] : dags.dags[graph].edges()) {
            const auto& from = dags.nodes[a];
            const auto& to = dags.nodes[b];
            if (m.factor_index(from) && m.outcome_index(to)) {
              std::ostringstream s;
              s.precision(3);
              s << m.get(from, to);
              labels[{from, to}] = s.str();
            }
          }
        }
        text = export_dot(dags.dags[graph], labels);
      }
      if (file.empty()) std::cout << text;
      else write_text(file, text);
    } else if (*synth) {
      const ScmSpec spec = spec_path.empty() ? preset_spec(preset) : scm_from_json(read_json(spec_path));
      fs::create_directories(out);
      write_json(out / "spec.json", scm_to_json(spec));
      if (spec.label) {
        const auto data = synth_corpus(spec, n, cfg.master_seed);
        write_corpus(data.corpus, out / "corpus.jsonl", out / "charges.txt");
        std::ostringstream emb;
        write_embeddings(data.embeddings, emb);
        write_text(out / "embeddings.txt", emb.str());
        write_json(out / "truth.json", truth_to_json(data.truth));
      } else {
        std::ostringstream csv;
        write_table_csv(synth_table(spec, n, cfg.master_seed), csv);
        write_text(out / "table.csv", csv.str());
        write_json(out / "truth.json", truth_to_json(ground_truth(spec)));
      }
    } else if (*pipeline) {
      const auto m = run_pipeline(inputs(), cfg, out);
      std::cout << "accuracy " << m.accuracy << " macro_f1 " << m.macro_f1 << " n " << m.n << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
