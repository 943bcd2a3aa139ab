#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gci/serialize.hpp"

namespace gci {

struct PipelineConfig {
  std::size_t p = 15;
  std::size_t q = 20;
  std::size_t Q = 5;
  double alpha = 0.05;
  std::size_t max_cond = 3;
  std::size_t min_count_per_cell_multiplier = 10;
  bool use_score_init = true;
  double temporal_threshold = 0.8;
  std::size_t min_co = 10;
  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::uint64_t master_seed = 0;
  WeightMode weight_mode = WeightMode::softmax;
  /// Share of labeled training documents kept (stratified) before anything else.
  double train_fraction = 1.0;
  bool balance = true;
  std::optional<double> caliper;

  void validate() const;
  DiscoveryConfig discovery() const;
  /// Keyword/factor budgets (p, q): tier 1 = (15, 20), 2 = (25, 30), 3 = (40, 60).
  static PipelineConfig tier(int level);
};

Json config_to_json(const PipelineConfig& cfg);
/// Missing keys keep the values already in `base`.
PipelineConfig config_from_json(const Json& j, PipelineConfig base = {});

/// Stage seeds fanned out from the master seed.
enum class SeedStream : std::uint64_t { subsample = 1, balance = 2, cluster = 3, sample = 4, forest = 5, refute = 6 };
std::uint64_t stage_seed(const PipelineConfig& cfg, SeedStream stream);

struct PipelineInputs {
  std::filesystem::path corpus;
  std::filesystem::path charges;
  /// Optional; without embeddings every keyword is its own factor.
  std::optional<std::filesystem::path> embeddings;
};

/// factors.json + table.csv in `out`.
void run_factors_stage(const PipelineInputs& in, const PipelineConfig& cfg, const std::filesystem::path& out);
/// pag.json from factors.json + table.csv.
void run_discover_stage(const PipelineConfig& cfg, const std::filesystem::path& out);
/// dags.json from pag.json + factors.json + table.csv.
void run_sample_stage(const PipelineConfig& cfg, const std::filesystem::path& out);
/// strengths.json + strengths.csv from dags.json + table.csv.
void run_estimate_stage(const PipelineConfig& cfg, const std::filesystem::path& out);
/// model.json from strengths.json + table.csv.
void run_train_stage(const PipelineConfig& cfg, const std::filesystem::path& out);

struct EvaluationMetrics {
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// predictions.csv + metrics.json for the test split of the corpus.
EvaluationMetrics run_predict_stage(const PipelineInputs& in, const std::filesystem::path& out);

/// All stages in order plus manifest.json. Errors name the failing stage.
EvaluationMetrics run_pipeline(const PipelineInputs& in, const PipelineConfig& cfg, const std::filesystem::path& out);

/// Stage artifacts read back from a run directory.
struct FactorArtifacts {
  std::vector<std::string> charges;
  std::vector<KeywordScore> keywords;
  FactorVocabulary vocab;
  BackgroundKnowledge background;
};

FactorArtifacts load_factor_artifacts(const std::filesystem::path& dir);
FactorTable load_table(const std::filesystem::path& dir, std::span<const std::string> charges);

}  // namespace gci
