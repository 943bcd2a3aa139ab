#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gci/graph.hpp"
#include "gci/graphs.hpp"
#include "gci/table.hpp"

namespace gci {

/// Logistic propensity model P(T=1 | z) over centered confounder columns:
/// logit = intercept + sum_k coefficients[k] * (z_k - centers[k]).
struct PropensityModel {
  std::vector<std::string> confounders;
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::vector<double> centers;

  double logit(std::span<const std::uint8_t> z) const;
  double predict(std::span<const std::uint8_t> z) const;
};

/// Adjustment set for the edge t -> y: the parents of t other than y.
std::vector<std::string> confounder_set(const Dag& dag, std::string_view t, std::string_view y);

/// Full-batch gradient ascent on the mean log-likelihood with an L2 penalty
/// (lambda 1e-3, step 0.1, 500 iterations, zero start). With no confounders
/// the model is the marginal treatment rate.
PropensityModel fit_propensity(const FactorTable& table, std::string_view t, std::span<const std::string> z);

struct MatchingOptions {
  /// Maximum propensity distance for a match; rows without one are skipped.
  std::optional<double> caliper;
};

struct EdgeStrength {
  std::string treatment;
  std::string outcome;
  std::size_t graph_index = 0;
  std::vector<std::string> confounders;
  double psi_hat = 0.0;
  std::size_t n_matched = 0;
  /// Set when estimation was impossible (empty treatment arm); psi_hat is 0 then.
  bool failed = false;
};

/// Propensity-score matching estimate of the average treatment effect.
/// Each row is compared against its nearest opposite-arm neighbours by
/// propensity; equally near neighbours are averaged.
EdgeStrength estimate_ate(const FactorTable& table, std::string_view t, std::string_view y,
                          std::span<const std::string> z, const MatchingOptions& options = {});

/// E[Y | T=1] - E[Y | T=0] without adjustment.
double naive_difference(const FactorTable& table, std::string_view t, std::string_view y);

struct EstimateOptions {
  /// Estimate every edge, not only edges into an outcome.
  bool all_edges = false;
  MatchingOptions matching;
};

std::vector<EdgeStrength> estimate_all(const WeightedDagSet& dags, const FactorTable& table,
                                       std::span<const std::string> outcomes, const EstimateOptions& options = {});

/// Weighted per-graph strengths from factors to outcomes.
struct StrengthMatrix {
  std::vector<std::string> factors;
  std::vector<std::string> outcomes;
  /// Row-major factors x outcomes.
  std::vector<double> psi_tilde;
  std::vector<EdgeStrength> provenance;

  double at(std::size_t factor, std::size_t outcome) const { return psi_tilde[factor * outcomes.size() + outcome]; }
  double get(std::string_view factor, std::string_view outcome) const;
  std::optional<std::size_t> factor_index(std::string_view factor) const;
  std::optional<std::size_t> outcome_index(std::string_view outcome) const;
};

/// psi_tilde(T, Y) = sum_q weight_q * psi_hat_q(T, Y), zero where T -> Y is
/// absent from graph q. Rows are every DAG node not listed in `outcomes`.
StrengthMatrix aggregate_strengths(std::span<const EdgeStrength> strengths, const WeightedDagSet& dags,
                                   std::span<const std::string> outcomes);

enum class RefuterMode { random_confounder, placebo_treatment, data_subset };

std::string_view to_string(RefuterMode mode);
RefuterMode parse_refuter_mode(std::string_view text);

struct RefutationReport {
  RefuterMode mode = RefuterMode::random_confounder;
  double original_psi = 0.0;
  double refuted_psi = 0.0;
  std::size_t repeats = 0;
  bool pass = false;
  double threshold = 0.05;
};

RefutationReport refute(const FactorTable& table, std::string_view t, std::string_view y, std::span<const std::string> z,
                        RefuterMode mode, std::size_t repeats, std::uint64_t seed);

}  // namespace gci
