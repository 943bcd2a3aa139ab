#include "gci/effects.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "gci/common.hpp"

namespace gci {

namespace {

constexpr double kRidge = 1e-3;
constexpr double kStep = 0.1;
constexpr int kIterations = 500;
constexpr double kRefuteTolerance = 0.05;

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

std::vector<std::size_t> resolve(const FactorTable& table, std::span<const std::string> names) {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(table.require(n));
  return out;
}

}  // namespace

double PropensityModel::logit(std::span<const std::uint8_t> z) const {
  if (z.size() != coefficients.size()) throw Error("propensity input has the wrong length");
  double s = intercept;
  for (std::size_t k = 0; k < z.size(); ++k) s += coefficients[k] * (static_cast<double>(z[k]) - centers[k]);
  return s;
}

double PropensityModel::predict(std::span<const std::uint8_t> z) const { return sigmoid(logit(z)); }

std::vector<std::string> confounder_set(const Dag& dag, std::string_view t, std::string_view y) {
  const std::size_t ti = dag.require(t), yi = dag.require(y);
  if (!dag.has_edge(ti, yi)) throw Error("edge " + std::string(t) + " -> " + std::string(y) + " is not in the graph");
  std::vector<std::string> out;
  for (std::size_t p : dag.parents(ti))
    if (p != yi) out.push_back(dag.nodes()[p]);
  std::sort(out.begin(), out.end());
  return out;
}

PropensityModel fit_propensity(const FactorTable& table, std::string_view t, std::span<const std::string> z) {
  const std::size_t ti = table.require(t);
  const auto zi = resolve(table, z);
  if (std::find(zi.begin(), zi.end(), ti) != zi.end()) throw Error("treatment listed among its own confounders");
  const std::size_t n = table.rows();
  const auto tcol = table.column(ti);
  const std::size_t treated = static_cast<std::size_t>(std::count(tcol.begin(), tcol.end(), 1));
  if (treated == 0 || treated == n)
    throw Error("treatment '" + std::string(t) + "' is constant; no variation to model");

  PropensityModel model;
  model.confounders.assign(z.begin(), z.end());
  const std::size_t k = zi.size();
  model.coefficients.assign(k, 0.0);
  model.centers.assign(k, 0.0);
  if (k == 0) {
    const double rate = static_cast<double>(treated) / static_cast<double>(n);
    model.intercept = std::log(rate / (1.0 - rate));
    return model;
  }

  // Rows with equal confounder values contribute identical gradient terms, so
  // the data is compressed to distinct configurations with arm counts.
  struct Config {
    std::vector<double> x;
    double n1 = 0.0, n0 = 0.0;
  };
  std::map<std::vector<std::uint8_t>, Config> configs;
  std::vector<std::uint8_t> key(k);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      key[j] = table.at(r, zi[j]);
      model.centers[j] += key[j];
    }
    auto& c = configs[key];
    (tcol[r] ? c.n1 : c.n0) += 1.0;
  }
  for (double& c : model.centers) c /= static_cast<double>(n);
  for (auto& [bits, c] : configs) {
    c.x.resize(k);
    for (std::size_t j = 0; j < k; ++j) c.x[j] = static_cast<double>(bits[j]) - model.centers[j];
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> grad(k);
  for (int it = 0; it < kIterations; ++it) {
    double grad_b = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& [bits, c] : configs) {
      double s = model.intercept;
      for (std::size_t j = 0; j < k; ++j) s += model.coefficients[j] * c.x[j];
      // n1 * (1 - p) - n0 * p, written so that flipping the treatment negates it exactly.
      const double resid = c.n1 * sigmoid(-s) - c.n0 * sigmoid(s);
      grad_b += resid;
      for (std::size_t j = 0; j < k; ++j) grad[j] += resid * c.x[j];
    }
    model.intercept += kStep * (grad_b * inv_n);
    for (std::size_t j = 0; j < k; ++j)
      model.coefficients[j] += kStep * (grad[j] * inv_n - kRidge * model.coefficients[j]);
  }
  for (double w : model.coefficients)
    if (!std::isfinite(w)) throw Error("propensity fit diverged");
  return model;
}

EdgeStrength estimate_ate(const FactorTable& table, std::string_view t, std::string_view y,
                          std::span<const std::string> z, const MatchingOptions& options) {
  const std::size_t ti = table.require(t), yi = table.require(y);
  if (ti == yi) throw Error("treatment and outcome must differ");
  const auto zi = resolve(table, z);
  const std::size_t n = table.rows();
  const auto tcol = table.column(ti);
  const auto ycol = table.column(yi);
  const std::size_t treated = static_cast<std::size_t>(std::count(tcol.begin(), tcol.end(), 1));
  if (treated == 0 || treated == n)
    throw Error("treatment '" + std::string(t) + "' has an empty arm; strength undefined");

  const PropensityModel model = fit_propensity(table, t, z);
  // Matching key tanh(logit / 2) = 2 L - 1: same ordering and (scaled) distances
  // as the propensity itself, and exactly odd under treatment relabeling.
  std::vector<double> key(n, 0.0);
  if (!zi.empty()) {
    std::vector<std::uint8_t> zrow(zi.size());
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < zi.size(); ++j) zrow[j] = table.at(r, zi[j]);
      key[r] = std::tanh(0.5 * model.logit(zrow));
    }
  }

  // Per arm: distinct keys ascending with outcome sums and row counts.
  struct Bucket {
    double key;
    double y_sum;
    double count;
  };
  std::array<std::vector<Bucket>, 2> arms;
  for (int arm = 0; arm < 2; ++arm) {
    std::map<double, std::pair<double, double>> agg;
    for (std::size_t r = 0; r < n; ++r) {
      if (tcol[r] != arm) continue;
      auto& a = agg[key[r]];
      a.first += ycol[r];
      a.second += 1.0;
    }
    for (const auto& [k, v] : agg) arms[static_cast<std::size_t>(arm)].push_back({k, v.first, v.second});
  }

  EdgeStrength out;
  out.treatment = std::string(t);
  out.outcome = std::string(y);
  out.confounders.assign(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& other = arms[tcol[r] ? 0 : 1];
    auto it = std::lower_bound(other.begin(), other.end(), key[r],
                               [](const Bucket& b, double v) { return b.key < v; });
    double best = std::numeric_limits<double>::infinity();
    double y_sum = 0.0, count = 0.0;
    auto take = [&](const Bucket& b) {
      const double d = std::abs(key[r] - b.key);
      if (d < best) {
        best = d;
        y_sum = b.y_sum;
        count = b.count;
      } else if (d == best) {
        y_sum += b.y_sum;
        count += b.count;
      }
    };
    if (it != other.end()) take(*it);
    if (it != other.begin()) take(*std::prev(it));
    if (options.caliper && 0.5 * best > *options.caliper) continue;
    const double matched = y_sum / count;
    const double own = static_cast<double>(ycol[r]);
    total += tcol[r] ? own - matched : matched - own;
    ++out.n_matched;
  }
  out.psi_hat = total / static_cast<double>(n);
  return out;
}

double naive_difference(const FactorTable& table, std::string_view t, std::string_view y) {
  const auto tcol = table.column(table.require(t));
  const auto ycol = table.column(table.require(y));
  double s[2] = {0, 0}, c[2] = {0, 0};
  for (std::size_t r = 0; r < table.rows(); ++r) {
    s[tcol[r]] += ycol[r];
    c[tcol[r]] += 1;
  }
  if (c[0] == 0 || c[1] == 0) throw Error("naive difference needs both treatment arms");
  return s[1] / c[1] - s[0] / c[0];
}

std::vector<EdgeStrength> estimate_all(const WeightedDagSet& dags, const FactorTable& table,
                                       std::span<const std::string> outcomes, const EstimateOptions& options) {
  for (const auto& o : outcomes) table.require(o);
  std::vector<EdgeStrength> out;
  for (std::size_t q = 0; q < dags.dags.size(); ++q) {
    const Dag& dag = dags.dags[q];
    for (const auto& [a, b] : dag.edges()) {
      const std::string& t = dag.nodes()[a];
      const std::string& y = dag.nodes()[b];
      if (!options.all_edges && std::find(outcomes.begin(), outcomes.end(), y) == outcomes.end()) continue;
      const auto z = confounder_set(dag, t, y);
      EdgeStrength s;
      try {
        s = estimate_ate(table, t, y, z, options.matching);
      } catch (const Error& e) {
        warn("graph " + std::to_string(q) + ", edge " + t + " -> " + y + ": " + e.what() + "; using strength 0");
        s.treatment = t;
        s.outcome = y;
        s.confounders = z;
        s.failed = true;
      }
      s.graph_index = q;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::optional<std::size_t> StrengthMatrix::factor_index(std::string_view factor) const {
  auto it = std::find(factors.begin(), factors.end(), factor);
  if (it == factors.end()) return std::nullopt;
  return static_cast<std::size_t>(it - factors.begin());
}

std::optional<std::size_t> StrengthMatrix::outcome_index(std::string_view outcome) const {
  auto it = std::find(outcomes.begin(), outcomes.end(), outcome);
  if (it == outcomes.end()) return std::nullopt;
  return static_cast<std::size_t>(it - outcomes.begin());
}

double StrengthMatrix::get(std::string_view factor, std::string_view outcome) const {
  const auto f = factor_index(factor);
  const auto o = outcome_index(outcome);
  if (!f || !o) return 0.0;
  return at(*f, *o);
}

StrengthMatrix aggregate_strengths(std::span<const EdgeStrength> strengths, const WeightedDagSet& dags,
                                   std::span<const std::string> outcomes) {
  StrengthMatrix m;
  m.outcomes.assign(outcomes.begin(), outcomes.end());
  for (const auto& node : dags.nodes)
    if (std::find(outcomes.begin(), outcomes.end(), node) == outcomes.end()) m.factors.push_back(node);
  m.psi_tilde.assign(m.factors.size() * m.outcomes.size(), 0.0);
  for (const auto& s : strengths) {
    if (s.graph_index >= dags.weights.size()) throw Error("strength refers to an unknown graph");
    const auto f = m.factor_index(s.treatment);
    const auto o = m.outcome_index(s.outcome);
    if (!f || !o) continue;
    m.psi_tilde[*f * m.outcomes.size() + *o] += dags.weights[s.graph_index] * s.psi_hat;
    m.provenance.push_back(s);
  }
  return m;
}

std::string_view to_string(RefuterMode mode) {
  switch (mode) {
    case RefuterMode::random_confounder:
      return "random_confounder";
    case RefuterMode::placebo_treatment:
      return "placebo_treatment";
    case RefuterMode::data_subset:
      return "data_subset";
  }
  return "?";
}

RefuterMode parse_refuter_mode(std::string_view text) {
  if (text == "random_confounder") return RefuterMode::random_confounder;
  if (text == "placebo_treatment") return RefuterMode::placebo_treatment;
  if (text == "data_subset") return RefuterMode::data_subset;
  throw Error("unknown refuter '" + std::string(text) + "'");
}

RefutationReport refute(const FactorTable& table, std::string_view t, std::string_view y, std::span<const std::string> z,
                        RefuterMode mode, std::size_t repeats, std::uint64_t seed) {
  if (repeats < 1) throw Error("refuter needs at least one repeat");
  RefutationReport report;
  report.mode = mode;
  report.repeats = repeats;
  report.threshold = kRefuteTolerance;
  report.original_psi = estimate_ate(table, t, y, z).psi_hat;

  const std::size_t n = table.rows();
  auto coin_column = [n](Rng& rng) {
    std::vector<std::uint8_t> col(n);
    for (auto& v : col) v = rng.bernoulli(0.5) ? 1 : 0;
    return col;
  };

  double sum = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    Rng rng(seed, {static_cast<std::uint64_t>(mode), r});
    switch (mode) {
      case RefuterMode::random_confounder: {
        FactorTable augmented = table;
        std::string name = "__random_confounder";
        while (augmented.index_of(name)) name += "_";
        augmented.add_factor_column(name, coin_column(rng));
        std::vector<std::string> zz(z.begin(), z.end());
        zz.push_back(name);
        sum += estimate_ate(augmented, t, y, zz).psi_hat;
        break;
      }
      case RefuterMode::placebo_treatment: {
        FactorTable placebo = table;
        placebo.replace_column(placebo.require(t), coin_column(rng));
        sum += estimate_ate(placebo, t, y, z).psi_hat;
        break;
      }
      case RefuterMode::data_subset: {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        const std::size_t keep = (n * 4) / 5;
        for (std::size_t i = 0; i < keep; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
        idx.resize(keep);
        std::sort(idx.begin(), idx.end());
        sum += estimate_ate(table.select_rows(idx), t, y, z).psi_hat;
        break;
      }
    }
  }
  report.refuted_psi = sum / static_cast<double>(repeats);
  const double target = mode == RefuterMode::placebo_treatment ? 0.0 : report.original_psi;
  report.pass = std::abs(report.refuted_psi - target) <= report.threshold;
  return report;
}

}  // namespace gci
