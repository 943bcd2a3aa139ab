#include "gci/decision.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gci/common.hpp"

namespace gci {

TreatmentSets treatment_sets(const StrengthMatrix& strengths) {
  TreatmentSets out(strengths.outcomes.size());
  for (std::size_t o = 0; o < strengths.outcomes.size(); ++o)
    for (std::size_t f = 0; f < strengths.factors.size(); ++f)
      if (strengths.at(f, o) != 0.0) out[o].push_back(f);
  return out;
}

ChargeScores charge_scores(std::span<const std::uint8_t> row, const StrengthMatrix& strengths,
                           const TreatmentSets& treatments, std::string id) {
  if (row.size() != strengths.factors.size()) throw Error("presence row does not match the factor list");
  if (treatments.size() != strengths.outcomes.size()) throw Error("treatment sets do not match the outcomes");
  ChargeScores out{std::move(id), std::vector<double>(strengths.outcomes.size(), 0.0)};
  for (std::size_t o = 0; o < treatments.size(); ++o)
    for (std::size_t f : treatments[o])
      if (row[f]) out.scores[o] += strengths.at(f, o);
  return out;
}

ChargeScores charge_scores(std::span<const std::uint8_t> row, const StrengthMatrix& strengths, std::string id) {
  return charge_scores(row, strengths, treatment_sets(strengths), std::move(id));
}

std::vector<std::uint8_t> presence_row(const FactorTable& table, std::size_t r, const StrengthMatrix& strengths) {
  std::vector<std::uint8_t> row(strengths.factors.size(), 0);
  for (std::size_t f = 0; f < row.size(); ++f)
    if (auto c = table.index_of(strengths.factors[f])) row[f] = table.at(r, *c);
  return row;
}

std::vector<ChargeScores> score_table(const FactorTable& table, const StrengthMatrix& strengths) {
  const auto tr = treatment_sets(strengths);
  std::vector<ChargeScores> out;
  out.reserve(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r)
    out.push_back(charge_scores(presence_row(table, r, strengths), strengths, tr, table.row_ids()[r]));
  return out;
}

std::size_t DecisionTree::predict(std::span<const double> x) const {
  std::size_t at = 0;
  while (nodes[at].feature >= 0) {
    const auto& n = nodes[at];
    at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[at].label;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(std::span<const std::vector<double>> x, std::span<const std::size_t> y, std::size_t classes,
              std::size_t max_depth, Rng& rng)
      : x_(x), y_(y), classes_(classes), max_depth_(max_depth), rng_(rng) {
    const std::size_t f = x_.front().size();
    mtry_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(f))));
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::vector<double> counts(const std::vector<std::size_t>& rows) const {
    std::vector<double> c(classes_, 0.0);
    for (std::size_t r : rows) c[y_[r]] += 1.0;
    return c;
  }

  static double gini(const std::vector<double>& c, double n) {
    if (n == 0.0) return 0.0;
    double s = 0.0;
    for (double v : c) s += (v / n) * (v / n);
    return 1.0 - s;
  }

  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const auto c = counts(rows);
    tree_.nodes[static_cast<std::size_t>(id)].label =
        static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
    const double n = static_cast<double>(rows.size());
    const double parent = gini(c, n);
    if (depth >= max_depth_ || parent == 0.0 || rows.size() < 2) return id;

    // Candidate features: a seeded partial shuffle.
    const std::size_t nf = x_.front().size();
    std::vector<std::size_t> feats(nf);
    std::iota(feats.begin(), feats.end(), 0);
    const std::size_t m = std::min(mtry_, nf);
    for (std::size_t i = 0; i < m; ++i) std::swap(feats[i], feats[i + rng_.below(nf - i)]);

    double best = parent - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::pair<double, std::size_t>> vals(rows.size());
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t f = feats[k];
      for (std::size_t i = 0; i < rows.size(); ++i) vals[i] = {x_[rows[i]][f], y_[rows[i]]};
      std::sort(vals.begin(), vals.end());
      std::vector<double> left(classes_, 0.0), right = c;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        left[vals[i].second] += 1.0;
        right[vals[i].second] -= 1.0;
        if (vals[i].first == vals[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1), nr = n - nl;
        const double score = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
        if (score < best) {
          best = score;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (std::size_t r : rows)
      (x_[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? lrows : rrows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(lrows), depth + 1);
    const int r = grow(std::move(rrows), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::span<const std::vector<double>> x_;
  std::span<const std::size_t> y_;
  std::size_t classes_;
  std::size_t max_depth_;
  std::size_t mtry_ = 1;
  Rng& rng_;
  DecisionTree tree_;
};

}  // namespace

ForestModel train_forest(std::span<const std::vector<double>> features, std::span<const std::size_t> labels,
                         std::vector<std::string> charges, std::size_t n_trees, std::size_t max_depth,
                         std::uint64_t seed) {
  if (features.empty() || features.size() != labels.size()) throw Error("forest needs one label per example");
  if (n_trees < 1) throw Error("forest needs at least one tree");
  if (charges.size() < 2) throw Error("forest needs at least two charges");
  const std::size_t nf = features.front().size();
  if (nf == 0) throw Error("forest needs at least one feature");
  std::vector<std::size_t> per(charges.size(), 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != nf) throw Error("score vectors differ in length");
    if (labels[i] >= charges.size()) throw Error("label outside the charge set");
    ++per[labels[i]];
  }
  for (std::size_t c = 0; c < charges.size(); ++c)
    if (per[c] == 0) throw Error("no training example for charge '" + charges[c] + "'");

  ForestModel model;
  model.charges = std::move(charges);
  model.n_features = nf;
  model.n_trees = n_trees;
  model.max_depth = max_depth;
  model.seed = seed;
  const std::size_t n = features.size();
  for (std::size_t t = 0; t < n_trees; ++t) {
    Rng rng(seed, {t});
    std::vector<std::size_t> boot(n);
    for (auto& r : boot) r = rng.below(n);
    TreeBuilder builder(features, labels, model.charges.size(), max_depth, rng);
    model.trees.push_back(builder.build(std::move(boot)));
  }
  return model;
}

std::size_t predict_index(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.n_features)
    throw Error("score vector has " + std::to_string(x.size()) + " entries, model expects " +
                std::to_string(model.n_features));
  std::vector<std::size_t> votes(model.charges.size(), 0);
  for (const auto& t : model.trees) ++votes[t.predict(x)];
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

std::string predict(const ForestModel& model, std::span<const double> x) {
  return model.charges[predict_index(model, x)];
}

std::vector<CausalChain> extract_chains(const WeightedDagSet& dags, const std::set<std::string, std::less<>>& present,
                                        std::string_view charge, std::size_t max_len) {
  if (max_len < 1) throw Error("max chain length must be at least 1");
  const std::string target = charge_variable(charge);
  std::map<std::vector<std::string>, double> merged;
  for (std::size_t q = 0; q < dags.dags.size(); ++q) {
    const Dag& dag = dags.dags[q];
    const auto y = dag.index_of(target);
    if (!y) continue;
    const auto& names = dag.nodes();
    std::set<std::vector<std::string>> seen;
    std::vector<std::size_t> path;
    // Paths grow backwards from a treatment of the charge.
    auto extend = [&](auto&& self) -> void {
      std::vector<std::string> named;
      for (auto it = path.rbegin(); it != path.rend(); ++it) named.push_back(names[*it]);
      seen.insert(std::move(named));
      if (path.size() == max_len) return;
      for (std::size_t p : dag.parents(path.back())) {
        if (!present.contains(names[p]) || std::find(path.begin(), path.end(), p) != path.end()) continue;
        path.push_back(p);
        self(self);
        path.pop_back();
      }
    };
    for (std::size_t t : dag.parents(*y)) {
      if (!present.contains(names[t])) continue;
      path = {t};
      extend(extend);
    }
    for (const auto& s : seen) merged[s] += dags.weights[q];
  }
  std::vector<CausalChain> out;
  for (auto& [p, w] : merged) out.push_back({p, std::string(charge), w});
  std::stable_sort(out.begin(), out.end(), [](const CausalChain& a, const CausalChain& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.path < b.path;
  });
  return out;
}

std::vector<double> attention_targets(const Document& doc, const FactorVocabulary& vocab,
                                      const StrengthMatrix& strengths, std::string_view gold) {
  const auto o = strengths.outcome_index(charge_variable(gold));
  if (!o) throw Error("charge '" + std::string(gold) + "' has no strength column");
  const std::size_t n = doc.tokens.size();
  std::vector<double> g(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = vocab.factor_of(doc.tokens[i]);
    if (!f) continue;
    const auto row = strengths.factor_index(vocab.factors()[*f].id);
    if (!row) continue;
    g[i] = std::max(0.0, strengths.at(*row, *o));
    total += g[i];
  }
  if (total == 0.0) {
    std::fill(g.begin(), g.end(), n ? 1.0 / static_cast<double>(n) : 0.0);
    return g;
  }
  for (double& v : g) v /= total;
  return g;
}

FairnessReport fairness_metrics(std::span<const std::string> predictions, std::span<const std::string> labels,
                                std::span<const std::string> groups, std::string_view positive_charge) {
  if (predictions.size() != labels.size() || labels.size() != groups.size())
    throw Error("predictions, labels and groups must have equal length");
  if (predictions.empty()) throw Error("fairness metrics need at least one sample");

  struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0, n = 0;
  };
  auto add = [&](Confusion& c, std::size_t i) {
    const bool pred = predictions[i] == positive_charge, gold = labels[i] == positive_charge;
    ++c.n;
    if (pred && gold) ++c.tp;
    else if (pred) ++c.fp;
    else if (gold) ++c.fn;
    else ++c.tn;
  };
  auto rate = [](std::size_t num, std::size_t den, const std::string& what) {
    if (den == 0) {
      warn(what + " has no denominator; reporting 0");
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };

  Confusion all;
  std::map<std::string, Confusion> per;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    add(all, i);
    add(per[groups[i]], i);
  }
  FairnessReport report;
  report.positive_charge = std::string(positive_charge);
  report.fpr = rate(all.fp, all.fp + all.tn, "overall FPR");
  report.fnr = rate(all.fn, all.fn + all.tp, "overall FNR");
  for (const auto& [g, c] : per) {
    GroupRates r{g, c.n, rate(c.fp, c.fp + c.tn, "FPR of group '" + g + "'"),
                 rate(c.fn, c.fn + c.tp, "FNR of group '" + g + "'")};
    report.fped += std::abs(report.fpr - r.fpr);
    report.fned += std::abs(report.fnr - r.fnr);
    report.groups.push_back(std::move(r));
  }
  return report;
}

}  // namespace gci
