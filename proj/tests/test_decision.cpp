#include <cmath>

#include "doctest.h"
#include "gci/common.hpp"
#include "gci/decision.hpp"

using namespace gci;

namespace {

StrengthMatrix example_matrix() {
  StrengthMatrix m;
  m.factors = {"A", "B", "C"};
  m.outcomes = {charge_variable("x"), charge_variable("y")};
  m.psi_tilde = {0.5, 0.0, 0.2, -0.1, 0.0, 0.0};
  return m;
}

struct Dataset {
  std::vector<std::vector<double>> x;
  std::vector<std::size_t> y;
};

/// Label is 1 exactly when feature 0 exceeds 0.5; feature 1 is noise.
Dataset separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    d.x.push_back({a, b});
    d.y.push_back(a > 0.5 ? 1 : 0);
  }
  return d;
}

DecisionTree leaf(std::size_t label) {
  DecisionTree t;
  t.nodes.push_back({-1, 0.0, -1, -1, label});
  return t;
}

WeightedDagSet single(Dag d) {
  WeightedDagSet s;
  s.nodes = d.nodes();
  s.dags = {std::move(d)};
  s.raw_bic = {0.0};
  s.weights = {1.0};
  return s;
}

}  // namespace

TEST_CASE("charge scores sum strengths of present treatments") {
  const auto m = example_matrix();
  const auto tr = treatment_sets(m);
  CHECK(tr == TreatmentSets{{0, 1}, {1}});

  const std::vector<std::uint8_t> ab = {1, 1, 0}, c = {0, 0, 1}, b = {0, 1, 0};
  const auto s = charge_scores(ab, m, tr, "d1");
  CHECK(s.id == "d1");
  CHECK(s.scores[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(s.scores[1] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(charge_scores(c, m).scores == std::vector<double>{0.0, 0.0});
  CHECK(charge_scores(b, m).scores == std::vector<double>{0.2, -0.1});
  const std::vector<std::uint8_t> short_row = {1};
  CHECK_THROWS_AS(charge_scores(short_row, m), Error);
}

TEST_CASE("presence rows follow the strength matrix order") {
  FactorTable t({"B", "A", charge_variable("x"), charge_variable("y")}, 2, {"r0", "r1"});
  t.set(0, 0, 1);
  t.set(1, 1, 1);
  const auto m = example_matrix();
  CHECK(presence_row(t, 0, m) == std::vector<std::uint8_t>{0, 1, 0});
  CHECK(presence_row(t, 1, m) == std::vector<std::uint8_t>{1, 0, 0});
  const auto all = score_table(t, m);
  REQUIRE(all.size() == 2);
  CHECK(all[1].id == "r1");
  CHECK(all[1].scores[0] == doctest::Approx(0.5));
}

TEST_CASE("forest fits a separable problem") {
  const auto d = separable(400, 1);
  const auto f = train_forest(d.x, d.y, {"neg", "pos"}, 25, 6, 3);
  CHECK(f.trees.size() == 25);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.x.size(); ++i) correct += predict_index(f, d.x[i]) == d.y[i];
  CHECK(correct >= 396);
  const std::vector<double> low = {0.1, 0.9}, high = {0.9, 0.1};
  CHECK(predict(f, low) == "neg");
  CHECK(predict(f, high) == "pos");
  for (const auto& t : f.trees) CHECK(t.depth() <= 6);
}

TEST_CASE("forest training is deterministic in the seed") {
  const auto d = separable(200, 2);
  const auto a = train_forest(d.x, d.y, {"neg", "pos"}, 10, 5, 7);
  CHECK(a == train_forest(d.x, d.y, {"neg", "pos"}, 10, 5, 7));
  CHECK_FALSE(a == train_forest(d.x, d.y, {"neg", "pos"}, 10, 5, 8));
}

TEST_CASE("scaling features scales thresholds and keeps predictions") {
  const auto d = separable(300, 4);
  Dataset scaled = d;
  for (auto& row : scaled.x)
    for (double& v : row) v *= 4.0;
  const auto a = train_forest(d.x, d.y, {"neg", "pos"}, 15, 5, 9);
  const auto b = train_forest(scaled.x, scaled.y, {"neg", "pos"}, 15, 5, 9);
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k)
      CHECK(b.trees[t].nodes[k].threshold == 4.0 * a.trees[t].nodes[k].threshold);
  }
  const auto probe = separable(100, 5);
  for (const auto& x : probe.x) {
    const std::vector<double> x4 = {4 * x[0], 4 * x[1]};
    CHECK(predict_index(a, x) == predict_index(b, x4));
  }
}

TEST_CASE("degenerate training sets give single leaves") {
  const std::vector<std::vector<double>> x = {{1.0}, {1.0}, {1.0}, {1.0}};
  const std::vector<std::size_t> mixed = {0, 1, 1, 0}, same = {0, 0, 0, 0}, unused = {1, 1, 1, 1};
  const auto f = train_forest(x, mixed, {"a", "b"}, 5, 4, 1);
  for (const auto& t : f.trees) CHECK(t.nodes.size() == 1);
  CHECK_THROWS_AS(train_forest(x, same, {"b"}, 5, 4, 1), Error);
  CHECK_THROWS_AS(train_forest(x, unused, {"a", "b"}, 5, 4, 1), Error);
  CHECK_THROWS_AS(predict(f, std::vector<double>{1.0, 2.0}), Error);
  CHECK_THROWS_AS(train_forest(x, std::vector<std::size_t>{0, 1}, {"a", "b"}, 5, 4, 1), Error);
}

TEST_CASE("vote ties go to the earlier charge") {
  ForestModel m;
  m.charges = {"a", "b", "c"};
  m.n_features = 1;
  m.n_trees = 2;
  m.trees = {leaf(2), leaf(1)};
  const std::vector<double> x = {0.0};
  CHECK(predict(m, x) == "b");
  m.trees.push_back(leaf(2));
  m.n_trees = 3;
  CHECK(predict(m, x) == "c");
}

TEST_CASE("chains in a two-edge graph") {
  Dag d({"A", "B", charge_variable("c")});
  d.add_edge(0, 1);
  d.add_edge(1, 2);
  const auto set = single(d);
  const std::set<std::string, std::less<>> both = {"A", "B"};
  const auto chains = extract_chains(set, both, "c", 3);
  REQUIRE(chains.size() == 2);
  CHECK(chains[0].path == std::vector<std::string>{"A", "B"});
  CHECK(chains[1].path == std::vector<std::string>{"B"});
  CHECK(chains[0].weight == 1.0);
  CHECK(chains[0].terminal_charge == "c");

  CHECK(extract_chains(set, both, "c", 1).size() == 1);
  const std::set<std::string, std::less<>> only_a = {"A"};
  CHECK(extract_chains(set, only_a, "c", 3).empty());
  CHECK_THROWS_AS(extract_chains(set, both, "c", 0), Error);
}

TEST_CASE("chain weights add across graphs") {
  Dag a({"A", "B", charge_variable("c")}), b = a;
  a.add_edge(0, 1);
  a.add_edge(1, 2);
  b.add_edge(0, 2);
  WeightedDagSet set;
  set.nodes = a.nodes();
  set.dags = {a, b, a};
  set.raw_bic = {0, 0, 0};
  set.weights = {0.5, 0.3, 0.2};
  const std::set<std::string, std::less<>> both = {"A", "B"};
  const auto chains = extract_chains(set, both, "c", 2);
  REQUIRE(chains.size() == 3);
  CHECK(chains[0].weight == doctest::Approx(0.7));
  CHECK(chains[1].weight == doctest::Approx(0.7));
  CHECK(chains[0].path == std::vector<std::string>{"A", "B"});
  CHECK(chains[2].path == std::vector<std::string>{"A"});
  CHECK(chains[2].weight == doctest::Approx(0.3));
}

TEST_CASE("attention targets") {
  const FactorVocabulary vocab({{"f0", {"lie", "deceive"}, "lie", 1.0}, {"f1", {"threaten"}, "threaten", 1.0}});
  StrengthMatrix m;
  m.factors = {"f0", "f1"};
  m.outcomes = {charge_variable("x")};

  Document doc{"d", {"the", "lie", "threaten", "court"}, "x", std::nullopt, Split::train};
  m.psi_tilde = {0.0, -0.2};
  for (double g : attention_targets(doc, vocab, m, "x")) CHECK(g == 0.25);

  m.psi_tilde = {0.4, 0.0};
  CHECK(attention_targets(doc, vocab, m, "x") == std::vector<double>{0.0, 1.0, 0.0, 0.0});

  doc.tokens = {"lie", "deceive", "threaten"};
  m.psi_tilde = {0.3, 0.6};
  const auto g = attention_targets(doc, vocab, m, "x");
  CHECK(g[0] == doctest::Approx(0.25));
  CHECK(g[1] == doctest::Approx(0.25));
  CHECK(g[2] == doctest::Approx(0.5));
  CHECK_THROWS_AS(attention_targets(doc, vocab, m, "z"), Error);
}

TEST_CASE("equal error rates across groups give zero gaps") {
  const std::vector<std::string> pred = {"p", "n", "p", "n"}, gold = {"p", "p", "n", "n"}, grp = {"a", "a", "b", "b"};
  // Both groups have one of each outcome mirrored: a has TP and FN, b has FP and TN.
  const std::vector<std::string> pred2 = {"p", "n", "n", "p", "p", "n", "n", "p"};
  const std::vector<std::string> gold2 = {"p", "p", "n", "n", "p", "p", "n", "n"};
  const std::vector<std::string> grp2 = {"a", "a", "a", "a", "b", "b", "b", "b"};
  const auto r = fairness_metrics(pred2, gold2, grp2, "p");
  CHECK(r.fpr == 0.5);
  CHECK(r.fnr == 0.5);
  CHECK(r.fped == 0.0);
  CHECK(r.fned == 0.0);
  REQUIRE(r.groups.size() == 2);
  CHECK(r.groups[0].group == "a");
  CHECK(r.groups[0].count == 4);

  std::size_t warnings = 0;
  ScopedWarningSink sink([&](std::string_view) { ++warnings; });
  const auto partial = fairness_metrics(pred, gold, grp, "p");
  CHECK(warnings == 2);  // group a has no negatives, group b no positives
  CHECK(partial.groups[0].fpr == 0.0);
}

TEST_CASE("false positive gap by hand") {
  std::vector<std::string> pred, gold, grp;
  auto add = [&](const char* g, std::size_t negatives, std::size_t false_pos) {
    for (std::size_t i = 0; i < negatives; ++i) {
      pred.emplace_back(i < false_pos ? "p" : "n");
      gold.emplace_back("n");
      grp.emplace_back(g);
    }
    pred.emplace_back("p");
    gold.emplace_back("p");
    grp.emplace_back(g);
  };
  add("a", 40, 4);
  add("b", 10, 2);
  const auto r = fairness_metrics(pred, gold, grp, "p");
  CHECK(r.fpr == doctest::Approx(0.12).epsilon(1e-15));
  CHECK(r.groups[0].fpr == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(r.groups[1].fpr == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(r.fped == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.fned == 0.0);
  CHECK_THROWS_AS(fairness_metrics(pred, gold, std::vector<std::string>{"a"}, "p"), Error);
}
