#include <cmath>

#include "doctest.h"
#include "gci/common.hpp"
#include "gci/effects.hpp"
#include "gci/synth.hpp"

using namespace gci;

namespace {

FactorTable make_table(const std::vector<std::string>& names, const std::vector<std::vector<std::uint8_t>>& cols) {
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < cols.front().size(); ++r) ids.push_back("r" + std::to_string(r));
  FactorTable t(names, names.size(), ids);
  for (std::size_t c = 0; c < cols.size(); ++c) t.replace_column(c, cols[c]);
  return t;
}

std::vector<std::uint8_t> coins(std::size_t n, double p, Rng& rng) {
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = rng.bernoulli(p);
  return v;
}

FactorTable flipped(const FactorTable& t, std::string_view col) {
  FactorTable out = t;
  const std::size_t c = t.require(col);
  std::vector<std::uint8_t> v(t.column(c).begin(), t.column(c).end());
  for (auto& x : v) x = 1 - x;
  out.replace_column(c, v);
  return out;
}

WeightedDagSet dag_set(std::vector<Dag> dags, std::vector<double> weights) {
  WeightedDagSet s;
  s.nodes = dags.front().nodes();
  s.dags = std::move(dags);
  s.raw_bic.assign(weights.size(), 0.0);
  s.weights = std::move(weights);
  return s;
}

EdgeStrength strength(std::string t, std::string y, std::size_t q, double psi) {
  EdgeStrength s;
  s.treatment = std::move(t);
  s.outcome = std::move(y);
  s.graph_index = q;
  s.psi_hat = psi;
  return s;
}

const std::vector<std::string> kNone;
const std::vector<std::string> kC = {"C"};
const std::vector<std::string> kY = {"Y"};
const std::vector<std::string> kZ = {"Z"};

}  // namespace

TEST_CASE("confounder sets are the other parents of the treatment") {
  Dag d({"A", "B", "T", "Y"});
  d.add_edge(1, 2);
  d.add_edge(0, 2);
  d.add_edge(2, 3);
  CHECK(confounder_set(d, "T", "Y") == std::vector<std::string>{"A", "B"});
  CHECK(confounder_set(d, "A", "T").empty());
  CHECK_THROWS_AS(confounder_set(d, "Y", "T"), Error);

  Dag bare({"T", "Y"});
  bare.add_edge(0, 1);
  CHECK(confounder_set(bare, "T", "Y").empty());

  // A descendant of Y never enters the set: {A -> T, T -> Y, Y -> B} gives {A}.
  Dag tail({"A", "B", "T", "Y"});
  tail.add_edge(0, 2);
  tail.add_edge(2, 3);
  tail.add_edge(3, 1);
  CHECK(confounder_set(tail, "T", "Y") == std::vector<std::string>{"A"});
}

TEST_CASE("propensity of an independent treatment stays near one half") {
  Rng rng(1);
  const auto t = make_table({"Z", "T"}, {coins(4000, 0.5, rng), coins(4000, 0.5, rng)});
  const auto m = fit_propensity(t, "T", kZ);
  const std::uint8_t zero = 0, one = 1;
  CHECK(std::abs(m.predict(std::span(&zero, 1)) - 0.5) < 0.05);
  CHECK(std::abs(m.predict(std::span(&one, 1)) - 0.5) < 0.05);
}

TEST_CASE("no confounders give the marginal rate") {
  std::vector<std::uint8_t> tc(1000, 0);
  for (std::size_t i = 0; i < 300; ++i) tc[i * 3] = 1;
  const auto t = make_table({"T"}, {tc});
  const auto m = fit_propensity(t, "T", kNone);
  CHECK(m.predict({}) == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("a treatment copying its confounder is separated") {
  Rng rng(2);
  const auto z = coins(2000, 0.5, rng);
  const auto t = make_table({"C", "T"}, {z, z});
  const auto m = fit_propensity(t, "T", kC);
  const std::uint8_t zero = 0, one = 1;
  CHECK(m.predict(std::span(&one, 1)) > 0.9);
  CHECK(m.predict(std::span(&zero, 1)) < 0.1);
  CHECK_THROWS_AS(fit_propensity(make_table({"T"}, {std::vector<std::uint8_t>(10, 1)}), "T", kNone), Error);
  const std::vector<std::string> self = {"T"};
  CHECK_THROWS_AS(fit_propensity(t, "T", self), Error);
}

TEST_CASE("outcome equal to treatment has effect one") {
  Rng rng(3);
  const auto tc = coins(500, 0.4, rng);
  const auto t = make_table({"T", "Y"}, {tc, tc});
  const auto s = estimate_ate(t, "T", "Y", kNone);
  CHECK(s.psi_hat == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.n_matched == 500);
}

TEST_CASE("independent outcome has no effect") {
  Rng rng(4);
  const auto t = make_table({"C", "T", "Y"}, {coins(5000, 0.5, rng), coins(5000, 0.5, rng), coins(5000, 0.5, rng)});
  CHECK(std::abs(estimate_ate(t, "T", "Y", kC).psi_hat) < 0.05);
}

TEST_CASE("matching on the confounder recovers the interventional effect") {
  const auto spec = confounded_spec();
  const double truth = exact_ate(spec, "T", "Y");
  const double naive_truth = exact_naive_difference(spec, "T", "Y");
  CHECK(truth == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(naive_truth == doctest::Approx(0.68).epsilon(1e-12));

  const auto t = synth_table(spec, 20000, 11);
  CHECK(std::abs(estimate_ate(t, "T", "Y", kC).psi_hat - truth) <= 0.05);
  CHECK(std::abs(naive_difference(t, "T", "Y") - naive_truth) <= 0.03);
}

TEST_CASE("flipping the treatment negates the estimate") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t = synth_table(confounded_spec(), 3000, seed);
    const double a = estimate_ate(t, "T", "Y", kC).psi_hat;
    const double b = estimate_ate(flipped(t, "T"), "T", "Y", kC).psi_hat;
    CHECK(a == doctest::Approx(-b).epsilon(1e-12));
  }
}

TEST_CASE("estimates are bounded by one") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50 + rng.below(200);
    const auto t = make_table({"A", "B", "T", "Y"}, {coins(n, 0.5, rng), coins(n, 0.3, rng), coins(n, 0.5, rng),
                                                     coins(n, 0.5, rng)});
    const std::vector<std::string> z = {"A", "B"};
    CHECK(std::abs(estimate_ate(t, "T", "Y", z).psi_hat) <= 1.0);
  }
}

TEST_CASE("without confounders the estimate is the difference of means") {
  const auto t = synth_table(confounded_spec(), 4000, 6);
  CHECK(estimate_ate(t, "T", "Y", kNone).psi_hat == doctest::Approx(naive_difference(t, "T", "Y")).epsilon(1e-12));
}

TEST_CASE("a caliper can only drop matches") {
  const auto t = synth_table(confounded_spec(), 2000, 8);
  const auto open = estimate_ate(t, "T", "Y", kC);
  MatchingOptions tight;
  tight.caliper = 1e-9;
  const auto closed = estimate_ate(t, "T", "Y", kC, tight);
  CHECK(closed.n_matched <= open.n_matched);
}

TEST_CASE("a constant treatment fails with a warning and zero strength") {
  Rng rng(9);
  const auto t = make_table({"T", "Y"}, {std::vector<std::uint8_t>(100, 1), coins(100, 0.5, rng)});
  CHECK_THROWS_AS(estimate_ate(t, "T", "Y", kNone), Error);

  Dag d({"T", "Y"});
  d.add_edge(0, 1);
  std::size_t warnings = 0;
  ScopedWarningSink sink([&](std::string_view) { ++warnings; });
  const auto all = estimate_all(dag_set({d}, {1.0}), t, kY);
  REQUIRE(all.size() == 1);
  CHECK(all[0].failed);
  CHECK(all[0].psi_hat == 0.0);
  CHECK(warnings == 1);
}

TEST_CASE("a single graph of weight one passes estimates through") {
  const auto t = synth_table(confounded_spec(), 3000, 12);
  Dag d(t.variables());
  d.add_edge(0, 1);
  d.add_edge(0, 2);
  d.add_edge(1, 2);
  const auto set = dag_set({d}, {1.0});
  const auto all = estimate_all(set, t, kY);
  REQUIRE(all.size() == 2);  // C -> Y and T -> Y
  const auto m = aggregate_strengths(all, set, kY);
  CHECK(m.factors == std::vector<std::string>{"C", "T"});
  CHECK(m.get("T", "Y") == estimate_ate(t, "T", "Y", kC).psi_hat);
  CHECK(m.provenance.size() == 2);

  EstimateOptions every;
  every.all_edges = true;
  CHECK(estimate_all(set, t, kY, every).size() == 3);
}

TEST_CASE("aggregation weights absent edges as zero") {
  Dag with({"T", "Y"}), without({"T", "Y"});
  with.add_edge(0, 1);
  const auto set = dag_set({with, without}, {0.5, 0.5});
  const std::vector<EdgeStrength> s = {strength("T", "Y", 0, 0.6)};
  CHECK(aggregate_strengths(s, set, kY).get("T", "Y") == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("aggregation is linear in the weights and ignores graph order") {
  Dag a({"S", "T", "Y"}), b({"S", "T", "Y"}), c({"S", "T", "Y"});
  a.add_edge(1, 2);
  b.add_edge(1, 2);
  b.add_edge(0, 2);
  c.add_edge(0, 2);
  const std::vector<double> w = {0.2, 0.5, 0.3};
  const std::vector<EdgeStrength> s = {strength("T", "Y", 0, 0.4), strength("T", "Y", 1, -0.1),
                                       strength("S", "Y", 1, 0.25), strength("S", "Y", 2, 0.5)};
  const auto m = aggregate_strengths(s, dag_set({a, b, c}, w), kY);
  CHECK(m.get("T", "Y") == doctest::Approx(0.2 * 0.4 + 0.5 * -0.1).epsilon(1e-14));
  CHECK(m.get("S", "Y") == doctest::Approx(0.5 * 0.25 + 0.3 * 0.5).epsilon(1e-14));

  // Same graphs in reverse order with their strengths reindexed.
  std::vector<EdgeStrength> r = s;
  for (auto& e : r) e.graph_index = 2 - e.graph_index;
  const auto mr = aggregate_strengths(r, dag_set({c, b, a}, {0.3, 0.5, 0.2}), kY);
  CHECK(mr.get("T", "Y") == doctest::Approx(m.get("T", "Y")).epsilon(1e-14));
  CHECK(mr.get("S", "Y") == doctest::Approx(m.get("S", "Y")).epsilon(1e-14));
}

TEST_CASE("refuters on a well-identified effect") {
  const auto t = synth_table(confounded_spec(), 4000, 13);
  const auto rc = refute(t, "T", "Y", kC, RefuterMode::random_confounder, 5, 1);
  CHECK(rc.pass);
  CHECK(rc.repeats == 5);
  const auto pl = refute(t, "T", "Y", kC, RefuterMode::placebo_treatment, 5, 1);
  CHECK(pl.pass);
  CHECK(std::abs(pl.refuted_psi) <= 0.05);
  const auto ds = refute(t, "T", "Y", kC, RefuterMode::data_subset, 5, 1);
  CHECK(ds.pass);
  CHECK(ds.original_psi == rc.original_psi);

  const auto again = refute(t, "T", "Y", kC, RefuterMode::placebo_treatment, 5, 1);
  CHECK(again.refuted_psi == pl.refuted_psi);
  const auto ds2 = refute(t, "T", "Y", kC, RefuterMode::data_subset, 10, 4);
  CHECK(refute(t, "T", "Y", kC, RefuterMode::data_subset, 10, 4).refuted_psi == ds2.refuted_psi);
  CHECK_THROWS_AS(refute(t, "T", "Y", kC, RefuterMode::data_subset, 0, 1), Error);
}

TEST_CASE("refuter names round trip") {
  for (auto m : {RefuterMode::random_confounder, RefuterMode::placebo_treatment, RefuterMode::data_subset})
    CHECK(parse_refuter_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_refuter_mode("bogus"), Error);
}

TEST_CASE("strengths from a planted model match the closed forms") {
  const auto spec = confounded_spec();
  const auto t = synth_table(spec, 5000, 21);

  Dag truth(t.variables());
  truth.add_edge(0, 1);
  truth.add_edge(0, 2);
  truth.add_edge(1, 2);
  const auto one = dag_set({truth}, {1.0});
  const auto m1 = aggregate_strengths(estimate_all(one, t, kY), one, kY);
  CHECK(std::abs(m1.get("T", "Y") - exact_ate(spec, "T", "Y")) <= 0.05);
  CHECK(std::abs(m1.get("C", "Y") - exact_ate(spec, "C", "Y")) <= 0.05);

  // C - T is not orientable from data, so sampled graphs split between
  // adjusting for C and not: the aggregate lands between ATE and naive.
  BackgroundKnowledge bk;
  bk.forbidden = {{"Y", "C"}, {"Y", "T"}};
  const auto set = weight_graphs(sample_dags(discover(t, bk).pag, 5, bk, 3), t);
  const double mixed = aggregate_strengths(estimate_all(set, t, kY), set, kY).get("T", "Y");
  CHECK(mixed >= exact_ate(spec, "T", "Y") - 0.05);
  CHECK(mixed <= exact_naive_difference(spec, "T", "Y") + 0.03);
}

TEST_CASE("aggregated strength through discovery and Q = 5 sampled graphs") {
  const auto spec = chain_spec();
  const auto t = synth_table(spec, 5000, 22);
  BackgroundKnowledge bk;
  bk.forbidden = {{"C", "A"}, {"C", "B"}};
  const auto set = weight_graphs(sample_dags(discover(t, bk).pag, 5, bk, 1), t);
  const std::vector<std::string> out = {"C"};
  const auto m = aggregate_strengths(estimate_all(set, t, out), set, out);
  CHECK(std::abs(m.get("B", "C") - exact_ate(spec, "B", "C")) <= 0.07);
}
