#include <cmath>

#include "doctest.h"
#include "gci/common.hpp"
#include "gci/synth.hpp"

using namespace gci;

namespace {

double column_mean(const FactorTable& t, std::string_view name) {
  const auto c = t.column(t.require(name));
  double s = 0.0;
  for (auto v : c) s += v;
  return s / static_cast<double>(c.size());
}

}  // namespace

TEST_CASE("sampling is deterministic in the seed") {
  const auto spec = confounded_spec();
  const auto a = synth_table(spec, 500, 3);
  CHECK(a == synth_table(spec, 500, 3));
  CHECK_FALSE(a == synth_table(spec, 500, 4));
  CHECK(a.variables() == std::vector<std::string>{"C", "T", "Y"});
  CHECK(a.row_ids()[0] == "row0");
}

TEST_CASE("exact effects by enumeration") {
  CHECK(exact_ate(confounded_spec(), "T", "Y") == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(exact_naive_difference(confounded_spec(), "T", "Y") == doctest::Approx(0.68).epsilon(1e-12));
  // Two noisy copies: 0.9 * 0.9 + 0.1 * 0.1 minus 2 * 0.9 * 0.1.
  CHECK(exact_ate(chain_spec(), "A", "C") == doctest::Approx(0.64).epsilon(1e-12));
  CHECK(exact_ate(chain_spec(), "C", "A") == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(exact_ate(collider_spec(), "A", "B") == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("interventional sampling agrees with enumeration") {
  const auto spec = confounded_spec();
  const auto on = synth_table(spec, 1'000'000, 1, {{"T", 1}});
  const auto off = synth_table(spec, 1'000'000, 2, {{"T", 0}});
  CHECK(column_mean(on, "T") == 1.0);
  CHECK(column_mean(off, "T") == 0.0);
  CHECK(std::abs(column_mean(on, "Y") - column_mean(off, "Y") - exact_ate(spec, "T", "Y")) <= 0.01);
  CHECK_THROWS_AS(synth_table(spec, 10, 1, {{"T", 2}}), Error);
  CHECK_THROWS_AS(synth_table(spec, 10, 1, {{"nope", 1}}), Error);
}

TEST_CASE("latent variables are hidden and reported as confounding") {
  const auto spec = latent_spec();
  const auto t = synth_table(spec, 100, 1);
  CHECK(t.variables() == std::vector<std::string>{"A", "C", "B", "D"});
  const auto g = ground_truth(spec);
  CHECK(g.latent == std::vector<std::string>{"L"});
  REQUIRE(g.confounded.size() == 1);
  CHECK(g.confounded[0] == std::pair<std::string, std::string>{"B", "D"});
  CHECK(g.ate.at({"A", "B"}) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("malformed specs are rejected") {
  ScmSpec s;
  s.variables = {{"A", {"Z"}, {0.5, 0.5}, false}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.variables = {{"A", {}, {0.5, 0.5}, false}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.variables = {{"A", {}, {1.5}, false}};
  CHECK_THROWS_AS(s.validate(), Error);
  s.variables = {{"A", {"B"}, {0.5, 0.5}, false}, {"B", {"A"}, {0.5, 0.5}, false}};
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK_THROWS_AS(preset_spec("unknown"), Error);
  for (auto name : {"confounded", "collider", "chain", "latent", "disambiguation"}) CHECK_NOTHROW(preset_spec(name).validate());
}

TEST_CASE("synthetic corpus renders factors as keywords") {
  const auto spec = disambiguation_spec();
  const auto data = synth_corpus(spec, 1000, 5);
  const auto& docs = data.corpus.documents();
  REQUIRE(docs.size() == 1000);
  CHECK(data.corpus.filtered(Split::test).size() == 200);
  CHECK(data.corpus.charges() == std::vector<std::string>{"fraud", "extortion"});

  const auto& inc = data.incidence;
  REQUIRE(inc.rows() == docs.size());
  for (std::size_t r = 0; r < docs.size(); ++r) {
    const auto& tokens = docs[r].tokens;
    for (std::size_t c = 0; c < inc.cols(); ++c) {
      const auto& synonyms = spec.keywords.at(inc.variables()[c]);
      std::size_t hits = 0;
      for (const auto& tok : tokens) hits += std::count(synonyms.begin(), synonyms.end(), tok);
      CHECK(hits == inc.at(r, c));
    }
    for (const auto& b : spec.boilerplate) CHECK(std::count(tokens.begin(), tokens.end(), b) == 1);
    REQUIRE(docs[r].group);
  }
  for (const auto& [var, synonyms] : spec.keywords)
    for (const auto& w : synonyms) CHECK(data.embeddings.find(w));
  CHECK(synth_corpus(spec, 1000, 5).corpus == data.corpus);
  CHECK_THROWS_AS(synth_corpus(confounded_spec(), 10, 1), Error);
}

TEST_CASE("synonyms sit closer to each other than to other keywords") {
  const auto spec = disambiguation_spec();
  const auto data = synth_corpus(spec, 50, 2);
  auto dist = [&](const std::string& a, const std::string& b) {
    const auto x = *data.embeddings.find(a);
    const auto y = *data.embeddings.find(b);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
  };
  CHECK(dist("lie", "deceive") < dist("lie", "cheat"));
  CHECK(dist("threaten", "intimidate") < dist("threaten", "phone"));
}
