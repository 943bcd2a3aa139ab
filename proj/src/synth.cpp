#include "gci/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gci/common.hpp"

namespace gci {

std::size_t ScmSpec::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i].name == name) return i;
  throw Error("unknown SCM variable '" + std::string(name) + "'");
}

void ScmSpec::validate() const {
  if (variables.empty()) throw Error("SCM has no variables");
  std::set<std::string> names;
  for (const auto& v : variables)
    if (!names.insert(v.name).second) throw Error("duplicate SCM variable '" + v.name + "'");
  for (const auto& v : variables) {
    for (const auto& p : v.parents) {
      if (!names.contains(p)) throw Error("variable '" + v.name + "' has unknown parent '" + p + "'");
      if (p == v.name) throw Error("variable '" + v.name + "' is its own parent");
    }
    if (v.parents.size() > 20) throw Error("variable '" + v.name + "' has too many parents");
    if (v.cpt.size() != (std::size_t{1} << v.parents.size()))
      throw Error("variable '" + v.name + "' needs " + std::to_string(std::size_t{1} << v.parents.size()) +
                  " probabilities");
    for (double p : v.cpt)
      if (!(p >= 0.0 && p <= 1.0)) throw Error("variable '" + v.name + "' has a probability outside [0,1]");
  }
  for (const auto& [var, tokens] : keywords) {
    if (!names.contains(var)) throw Error("keywords given for unknown variable '" + var + "'");
    if (tokens.empty()) throw Error("variable '" + var + "' has an empty keyword list");
  }
  if (label) {
    if (!names.contains(label->variable)) throw Error("label variable '" + label->variable + "' is unknown");
    if (label->charge_if_one == label->charge_if_zero) throw Error("label charges must differ");
  }
  topological_order();
}

std::vector<std::size_t> ScmSpec::topological_order() const {
  const std::size_t n = variables.size();
  std::vector<std::size_t> order;
  std::vector<bool> done(n, false);
  while (order.size() < n) {
    bool progressed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (done[i]) continue;
      const bool ready = std::all_of(variables[i].parents.begin(), variables[i].parents.end(),
                                     [&](const std::string& p) { return done[index_of(p)]; });
      if (!ready) continue;
      done[i] = true;
      order.push_back(i);
      progressed = true;
    }
    if (!progressed) throw Error("SCM graph is cyclic");
  }
  return order;
}

namespace {

ScmVariable root(std::string name, double p) { return {std::move(name), {}, {p}, false}; }

std::size_t parent_config(const ScmSpec& spec, const ScmVariable& v, const std::vector<int>& values) {
  std::size_t k = 0;
  for (std::size_t j = 0; j < v.parents.size(); ++j)
    if (values[spec.index_of(v.parents[j])]) k |= std::size_t{1} << j;
  return k;
}

/// Sum over all joint assignments of weight * value, with optional clamping.
template <typename F>
void enumerate(const ScmSpec& spec, const std::map<std::size_t, int>& clamp, F&& visit) {
  const std::size_t n = spec.variables.size();
  if (n > 24) throw Error("SCM too large for exact enumeration");
  const auto order = spec.topological_order();
  std::vector<int> values(n, 0);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    for (std::size_t i = 0; i < n; ++i) values[i] = (mask >> i) & 1;
    double p = 1.0;
    for (std::size_t i : order) {
      if (auto it = clamp.find(i); it != clamp.end()) {
        if (values[i] != it->second) {
          p = 0.0;
          break;
        }
        continue;
      }
      const double q = spec.variables[i].cpt[parent_config(spec, spec.variables[i], values)];
      p *= values[i] ? q : 1.0 - q;
      if (p == 0.0) break;
    }
    if (p > 0.0) visit(values, p);
  }
}

double interventional_mean(const ScmSpec& spec, std::size_t t, int value, std::size_t y) {
  double mean = 0.0;
  enumerate(spec, {{t, value}}, [&](const std::vector<int>& v, double p) { mean += p * v[y]; });
  return mean;
}

}  // namespace

ScmSpec confounded_spec() {
  ScmSpec s;
  s.variables = {root("C", 0.5), {"T", {"C"}, {0.2, 0.8}, false}, {"Y", {"T", "C"}, {0.2, 0.7, 0.5, 1.0}, false}};
  return s;
}

ScmSpec collider_spec() {
  ScmSpec s;
  s.variables = {root("A", 0.5), root("B", 0.5), {"C", {"A", "B"}, {0.1, 0.5, 0.5, 0.9}, false}};
  return s;
}

ScmSpec chain_spec() {
  ScmSpec s;
  s.variables = {root("A", 0.5), {"B", {"A"}, {0.1, 0.9}, false}, {"C", {"B"}, {0.1, 0.9}, false}};
  return s;
}

ScmSpec latent_spec() {
  ScmSpec s;
  s.variables = {root("A", 0.5),
                 root("L", 0.5),
                 root("C", 0.5),
                 {"B", {"A", "L"}, {0.1, 0.5, 0.5, 0.9}, false},
                 {"D", {"C", "L"}, {0.1, 0.5, 0.5, 0.9}, false}};
  s.variables[1].latent = true;
  return s;
}

ScmSpec disambiguation_spec() {
  ScmSpec s;
  s.variables = {root("lie", 0.5),
                 {"obtain", {"lie"}, {0.1, 0.9}, false},
                 {"cheat", {"obtain"}, {0.1, 0.9}, false},
                 {"threat", {"cheat"}, {0.95, 0.05}, false},
                 root("night", 0.3),
                 root("vehicle", 0.3),
                 root("phone", 0.3),
                 root("friend", 0.3),
                 // bit 0 = cheat, bit 1 = threat
                 {"fraud", {"cheat", "threat"}, {0.4, 0.97, 0.03, 0.6}, false}};
  s.keywords = {{"lie", {"lie", "deceive"}},       {"obtain", {"obtain", "acquire"}},
                {"cheat", {"cheat", "swindle"}},   {"threat", {"threaten", "intimidate"}},
                {"night", {"night", "midnight"}},  {"vehicle", {"car", "vehicle"}},
                {"phone", {"phone", "mobile"}},    {"friend", {"friend", "companion"}}};
  s.boilerplate = {"the", "defendant", "case", "court"};
  s.label = ScmLabel{"fraud", "fraud", "extortion"};
  return s;
}

ScmSpec preset_spec(std::string_view name) {
  if (name == "confounded") return confounded_spec();
  if (name == "collider") return collider_spec();
  if (name == "chain") return chain_spec();
  if (name == "latent") return latent_spec();
  if (name == "disambiguation") return disambiguation_spec();
  throw Error("unknown SCM preset '" + std::string(name) +
              "' (expected confounded, collider, chain, latent or disambiguation)");
}

double exact_ate(const ScmSpec& spec, std::string_view t, std::string_view y) {
  spec.validate();
  const std::size_t ti = spec.index_of(t), yi = spec.index_of(y);
  return interventional_mean(spec, ti, 1, yi) - interventional_mean(spec, ti, 0, yi);
}

double exact_naive_difference(const ScmSpec& spec, std::string_view t, std::string_view y) {
  spec.validate();
  const std::size_t ti = spec.index_of(t), yi = spec.index_of(y);
  double py[2] = {0, 0}, pt[2] = {0, 0};
  enumerate(spec, {}, [&](const std::vector<int>& v, double p) {
    pt[v[ti]] += p;
    py[v[ti]] += p * v[yi];
  });
  if (pt[0] == 0.0 || pt[1] == 0.0) throw Error("treatment never takes one of its values");
  return py[1] / pt[1] - py[0] / pt[0];
}

GroundTruth ground_truth(const ScmSpec& spec) {
  spec.validate();
  GroundTruth g;
  for (const auto& v : spec.variables) {
    if (v.latent) g.latent.push_back(v.name);
    for (const auto& p : v.parents) {
      g.edges.emplace_back(p, v.name);
      g.ate[{p, v.name}] = exact_ate(spec, p, v.name);
    }
  }
  auto linked = [&](const std::string& a, const std::string& b) {
    return std::find(g.edges.begin(), g.edges.end(), std::pair{a, b}) != g.edges.end() ||
           std::find(g.edges.begin(), g.edges.end(), std::pair{b, a}) != g.edges.end();
  };
  for (const auto& l : g.latent) {
    std::vector<std::string> kids;
    for (const auto& v : spec.variables)
      if (!v.latent && std::find(v.parents.begin(), v.parents.end(), l) != v.parents.end()) kids.push_back(v.name);
    std::sort(kids.begin(), kids.end());
    for (std::size_t i = 0; i < kids.size(); ++i)
      for (std::size_t j = i + 1; j < kids.size(); ++j)
        if (!linked(kids[i], kids[j])) g.confounded.emplace_back(kids[i], kids[j]);
  }
  std::sort(g.confounded.begin(), g.confounded.end());
  g.confounded.erase(std::unique(g.confounded.begin(), g.confounded.end()), g.confounded.end());
  return g;
}

namespace {

std::vector<std::vector<int>> sample_rows(const ScmSpec& spec, std::size_t n, std::uint64_t seed,
                                          const std::map<std::string, int>& interventions) {
  spec.validate();
  std::map<std::size_t, int> clamp;
  for (const auto& [name, value] : interventions) {
    if (value != 0 && value != 1) throw Error("intervention on '" + name + "' must be 0 or 1");
    clamp[spec.index_of(name)] = value;
  }
  const auto order = spec.topological_order();
  std::vector<std::vector<std::size_t>> parent_idx(spec.variables.size());
  for (std::size_t i = 0; i < spec.variables.size(); ++i)
    for (const auto& p : spec.variables[i].parents) parent_idx[i].push_back(spec.index_of(p));

  Rng rng(seed, {0});
  std::vector<std::vector<int>> rows(n, std::vector<int>(spec.variables.size(), 0));
  for (auto& values : rows) {
    for (std::size_t i : order) {
      if (auto it = clamp.find(i); it != clamp.end()) {
        values[i] = it->second;
        continue;
      }
      std::size_t k = 0;
      for (std::size_t j = 0; j < parent_idx[i].size(); ++j)
        if (values[parent_idx[i][j]]) k |= std::size_t{1} << j;
      values[i] = rng.bernoulli(spec.variables[i].cpt[k]) ? 1 : 0;
    }
  }
  return rows;
}

}  // namespace

FactorTable synth_table(const ScmSpec& spec, std::size_t n, std::uint64_t seed,
                        const std::map<std::string, int>& interventions) {
  const auto rows = sample_rows(spec, n, seed, interventions);
  std::vector<std::size_t> observed;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec.variables.size(); ++i) {
    if (spec.variables[i].latent) continue;
    observed.push_back(i);
    names.push_back(spec.variables[i].name);
  }
  std::vector<std::string> ids(n);
  for (std::size_t r = 0; r < n; ++r) ids[r] = "row" + std::to_string(r);
  FactorTable table(names, names.size(), std::move(ids));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < observed.size(); ++c) table.set(r, c, static_cast<std::uint8_t>(rows[r][observed[c]]));
  return table;
}

SynthCorpus synth_corpus(const ScmSpec& spec, std::size_t n, std::uint64_t seed, const SynthCorpusOptions& options) {
  spec.validate();
  if (!spec.label) throw Error("corpus generation needs a label variable");
  if (options.groups.empty()) throw Error("corpus generation needs at least one group");
  if (!(options.test_fraction >= 0.0 && options.test_fraction < 1.0)) throw Error("test fraction must lie in [0,1)");
  const auto rows = sample_rows(spec, n, seed, {});
  const auto order = spec.topological_order();
  const std::size_t label = spec.index_of(spec.label->variable);

  // Keyword variables in causal order; these also form the incidence table.
  std::vector<std::size_t> emitting;
  for (std::size_t i : order)
    if (!spec.variables[i].latent && spec.keywords.contains(spec.variables[i].name)) emitting.push_back(i);
  std::vector<std::string> inc_names;
  for (std::size_t i : emitting) inc_names.push_back(spec.variables[i].name);

  Rng tokens_rng(seed, {1});
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - options.test_fraction)));
  std::vector<Document> docs;
  std::vector<std::string> ids;
  docs.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    Document d;
    d.id = "doc" + std::to_string(r);
    d.tokens = spec.boilerplate;
    for (std::size_t i : emitting) {
      if (!rows[r][i]) continue;
      const auto& syn = spec.keywords.at(spec.variables[i].name);
      d.tokens.push_back(syn[tokens_rng.below(syn.size())]);
    }
    if (d.tokens.empty()) d.tokens.push_back("none");
    d.charge = rows[r][label] ? spec.label->charge_if_one : spec.label->charge_if_zero;
    d.group = options.groups[tokens_rng.below(options.groups.size())];
    d.split = r < n_train ? Split::train : Split::test;
    ids.push_back(d.id);
    docs.push_back(std::move(d));
  }
  FactorTable incidence(inc_names, inc_names.size(), ids);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < emitting.size(); ++c)
      incidence.set(r, c, static_cast<std::uint8_t>(rows[r][emitting[c]]));

  // Synonyms of one variable sit close to a shared random center.
  Rng emb_rng(seed, {2});
  const std::size_t dim = options.embedding_dim;
  std::map<std::string, std::vector<double>> vectors;
  auto random_vector = [&] {
    std::vector<double> v(dim);
    for (double& x : v) x = emb_rng.normal();
    return v;
  };
  for (std::size_t i : emitting) {
    const auto center = random_vector();
    for (const auto& tok : spec.keywords.at(spec.variables[i].name)) {
      auto v = center;
      for (double& x : v) x += options.synonym_spread * emb_rng.normal();
      vectors[tok] = std::move(v);
    }
  }
  for (const auto& tok : spec.boilerplate) vectors.emplace(tok, random_vector());

  return SynthCorpus{Corpus(std::move(docs), {spec.label->charge_if_one, spec.label->charge_if_zero}),
                     EmbeddingTable(dim, std::move(vectors)), std::move(incidence), ground_truth(spec)};
}

}  // namespace gci
