#include "gci/serialize.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "gci/common.hpp"

namespace gci {

namespace {

/// Turns library JSON exceptions into gci::Error with some context.
template <typename F>
auto guarded(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed " + std::string(what) + ": " + e.what());
  }
}

}  // namespace

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

Json keywords_to_json(std::span<const KeywordScore> keywords) {
  Json out = Json::array();
  for (const auto& k : keywords) out.push_back({{"word", k.word}, {"charge", k.charge}, {"importance", k.importance}});
  return out;
}

std::vector<KeywordScore> keywords_from_json(const Json& j) {
  return guarded("keywords", [&] {
    std::vector<KeywordScore> out;
    for (const auto& k : j)
      out.push_back({k.at("word").get<std::string>(), k.at("charge").get<std::string>(), k.at("importance").get<double>()});
    return out;
  });
}

Json vocabulary_to_json(const FactorVocabulary& vocab) {
  Json out = Json::array();
  for (const auto& f : vocab.factors())
    out.push_back({{"id", f.id}, {"label", f.label}, {"importance", f.importance}, {"members", f.members}});
  return out;
}

FactorVocabulary vocabulary_from_json(const Json& j) {
  return guarded("factor vocabulary", [&] {
    std::vector<Factor> factors;
    for (const auto& f : j)
      factors.push_back({f.at("id").get<std::string>(), f.at("members").get<std::set<std::string>>(),
                         f.at("label").get<std::string>(), f.at("importance").get<double>()});
    return FactorVocabulary(std::move(factors));
  });
}

Json background_to_json(const BackgroundKnowledge& bk) {
  Json forbidden = Json::array();
  for (const auto& [a, b] : bk.forbidden) forbidden.push_back({a, b});
  return {{"forbidden", forbidden}};
}

BackgroundKnowledge background_from_json(const Json& j) {
  return guarded("background knowledge", [&] {
    BackgroundKnowledge bk;
    for (const auto& e : j.at("forbidden")) bk.forbidden.emplace(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    return bk;
  });
}

Json pag_to_json(const Pag& pag, const SepsetMap& sepsets) {
  const auto& names = pag.nodes();
  Json edges = Json::array();
  for (const auto& e : pag.edges())
    edges.push_back({{"a", names[e.a]},
                     {"b", names[e.b]},
                     {"mark_a", std::string(to_string(e.mark_a))},
                     {"mark_b", std::string(to_string(e.mark_b))}});
  Json seps = Json::array();
  for (const auto& [pair, set] : sepsets.entries()) {
    Json s = Json::array();
    for (std::size_t v : set) s.push_back(names[v]);
    seps.push_back({{"a", names[pair.first]}, {"b", names[pair.second]}, {"set", s}});
  }
  return {{"nodes", names}, {"edges", edges}, {"sepsets", seps}};
}

DiscoveryResult pag_from_json(const Json& j) {
  return guarded("PAG", [&] {
    DiscoveryResult r{Pag(j.at("nodes").get<std::vector<std::string>>()), {}};
    for (const auto& e : j.at("edges"))
      r.pag.add_edge(r.pag.require(e.at("a").get<std::string>()), r.pag.require(e.at("b").get<std::string>()),
                     parse_mark(e.at("mark_a").get<std::string>()), parse_mark(e.at("mark_b").get<std::string>()));
    if (j.contains("sepsets")) {
      for (const auto& s : j.at("sepsets")) {
        std::vector<std::size_t> set;
        for (const auto& v : s.at("set")) set.push_back(r.pag.require(v.get<std::string>()));
        r.sepsets.record(r.pag.require(s.at("a").get<std::string>()), r.pag.require(s.at("b").get<std::string>()),
                         std::move(set));
      }
    }
    return r;
  });
}

Json dag_to_json(const Dag& dag) {
  Json edges = Json::array();
  for (const auto& [a, b] : dag.edges()) edges.push_back({dag.nodes()[a], dag.nodes()[b]});
  return {{"edges", edges}};
}

Json dags_to_json(const WeightedDagSet& set) {
  Json dags = Json::array();
  for (const auto& d : set.dags) dags.push_back(dag_to_json(d));
  return {{"seed", set.seed},
          {"Q", set.dags.size()},
          {"nodes", set.nodes},
          {"weight_mode", std::string(to_string(set.mode))},
          {"dags", dags},
          {"raw_bic", set.raw_bic},
          {"weights", set.weights}};
}

WeightedDagSet dags_from_json(const Json& j) {
  return guarded("graph set", [&] {
    WeightedDagSet set;
    set.seed = j.at("seed").get<std::uint64_t>();
    set.nodes = j.at("nodes").get<std::vector<std::string>>();
    set.mode = parse_weight_mode(j.value("weight_mode", std::string("softmax")));
    for (const auto& d : j.at("dags")) {
      Dag dag(set.nodes);
      for (const auto& e : d.at("edges"))
        dag.add_edge(dag.require(e.at(0).get<std::string>()), dag.require(e.at(1).get<std::string>()));
      if (!dag.is_acyclic()) throw Error("graph set contains a cyclic graph");
      set.dags.push_back(std::move(dag));
    }
    set.raw_bic = j.at("raw_bic").get<std::vector<double>>();
    set.weights = j.at("weights").get<std::vector<double>>();
    if (set.dags.empty() || set.raw_bic.size() != set.dags.size() || set.weights.size() != set.dags.size())
      throw Error("graph set needs one BIC value and one weight per graph");
    if (j.at("Q").get<std::size_t>() != set.dags.size()) throw Error("graph set Q disagrees with its graph list");
    return set;
  });
}

Json strength_to_json(const EdgeStrength& s) {
  return {{"treatment", s.treatment}, {"outcome", s.outcome},   {"graph_index", s.graph_index},
          {"confounders", s.confounders}, {"psi_hat", s.psi_hat}, {"n_matched", s.n_matched},
          {"failed", s.failed}};
}

EdgeStrength strength_from_json(const Json& j) {
  return guarded("edge strength", [&] {
    EdgeStrength s;
    s.treatment = j.at("treatment").get<std::string>();
    s.outcome = j.at("outcome").get<std::string>();
    s.graph_index = j.at("graph_index").get<std::size_t>();
    s.confounders = j.at("confounders").get<std::vector<std::string>>();
    s.psi_hat = j.at("psi_hat").get<double>();
    s.n_matched = j.at("n_matched").get<std::size_t>();
    s.failed = j.value("failed", false);
    return s;
  });
}

Json strengths_to_json(const StrengthMatrix& m) {
  Json rows = Json::array();
  for (std::size_t f = 0; f < m.factors.size(); ++f) {
    Json row = Json::array();
    for (std::size_t o = 0; o < m.outcomes.size(); ++o) row.push_back(m.at(f, o));
    rows.push_back(row);
  }
  Json prov = Json::array();
  for (const auto& s : m.provenance) prov.push_back(strength_to_json(s));
  return {{"factors", m.factors}, {"outcomes", m.outcomes}, {"psi_tilde", rows}, {"provenance", prov}};
}

StrengthMatrix strengths_from_json(const Json& j) {
  return guarded("strength matrix", [&] {
    StrengthMatrix m;
    m.factors = j.at("factors").get<std::vector<std::string>>();
    m.outcomes = j.at("outcomes").get<std::vector<std::string>>();
    const auto& rows = j.at("psi_tilde");
    if (rows.size() != m.factors.size()) throw Error("strength matrix needs one row per factor");
    for (const auto& row : rows) {
      if (row.size() != m.outcomes.size()) throw Error("strength matrix row has the wrong width");
      for (const auto& v : row) m.psi_tilde.push_back(v.get<double>());
    }
    if (j.contains("provenance"))
      for (const auto& s : j.at("provenance")) m.provenance.push_back(strength_from_json(s));
    return m;
  });
}

void write_strengths_csv(const StrengthMatrix& m, std::ostream& out) {
  out << "factor";
  for (const auto& o : m.outcomes) out << ',' << o;
  out << '\n';
  std::ostringstream num;
  num.precision(17);
  for (std::size_t f = 0; f < m.factors.size(); ++f) {
    out << m.factors[f];
    for (std::size_t o = 0; o < m.outcomes.size(); ++o) {
      num.str("");
      num << m.at(f, o);
      out << ',' << num.str();
    }
    out << '\n';
  }
}

Json forest_to_json(const ForestModel& model) {
  Json trees = Json::array();
  for (const auto& t : model.trees) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
    trees.push_back({{"nodes", nodes}});
  }
  return {{"charges", model.charges},     {"n_features", model.n_features}, {"n_trees", model.n_trees},
          {"max_depth", model.max_depth}, {"seed", model.seed},             {"trees", trees}};
}

ForestModel forest_from_json(const Json& j) {
  return guarded("forest model", [&] {
    ForestModel m;
    m.charges = j.at("charges").get<std::vector<std::string>>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.n_trees = j.at("n_trees").get<std::size_t>();
    m.max_depth = j.at("max_depth").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("trees")) {
      DecisionTree tree;
      for (const auto& n : t.at("nodes"))
        tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                              n.at(4).get<std::size_t>()});
      const auto count = static_cast<int>(tree.nodes.size());
      for (const auto& n : tree.nodes) {
        if (n.label >= m.charges.size()) throw Error("tree leaf names an unknown charge");
        if (n.feature >= static_cast<int>(m.n_features)) throw Error("tree splits on an unknown feature");
        if (n.feature >= 0 && (n.left <= 0 || n.left >= count || n.right <= 0 || n.right >= count))
          throw Error("tree child index out of range");
      }
      if (tree.nodes.empty()) throw Error("empty tree");
      m.trees.push_back(std::move(tree));
    }
    if (m.trees.size() != m.n_trees) throw Error("forest n_trees disagrees with its tree list");
    return m;
  });
}

Json refutation_to_json(const RefutationReport& r) {
  return {{"mode", std::string(to_string(r.mode))},
          {"original_psi", r.original_psi},
          {"refuted_psi", r.refuted_psi},
          {"repeats", r.repeats},
          {"pass", r.pass},
          {"threshold", r.threshold}};
}

Json chains_to_json(std::span<const CausalChain> chains) {
  Json out = Json::array();
  for (const auto& c : chains) out.push_back({{"path", c.path}, {"terminal_charge", c.terminal_charge}, {"weight", c.weight}});
  return out;
}

Json fairness_to_json(const FairnessReport& r) {
  Json groups = Json::array();
  for (const auto& g : r.groups) groups.push_back({{"group", g.group}, {"count", g.count}, {"fpr", g.fpr}, {"fnr", g.fnr}});
  return {{"positive_charge", r.positive_charge}, {"fpr", r.fpr}, {"fnr", r.fnr},
          {"groups", groups},                     {"fped", r.fped}, {"fned", r.fned}};
}

Json scm_to_json(const ScmSpec& spec) {
  Json vars = Json::array();
  for (const auto& v : spec.variables)
    vars.push_back({{"name", v.name}, {"parents", v.parents}, {"cpt", v.cpt}, {"latent", v.latent}});
  Json out = {{"variables", vars}, {"keywords", spec.keywords}, {"boilerplate", spec.boilerplate}};
  if (spec.label)
    out["label"] = {{"variable", spec.label->variable},
                    {"charge_if_one", spec.label->charge_if_one},
                    {"charge_if_zero", spec.label->charge_if_zero}};
  return out;
}

ScmSpec scm_from_json(const Json& j) {
  return guarded("SCM spec", [&] {
    ScmSpec s;
    for (const auto& v : j.at("variables"))
      s.variables.push_back({v.at("name").get<std::string>(), v.value("parents", std::vector<std::string>{}),
                             v.at("cpt").get<std::vector<double>>(), v.value("latent", false)});
    s.keywords = j.value("keywords", std::map<std::string, std::vector<std::string>>{});
    s.boilerplate = j.value("boilerplate", std::vector<std::string>{});
    if (j.contains("label")) {
      const auto& l = j.at("label");
      s.label = ScmLabel{l.at("variable").get<std::string>(), l.at("charge_if_one").get<std::string>(),
                         l.at("charge_if_zero").get<std::string>()};
    }
    s.validate();
    return s;
  });
}

Json truth_to_json(const GroundTruth& truth) {
  Json edges = Json::array();
  for (const auto& [a, b] : truth.edges) edges.push_back({{"from", a}, {"to", b}, {"ate", truth.ate.at({a, b})}});
  Json confounded = Json::array();
  for (const auto& [a, b] : truth.confounded) confounded.push_back({a, b});
  return {{"edges", edges}, {"latent", truth.latent}, {"confounded", confounded}};
}

}  // namespace gci
