#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gci/corpus.hpp"
#include "gci/table.hpp"

namespace gci {

/// Binary variable of a structural causal model. cpt[k] = P(v = 1 | parents),
/// where bit j of k is the value of parents[j].
struct ScmVariable {
  std::string name;
  std::vector<std::string> parents;
  std::vector<double> cpt;
  /// Latent variables are sampled but never emitted.
  bool latent = false;
};

/// How a binary label variable maps onto a two-charge corpus.
struct ScmLabel {
  std::string variable;
  std::string charge_if_one;
  std::string charge_if_zero;
};

struct ScmSpec {
  std::vector<ScmVariable> variables;
  /// Synonym tokens rendered when a variable is 1 (corpus emission only).
  std::map<std::string, std::vector<std::string>> keywords;
  /// Tokens every document carries.
  std::vector<std::string> boilerplate;
  std::optional<ScmLabel> label;

  /// Throws on unknown parents, bad table sizes, probabilities outside [0,1] or cycles.
  void validate() const;
  std::size_t index_of(std::string_view name) const;
  /// Variable indices with parents before children (stable with respect to declaration order).
  std::vector<std::size_t> topological_order() const;
};

/// C ~ Bern(.5); T copies C with probability .8; P(Y=1 | T, C) = .2 + .5 T + .3 C.
ScmSpec confounded_spec();
/// A -> C <- B over fair coins.
ScmSpec collider_spec();
/// A -> B -> C with flip probability .1.
ScmSpec chain_spec();
/// A -> B <- L -> D <- C with L latent.
ScmSpec latent_spec();
/// Two-charge corpus model: lie -> obtain -> cheat -> fraud label, cheat ->
/// threat -> label, plus independent noise factors.
ScmSpec disambiguation_spec();

/// Named preset lookup: confounded, collider, chain, latent, disambiguation.
ScmSpec preset_spec(std::string_view name);

/// E[y | do(t=1)] - E[y | do(t=0)] by exact enumeration over all variables.
double exact_ate(const ScmSpec& spec, std::string_view t, std::string_view y);
/// E[y | t=1] - E[y | t=0] by exact enumeration.
double exact_naive_difference(const ScmSpec& spec, std::string_view t, std::string_view y);

struct GroundTruth {
  std::vector<std::pair<std::string, std::string>> edges;
  /// Exact total effect of every edge's parent on its child.
  std::map<std::pair<std::string, std::string>, double> ate;
  std::vector<std::string> latent;
  /// Observed pairs sharing a latent parent and not directly linked.
  std::vector<std::pair<std::string, std::string>> confounded;
};

GroundTruth ground_truth(const ScmSpec& spec);

/// Ancestral sampling; the table holds the observed variables as factor
/// columns in declaration order. `interventions` clamps variables.
FactorTable synth_table(const ScmSpec& spec, std::size_t n, std::uint64_t seed,
                        const std::map<std::string, int>& interventions = {});

struct SynthCorpusOptions {
  double test_fraction = 0.2;
  std::size_t embedding_dim = 16;
  double synonym_spread = 0.05;
  std::vector<std::string> groups = {"g0", "g1"};
};

struct SynthCorpus {
  Corpus corpus;
  EmbeddingTable embeddings;
  /// Sampled values of the keyword-bearing variables, one row per document.
  FactorTable incidence;
  GroundTruth truth;
};

/// Renders sampled SCM rows as documents: boilerplate, then one synonym per
/// active keyword variable in causal order. Requires a label.
SynthCorpus synth_corpus(const ScmSpec& spec, std::size_t n, std::uint64_t seed, const SynthCorpusOptions& options = {});

}  // namespace gci
