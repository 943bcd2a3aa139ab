#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "gci/decision.hpp"
#include "gci/discovery.hpp"
#include "gci/effects.hpp"
#include "gci/factors.hpp"
#include "gci/graphs.hpp"
#include "gci/synth.hpp"
#include "json.hpp"

namespace gci {

using Json = nlohmann::json;

/// Pretty-printed with a trailing newline; output is byte-stable for equal values.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

Json keywords_to_json(std::span<const KeywordScore> keywords);
std::vector<KeywordScore> keywords_from_json(const Json& j);

Json vocabulary_to_json(const FactorVocabulary& vocab);
FactorVocabulary vocabulary_from_json(const Json& j);

Json background_to_json(const BackgroundKnowledge& bk);
BackgroundKnowledge background_from_json(const Json& j);

Json pag_to_json(const Pag& pag, const SepsetMap& sepsets = {});
DiscoveryResult pag_from_json(const Json& j);

Json dag_to_json(const Dag& dag);
Json dags_to_json(const WeightedDagSet& set);
WeightedDagSet dags_from_json(const Json& j);

Json strength_to_json(const EdgeStrength& s);
EdgeStrength strength_from_json(const Json& j);
Json strengths_to_json(const StrengthMatrix& m);
StrengthMatrix strengths_from_json(const Json& j);
/// Rows are factors, columns are outcomes.
void write_strengths_csv(const StrengthMatrix& m, std::ostream& out);

Json forest_to_json(const ForestModel& model);
ForestModel forest_from_json(const Json& j);

Json refutation_to_json(const RefutationReport& r);
Json chains_to_json(std::span<const CausalChain> chains);
Json fairness_to_json(const FairnessReport& r);

Json scm_to_json(const ScmSpec& spec);
ScmSpec scm_from_json(const Json& j);
Json truth_to_json(const GroundTruth& truth);

}  // namespace gci
