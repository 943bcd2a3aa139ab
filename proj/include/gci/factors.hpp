#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gci/corpus.hpp"
#include "gci/table.hpp"

namespace gci {

struct KeywordScore {
  std::string word;
  std::string charge;
  double importance = 0.0;

  bool operator==(const KeywordScore&) const = default;
};

using StopwordSet = std::set<std::string, std::less<>>;

/// Ranks candidate keywords per charge. Implementations must only look at
/// labeled training documents.
class KeywordScorer {
 public:
  virtual ~KeywordScorer() = default;
  /// Top `p` words per charge, highest importance first, ties by word.
  virtual std::vector<KeywordScore> score(const Corpus& corpus, std::size_t p,
                                          const StopwordSet& stopwords) const = 0;
};

/// importance(w, c) = coverage(w, c) * idf(w), clamped at zero, where coverage
/// is the share of charge-c training documents containing w and
/// idf(w) = ln(N_train / (1 + df(w))) over all training documents.
class CoverageIdfScorer final : public KeywordScorer {
 public:
  std::vector<KeywordScore> score(const Corpus& corpus, std::size_t p,
                                  const StopwordSet& stopwords) const override;
};

std::vector<KeywordScore> score_keywords(const Corpus& corpus, std::size_t p, const StopwordSet& stopwords = {});

struct Factor {
  std::string id;
  std::set<std::string> members;
  /// Representative word: the member with the highest importance.
  std::string label;
  /// Largest importance of any member over all charges.
  double importance = 0.0;

  bool operator==(const Factor&) const = default;
};

class FactorVocabulary {
 public:
  FactorVocabulary() = default;
  /// Throws when member sets overlap or a factor is empty.
  explicit FactorVocabulary(std::vector<Factor> factors);

  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t size() const { return factors_.size(); }
  std::vector<std::string> ids() const;
  std::optional<std::size_t> factor_of(std::string_view word) const;

  bool operator==(const FactorVocabulary& other) const { return factors_ == other.factors_; }

 private:
  std::vector<Factor> factors_;
  std::map<std::string, std::size_t, std::less<>> word_to_factor_;
};

/// Merges keywords into at most q factors with k-means over normalized
/// embeddings; keywords without an embedding become singleton factors.
FactorVocabulary cluster_keywords(std::span<const KeywordScore> keywords, const EmbeddingTable& embeddings,
                                  std::size_t q, std::uint64_t seed);

/// Factor columns (presence of any member word) followed by charge indicators.
FactorTable binarize(const Corpus& corpus, const FactorVocabulary& vocab);

/// Pairwise first-occurrence order counts between factors.
class PrecedenceStats {
 public:
  explicit PrecedenceStats(std::vector<std::string> factors);

  const std::vector<std::string>& factors() const { return factors_; }
  /// Documents containing both a and b.
  std::size_t co_count(std::size_t a, std::size_t b) const { return co_[a * factors_.size() + b]; }
  /// Documents where a first occurs strictly after b.
  std::size_t after_count(std::size_t a, std::size_t b) const { return after_[a * factors_.size() + b]; }
  void add(std::size_t a, std::size_t b, bool a_after_b);

 private:
  std::vector<std::string> factors_;
  std::vector<std::size_t> co_;
  std::vector<std::size_t> after_;
};

PrecedenceStats temporal_precedence(const Corpus& corpus, const FactorVocabulary& vocab);

/// Directed edges that must not appear in any learned or sampled graph.
struct BackgroundKnowledge {
  std::set<std::pair<std::string, std::string>> forbidden;

  bool forbids(std::string_view from, std::string_view to) const;
  bool operator==(const BackgroundKnowledge&) const = default;
};

/// Forbids every edge out of a charge node, plus (A, B) whenever A follows B in
/// at least `threshold` of at least `min_co` shared documents.
BackgroundKnowledge background_knowledge(const PrecedenceStats& stats, std::span<const std::string> charges,
                                         double threshold, std::size_t min_co);

}  // namespace gci
