#include "gci/factors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "gci/common.hpp"

namespace gci {

std::vector<KeywordScore> CoverageIdfScorer::score(const Corpus& corpus, std::size_t p,
                                                   const StopwordSet& stopwords) const {
  if (p < 1) throw Error("keyword count p must be at least 1");
  const auto& charges = corpus.charges();
  const std::size_t m = charges.size();

  std::size_t n_train = 0;
  std::unordered_map<std::string, std::size_t> df;
  std::vector<std::size_t> docs_per_charge(m, 0);
  std::vector<std::unordered_map<std::string, std::size_t>> charge_df(m);

  for (const auto& doc : corpus.documents()) {
    if (doc.split != Split::train) continue;
    ++n_train;
    std::unordered_set<std::string_view> seen;
    for (const auto& tok : doc.tokens)
      if (!stopwords.contains(tok)) seen.insert(tok);
    std::optional<std::size_t> c;
    if (doc.charge) {
      c = corpus.charge_index(*doc.charge);
      ++docs_per_charge[*c];
    }
    for (auto w : seen) {
      ++df[std::string(w)];
      if (c) ++charge_df[*c][std::string(w)];
    }
  }
  for (std::size_t c = 0; c < m; ++c)
    if (docs_per_charge[c] == 0) throw Error("charge '" + charges[c] + "' has no training documents");

  std::vector<KeywordScore> out;
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<KeywordScore> cand;
    cand.reserve(charge_df[c].size());
    for (const auto& [word, count] : charge_df[c]) {
      const double coverage = static_cast<double>(count) / static_cast<double>(docs_per_charge[c]);
      const double idf = std::log(static_cast<double>(n_train) / (1.0 + static_cast<double>(df.at(word))));
      cand.push_back({word, charges[c], std::max(0.0, coverage * idf)});
    }
    std::sort(cand.begin(), cand.end(), [](const KeywordScore& a, const KeywordScore& b) {
      if (a.importance != b.importance) return a.importance > b.importance;
      return a.word < b.word;
    });
    if (cand.size() > p) cand.resize(p);
    out.insert(out.end(), cand.begin(), cand.end());
  }
  return out;
}

std::vector<KeywordScore> score_keywords(const Corpus& corpus, std::size_t p, const StopwordSet& stopwords) {
  return CoverageIdfScorer{}.score(corpus, p, stopwords);
}

FactorVocabulary::FactorVocabulary(std::vector<Factor> factors) : factors_(std::move(factors)) {
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (factors_[i].members.empty()) throw Error("factor '" + factors_[i].id + "' has no members");
    for (const auto& w : factors_[i].members) {
      if (!word_to_factor_.emplace(w, i).second) throw Error("word '" + w + "' belongs to two factors");
    }
  }
}

std::vector<std::string> FactorVocabulary::ids() const {
  std::vector<std::string> out;
  out.reserve(factors_.size());
  for (const auto& f : factors_) out.push_back(f.id);
  return out;
}

std::optional<std::size_t> FactorVocabulary::factor_of(std::string_view word) const {
  auto it = word_to_factor_.find(word);
  if (it == word_to_factor_.end()) return std::nullopt;
  return it->second;
}

namespace {

using Point = std::vector<double>;

double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct Clustering {
  std::vector<std::size_t> assignment;
  double wcss = std::numeric_limits<double>::infinity();
};

std::vector<Point> seed_plus_plus(const std::vector<Point>& pts, std::size_t k, Rng& rng) {
  std::vector<Point> centers;
  centers.push_back(pts[rng.below(pts.size())]);
  std::vector<double> d2(pts.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(pts[i], centers.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.below(pts.size());
    } else {
      double r = rng.uniform() * total;
      for (pick = 0; pick + 1 < pts.size(); ++pick) {
        if (r < d2[pick]) break;
        r -= d2[pick];
      }
    }
    centers.push_back(pts[pick]);
  }
  return centers;
}

Clustering lloyd(const std::vector<Point>& pts, std::vector<Point> centers) {
  const std::size_t k = centers.size();
  const std::size_t dim = pts.front().size();
  Clustering out;
  out.assignment.assign(pts.size(), k);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(pts[i], centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(pts[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.assignment[i] != best) {
        out.assignment[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ++counts[out.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[out.assignment[i]][d] += pts[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its old center
      for (std::size_t d = 0; d < dim; ++d) centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }
  out.wcss = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) out.wcss += squared_distance(pts[i], centers[out.assignment[i]]);
  return out;
}

}  // namespace

FactorVocabulary cluster_keywords(std::span<const KeywordScore> keywords, const EmbeddingTable& embeddings,
                                  std::size_t q, std::uint64_t seed) {
  if (q < 1) throw Error("factor count q must be at least 1");
  std::map<std::string, double> importance;  // sorted => deterministic point order
  for (const auto& k : keywords) {
    auto [it, inserted] = importance.emplace(k.word, k.importance);
    if (!inserted) it->second = std::max(it->second, k.importance);
  }
  if (importance.empty()) throw Error("cannot cluster an empty keyword list");

  std::vector<std::string> embedded_words;
  std::vector<Point> points;
  std::vector<Factor> factors;
  for (const auto& [word, imp] : importance) {
    auto vec = embeddings.find(word);
    double norm = 0.0;
    if (vec)
      for (double v : *vec) norm += v * v;
    norm = std::sqrt(norm);
    if (!vec || norm == 0.0) {
      factors.push_back({word, {word}, word, imp});
      continue;
    }
    Point p(vec->begin(), vec->end());
    for (double& v : p) v /= norm;
    embedded_words.push_back(word);
    points.push_back(std::move(p));
  }

  if (!points.empty()) {
    const std::size_t k = std::min(q, points.size());
    Clustering best;
    for (std::uint64_t restart = 0; restart < 10; ++restart) {
      Rng rng(seed, {restart});
      Clustering c = lloyd(points, seed_plus_plus(points, k, rng));
      if (c.wcss < best.wcss) best = std::move(c);
    }
    std::vector<Factor> clusters(k);
    for (std::size_t i = 0; i < points.size(); ++i) clusters[best.assignment[i]].members.insert(embedded_words[i]);
    for (auto& f : clusters) {
      if (f.members.empty()) continue;
      f.importance = -1.0;
      for (const auto& w : f.members) {
        const double imp = importance.at(w);
        if (imp > f.importance) {  // members iterate in lexicographic order
          f.importance = imp;
          f.label = w;
        }
      }
      f.id = f.label;
      factors.push_back(std::move(f));
    }
  }

  auto by_importance = [](const Factor& a, const Factor& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return a.label < b.label;
  };
  std::sort(factors.begin(), factors.end(), by_importance);
  // Drop the weakest singletons until q factors remain.
  for (std::size_t i = factors.size(); factors.size() > q && i-- > 0;) {
    if (factors[i].members.size() == 1) factors.erase(factors.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return FactorVocabulary(std::move(factors));
}

FactorTable binarize(const Corpus& corpus, const FactorVocabulary& vocab) {
  std::vector<std::string> vars = vocab.ids();
  for (const auto& c : corpus.charges()) vars.push_back(charge_variable(c));
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& d : corpus.documents()) ids.push_back(d.id);

  FactorTable table(std::move(vars), vocab.size(), std::move(ids));
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const auto& doc = corpus.documents()[r];
    for (const auto& tok : doc.tokens)
      if (auto f = vocab.factor_of(tok)) table.set(r, *f, 1);
    if (doc.charge) table.set(r, vocab.size() + corpus.charge_index(*doc.charge), 1);
  }
  return table;
}

PrecedenceStats::PrecedenceStats(std::vector<std::string> factors) : factors_(std::move(factors)) {
  co_.assign(factors_.size() * factors_.size(), 0);
  after_.assign(factors_.size() * factors_.size(), 0);
}

void PrecedenceStats::add(std::size_t a, std::size_t b, bool a_after_b) {
  const std::size_t i = a * factors_.size() + b;
  ++co_[i];
  if (a_after_b) ++after_[i];
}

PrecedenceStats temporal_precedence(const Corpus& corpus, const FactorVocabulary& vocab) {
  PrecedenceStats stats(vocab.ids());
  const std::size_t q = vocab.size();
  constexpr auto absent = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> first(q);
  for (const auto& doc : corpus.documents()) {
    std::fill(first.begin(), first.end(), absent);
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      if (auto f = vocab.factor_of(doc.tokens[i]); f && first[*f] == absent) first[*f] = i;
    }
    for (std::size_t a = 0; a < q; ++a) {
      if (first[a] == absent) continue;
      for (std::size_t b = 0; b < q; ++b) {
        if (a == b || first[b] == absent) continue;
        stats.add(a, b, first[a] > first[b]);
      }
    }
  }
  return stats;
}

bool BackgroundKnowledge::forbids(std::string_view from, std::string_view to) const {
  return forbidden.contains({std::string(from), std::string(to)});
}

BackgroundKnowledge background_knowledge(const PrecedenceStats& stats, std::span<const std::string> charges,
                                         double threshold, std::size_t min_co) {
  if (!(threshold > 0.5 && threshold <= 1.0)) throw Error("temporal threshold must lie in (0.5, 1]");
  BackgroundKnowledge bk;
  std::vector<std::string> all = stats.factors();
  std::vector<std::string> charge_nodes;
  for (const auto& c : charges) charge_nodes.push_back(charge_variable(c));
  all.insert(all.end(), charge_nodes.begin(), charge_nodes.end());
  for (const auto& y : charge_nodes)
    for (const auto& v : all)
      if (v != y) bk.forbidden.emplace(y, v);

  const auto& f = stats.factors();
  for (std::size_t a = 0; a < f.size(); ++a) {
    for (std::size_t b = 0; b < f.size(); ++b) {
      if (a == b) continue;
      const std::size_t co = stats.co_count(a, b);
      if (co == 0 || co < min_co) continue;
      if (static_cast<double>(stats.after_count(a, b)) >= threshold * static_cast<double>(co))
        bk.forbidden.emplace(f[a], f[b]);
    }
  }
  return bk;
}

}  // namespace gci
