#include "gci/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "gci/common.hpp"
#include "json.hpp"

namespace gci {

using nlohmann::json;

std::string_view to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  throw Error("unknown split '" + std::string(text) + "' (expected train or test)");
}

Corpus::Corpus(std::vector<Document> documents, std::vector<std::string> charges)
    : documents_(std::move(documents)), charges_(std::move(charges)) {
  if (charges_.size() < 2) throw Error("corpus needs at least two charges");
  std::set<std::string_view> charge_set;
  for (const auto& c : charges_) {
    if (c.empty()) throw Error("empty charge name");
    if (!charge_set.insert(c).second) throw Error("duplicate charge '" + c + "'");
  }
  std::unordered_set<std::string_view> ids;
  for (const auto& doc : documents_) {
    if (doc.id.empty()) throw Error("document with empty id");
    if (!ids.insert(doc.id).second) throw Error("duplicate document id '" + doc.id + "'");
    if (doc.tokens.empty()) throw Error("document '" + doc.id + "' has no tokens");
    if (doc.charge && !charge_set.contains(*doc.charge)) {
      throw Error("document '" + doc.id + "' has charge '" + *doc.charge +
                  "' outside the charge set");
    }
  }
}

std::size_t Corpus::charge_index(std::string_view charge) const {
  auto it = std::find(charges_.begin(), charges_.end(), charge);
  if (it == charges_.end()) throw Error("unknown charge '" + std::string(charge) + "'");
  return static_cast<std::size_t>(it - charges_.begin());
}

Corpus Corpus::filtered(Split split) const {
  std::vector<Document> docs;
  for (const auto& d : documents_)
    if (d.split == split) docs.push_back(d);
  return Corpus(std::move(docs), charges_);
}

std::vector<std::size_t> Corpus::training_counts() const {
  std::vector<std::size_t> counts(charges_.size(), 0);
  for (const auto& d : documents_)
    if (d.split == Split::train && d.charge) ++counts[charge_index(*d.charge)];
  return counts;
}

namespace {

Document parse_document(const json& j, const std::string& source, std::size_t line) {
  if (!j.is_object()) throw ParseError(source, line, "record is not a JSON object");
  Document doc;
  try {
    doc.id = j.at("id").get<std::string>();
    doc.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (auto it = j.find("charge"); it != j.end() && !it->is_null()) doc.charge = it->get<std::string>();
    if (auto it = j.find("group"); it != j.end() && !it->is_null()) doc.group = it->get<std::string>();
    doc.split = parse_split(j.at("split").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(source, line, e.what());
  } catch (const Error& e) {
    throw ParseError(source, line, e.what());
  }
  if (doc.tokens.empty()) throw ParseError(source, line, "document '" + doc.id + "' has no tokens");
  return doc;
}

}  // namespace

Corpus parse_corpus(std::istream& records, std::istream& charges_in, std::string_view source) {
  const std::string src(source);
  std::vector<std::string> charges;
  std::string line;
  while (std::getline(charges_in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) charges.push_back(line);
  }
  std::set<std::string_view> charge_set(charges.begin(), charges.end());

  std::vector<Document> docs;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  while (std::getline(records, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(src, line_no, std::string("malformed JSON: ") + e.what());
    }
    Document doc = parse_document(j, src, line_no);
    if (doc.charge && !charge_set.contains(*doc.charge)) {
      throw ParseError(src, line_no,
                       "document '" + doc.id + "' has charge '" + *doc.charge + "' not in the charge set");
    }
    if (!ids.insert(doc.id).second) throw ParseError(src, line_no, "duplicate document id '" + doc.id + "'");
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs), std::move(charges));
}

Corpus load_corpus(const std::filesystem::path& path, const std::filesystem::path& charges_path) {
  std::ifstream records(path);
  if (!records) throw Error("cannot open corpus file " + path.string());
  std::ifstream charges(charges_path);
  if (!charges) throw Error("cannot open charge file " + charges_path.string());
  return parse_corpus(records, charges, path.string());
}

void write_corpus(const Corpus& corpus, std::ostream& records, std::ostream& charges) {
  for (const auto& c : corpus.charges()) charges << c << '\n';
  for (const auto& d : corpus.documents()) {
    json j;
    j["id"] = d.id;
    j["tokens"] = d.tokens;
    if (d.charge) j["charge"] = *d.charge;
    if (d.group) j["group"] = *d.group;
    j["split"] = std::string(to_string(d.split));
    records << j.dump() << '\n';
  }
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path,
                  const std::filesystem::path& charges_path) {
  std::ofstream records(path);
  std::ofstream charges(charges_path);
  if (!records || !charges) throw Error("cannot write corpus to " + path.string());
  write_corpus(corpus, records, charges);
}

Corpus balance_corpus(const Corpus& corpus, std::uint64_t seed) {
  const auto& charges = corpus.charges();
  std::vector<std::vector<std::size_t>> by_charge(charges.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& d = corpus.documents()[i];
    if (d.split == Split::train && d.charge) by_charge[corpus.charge_index(*d.charge)].push_back(i);
  }
  std::size_t largest = 0;
  for (std::size_t c = 0; c < charges.size(); ++c) {
    if (by_charge[c].empty()) throw Error("charge '" + charges[c] + "' has no training documents");
    largest = std::max(largest, by_charge[c].size());
  }
  const std::size_t target = (largest + 2) / 3;

  std::vector<Document> docs = corpus.documents();
  std::unordered_set<std::string> ids;
  for (const auto& d : docs) ids.insert(d.id);
  std::vector<std::size_t> copies(corpus.size(), 0);
  for (std::size_t c = 0; c < charges.size(); ++c) {
    const auto& pool = by_charge[c];
    Rng rng(seed, {c});
    for (std::size_t n = pool.size(); n < target; ++n) {
      const std::size_t src = pool[rng.below(pool.size())];
      Document dup = corpus.documents()[src];
      do {
        dup.id = corpus.documents()[src].id + "#aug" + std::to_string(++copies[src]);
      } while (ids.contains(dup.id));
      ids.insert(dup.id);
      docs.push_back(std::move(dup));
    }
  }
  return Corpus(std::move(docs), charges);
}

Corpus subsample_training(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("training fraction must lie in (0, 1]");
  if (fraction == 1.0) return corpus;
  const auto& charges = corpus.charges();
  std::vector<std::vector<std::size_t>> by_charge(charges.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& d = corpus.documents()[i];
    if (d.split == Split::train && d.charge) by_charge[corpus.charge_index(*d.charge)].push_back(i);
  }
  std::vector<bool> keep(corpus.size(), true);
  for (std::size_t c = 0; c < charges.size(); ++c) {
    auto pool = by_charge[c];
    if (pool.empty()) continue;
    const auto wanted = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size()))));
    Rng rng(seed, {c});
    // Partial Fisher-Yates: the first `wanted` slots become the kept sample.
    for (std::size_t i = 0; i < wanted; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    for (std::size_t i = wanted; i < pool.size(); ++i) keep[pool[i]] = false;
  }
  std::vector<Document> docs;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (keep[i]) docs.push_back(corpus.documents()[i]);
  return Corpus(std::move(docs), charges);
}

EmbeddingTable::EmbeddingTable(std::size_t dimension, std::map<std::string, std::vector<double>> vectors)
    : dimension_(dimension) {
  if (dimension_ == 0) throw Error("embedding dimension must be positive");
  for (auto& [word, vec] : vectors) {
    if (vec.size() != dimension_) throw Error("embedding for '" + word + "' has wrong dimension");
    for (double v : vec)
      if (!std::isfinite(v)) throw Error("embedding for '" + word + "' has a non-finite entry");
    vectors_.emplace(word, std::move(vec));
  }
}

std::optional<std::span<const double>> EmbeddingTable::find(std::string_view word) const {
  auto it = vectors_.find(word);
  if (it == vectors_.end()) return std::nullopt;
  return std::span<const double>(it->second);
}

EmbeddingTable parse_embeddings(std::istream& in, std::string_view source) {
  const std::string src(source);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(src, 1, "missing header line");
  std::istringstream header(line);
  long long vocab = -1, dim = -1;
  if (!(header >> vocab >> dim) || vocab < 0 || dim <= 0)
    throw ParseError(src, 1, "header must be 'vocab_size dimension'");

  std::map<std::string, std::vector<double>> vectors;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::vector<double> vec;
    std::string tok;
    while (fields >> tok) {
      double v = 0.0;
      std::size_t used = 0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ParseError(src, line_no, "non-numeric component '" + tok + "'");
      if (!std::isfinite(v)) throw ParseError(src, line_no, "non-finite component '" + tok + "'");
      vec.push_back(v);
    }
    if (vec.size() != static_cast<std::size_t>(dim)) {
      throw ParseError(src, line_no,
                       "expected " + std::to_string(dim) + " components, got " + std::to_string(vec.size()));
    }
    if (!vectors.emplace(word, std::move(vec)).second)
      throw ParseError(src, line_no, "duplicate word '" + word + "'");
  }
  if (vectors.size() != static_cast<std::size_t>(vocab)) {
    throw ParseError(src, line_no,
                     "header declares " + std::to_string(vocab) + " words, file has " +
                         std::to_string(vectors.size()));
  }
  return EmbeddingTable(static_cast<std::size_t>(dim), std::move(vectors));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embeddings file " + path.string());
  return parse_embeddings(in, path.string());
}

void write_embeddings(const EmbeddingTable& table, std::ostream& out) {
  out << table.size() << ' ' << table.dimension() << '\n';
  std::ostringstream buf;
  buf.precision(17);
  for (const auto& [word, vec] : table.vectors()) {
    buf << word;
    for (double v : vec) buf << ' ' << v;
    buf << '\n';
  }
  out << buf.str();
}

}  // namespace gci
