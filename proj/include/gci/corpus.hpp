#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gci {

enum class Split { train, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// One pre-tokenized case description.
struct Document {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<std::string> charge;
  std::optional<std::string> group;
  Split split = Split::train;

  bool operator==(const Document&) const = default;
};

/// Validated, immutable collection of documents plus the ordered charge set.
class Corpus {
 public:
  /// Throws gci::Error when an invariant fails (fewer than two charges,
  /// duplicate ids, empty token lists, labels outside the charge set).
  Corpus(std::vector<Document> documents, std::vector<std::string> charges);

  const std::vector<Document>& documents() const { return documents_; }
  const std::vector<std::string>& charges() const { return charges_; }
  std::size_t size() const { return documents_.size(); }

  /// Position of a charge in the ordered charge set; throws if absent.
  std::size_t charge_index(std::string_view charge) const;

  /// Documents of one split, same order and charge set.
  Corpus filtered(Split split) const;

  /// Labeled training-document count per charge, in charge order.
  std::vector<std::size_t> training_counts() const;

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<Document> documents_;
  std::vector<std::string> charges_;
};

Corpus parse_corpus(std::istream& records, std::istream& charges, std::string_view source = "corpus");
Corpus load_corpus(const std::filesystem::path& path, const std::filesystem::path& charges_path);
void write_corpus(const Corpus& corpus, std::ostream& records, std::ostream& charges);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path,
                  const std::filesystem::path& charges_path);

/// Oversamples minority charges in the training split until every charge has at
/// least ceil(largest / 3) training documents. Duplicates get fresh ids
/// ("<id>#aug<k>") and are appended after the original documents.
Corpus balance_corpus(const Corpus& corpus, std::uint64_t seed);

/// Keeps a seeded, per-charge stratified fraction of the labeled training
/// documents (at least one per charge); unlabeled and test documents are kept.
Corpus subsample_training(const Corpus& corpus, double fraction, std::uint64_t seed);

/// Plain-text word vectors: header "vocab_size dimension", then "word v1 ... v_dim".
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dimension, std::map<std::string, std::vector<double>> vectors);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return vectors_.size(); }
  /// Empty optional for words not in the table.
  std::optional<std::span<const double>> find(std::string_view word) const;
  const std::map<std::string, std::vector<double>, std::less<>>& vectors() const { return vectors_; }

 private:
  std::size_t dimension_;
  std::map<std::string, std::vector<double>, std::less<>> vectors_;
};

EmbeddingTable parse_embeddings(std::istream& in, std::string_view source = "embeddings");
EmbeddingTable load_embeddings(const std::filesystem::path& path);
void write_embeddings(const EmbeddingTable& table, std::ostream& out);

}  // namespace gci
