#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gci {

/// Name of the indicator variable for a charge.
std::string charge_variable(std::string_view charge);

/// Binary data matrix over q factor variables followed by M charge indicators.
///
/// Stored column-major since every consumer (CI tests, BIC, matching) scans
/// whole columns.
class FactorTable {
 public:
  FactorTable() = default;
  /// All-zero table. `factor_count` leading variables are factors, the rest
  /// are charge indicators.
  FactorTable(std::vector<std::string> variables, std::size_t factor_count,
              std::vector<std::string> row_ids);

  std::size_t rows() const { return row_ids_.size(); }
  std::size_t cols() const { return variables_.size(); }
  std::size_t factor_count() const { return factor_count_; }
  std::size_t charge_count() const { return variables_.size() - factor_count_; }

  const std::vector<std::string>& variables() const { return variables_; }
  const std::vector<std::string>& row_ids() const { return row_ids_; }
  std::vector<std::string> factor_names() const;
  std::vector<std::string> charge_names() const;

  std::optional<std::size_t> index_of(std::string_view name) const;
  /// Like index_of but throws for unknown names.
  std::size_t require(std::string_view name) const;

  std::span<const std::uint8_t> column(std::size_t c) const { return columns_[c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return columns_[c][r]; }
  void set(std::size_t r, std::size_t c, std::uint8_t v);
  /// Factor part of one row.
  std::vector<std::uint8_t> factor_row(std::size_t r) const;
  /// Index of the charge indicator set in row r, if any.
  std::optional<std::size_t> label_of(std::size_t r) const;

  /// Inserts a new factor column after the existing factors.
  void add_factor_column(std::string name, std::vector<std::uint8_t> values);
  void replace_column(std::size_t c, std::vector<std::uint8_t> values);
  FactorTable select_rows(std::span<const std::size_t> rows) const;

  /// Throws gci::Error when an entry is not 0/1 or a row has several charge flags.
  void validate() const;

  bool operator==(const FactorTable&) const = default;

 private:
  void reindex();

  std::vector<std::string> variables_;
  std::size_t factor_count_ = 0;
  std::vector<std::string> row_ids_;
  std::vector<std::vector<std::uint8_t>> columns_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// CSV export: header of variable names, then one 0/1 row per document.
void write_table_csv(const FactorTable& table, std::ostream& out);
/// Reads CSV written by write_table_csv. The trailing columns must be the
/// charge indicators of `charges`, in order. Row ids become "row<k>".
FactorTable read_table_csv(std::istream& in, std::span<const std::string> charges,
                           std::string_view source = "table");

}  // namespace gci
