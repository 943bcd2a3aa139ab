#include "gci/table.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "gci/common.hpp"

namespace gci {

std::string charge_variable(std::string_view charge) { return "Y_" + std::string(charge); }

FactorTable::FactorTable(std::vector<std::string> variables, std::size_t factor_count,
                         std::vector<std::string> row_ids)
    : variables_(std::move(variables)), factor_count_(factor_count), row_ids_(std::move(row_ids)) {
  if (factor_count_ > variables_.size()) throw Error("factor count exceeds variable count");
  columns_.assign(variables_.size(), std::vector<std::uint8_t>(row_ids_.size(), 0));
  reindex();
}

void FactorTable::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (!index_.emplace(variables_[i], i).second)
      throw Error("duplicate table variable '" + variables_[i] + "'");
  }
}

std::vector<std::string> FactorTable::factor_names() const {
  return {variables_.begin(), variables_.begin() + static_cast<std::ptrdiff_t>(factor_count_)};
}

std::vector<std::string> FactorTable::charge_names() const {
  return {variables_.begin() + static_cast<std::ptrdiff_t>(factor_count_), variables_.end()};
}

std::optional<std::size_t> FactorTable::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t FactorTable::require(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw Error("unknown variable '" + std::string(name) + "'");
}

void FactorTable::set(std::size_t r, std::size_t c, std::uint8_t v) {
  if (v > 1) throw Error("table entries must be 0 or 1");
  columns_.at(c).at(r) = v;
}

std::vector<std::uint8_t> FactorTable::factor_row(std::size_t r) const {
  std::vector<std::uint8_t> out(factor_count_);
  for (std::size_t c = 0; c < factor_count_; ++c) out[c] = columns_[c][r];
  return out;
}

std::optional<std::size_t> FactorTable::label_of(std::size_t r) const {
  for (std::size_t c = factor_count_; c < cols(); ++c)
    if (columns_[c][r]) return c - factor_count_;
  return std::nullopt;
}

void FactorTable::add_factor_column(std::string name, std::vector<std::uint8_t> values) {
  if (values.size() != rows()) throw Error("column length does not match row count");
  const auto pos = static_cast<std::ptrdiff_t>(factor_count_);
  variables_.insert(variables_.begin() + pos, std::move(name));
  columns_.insert(columns_.begin() + pos, std::move(values));
  ++factor_count_;
  reindex();
}

void FactorTable::replace_column(std::size_t c, std::vector<std::uint8_t> values) {
  if (values.size() != rows()) throw Error("column length does not match row count");
  columns_.at(c) = std::move(values);
}

FactorTable FactorTable::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (std::size_t r : rows) ids.push_back(row_ids_.at(r));
  FactorTable out(variables_, factor_count_, std::move(ids));
  for (std::size_t c = 0; c < cols(); ++c)
    for (std::size_t i = 0; i < rows.size(); ++i) out.columns_[c][i] = columns_[c][rows[i]];
  return out;
}

void FactorTable::validate() const {
  for (std::size_t r = 0; r < rows(); ++r) {
    std::size_t flags = 0;
    for (std::size_t c = 0; c < cols(); ++c) {
      if (columns_[c][r] > 1) throw Error("non-binary entry in row " + row_ids_[r]);
      if (c >= factor_count_) flags += columns_[c][r];
    }
    if (flags > 1) throw Error("row " + row_ids_[r] + " has more than one charge flag");
  }
}

void write_table_csv(const FactorTable& table, std::ostream& out) {
  const auto& vars = table.variables();
  for (std::size_t c = 0; c < vars.size(); ++c) out << (c ? "," : "") << vars[c];
  out << '\n';
  std::string line;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    line.clear();
    for (std::size_t c = 0; c < table.cols(); ++c) {
      if (c) line += ',';
      line += static_cast<char>('0' + table.at(r, c));
    }
    out << line << '\n';
  }
}

FactorTable read_table_csv(std::istream& in, std::span<const std::string> charges, std::string_view source) {
  const std::string src(source);
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      cells.push_back(cell);
    }
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw ParseError(src, 1, "missing header");
  auto vars = split(line);
  if (vars.size() < charges.size()) throw ParseError(src, 1, "fewer columns than charges");
  const std::size_t factor_count = vars.size() - charges.size();
  for (std::size_t i = 0; i < charges.size(); ++i) {
    if (vars[factor_count + i] != charge_variable(charges[i]))
      throw ParseError(src, 1, "expected column '" + charge_variable(charges[i]) + "'");
  }
  std::vector<std::vector<std::uint8_t>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (cells.size() != vars.size()) throw ParseError(src, line_no, "wrong number of columns");
    std::vector<std::uint8_t> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c] != "0" && cells[c] != "1") throw ParseError(src, line_no, "entry is not 0/1");
      row[c] = static_cast<std::uint8_t>(cells[c][0] - '0');
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < rows.size(); ++r) ids.push_back("row" + std::to_string(r));
  FactorTable table(std::move(vars), factor_count, std::move(ids));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) table.set(r, c, rows[r][c]);
  table.validate();
  return table;
}

}  // namespace gci
