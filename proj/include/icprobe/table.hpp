#pragma once

#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace icprobe {

/// Column-named table of string cells, the interchange form between the
/// record files, stats and figures.
class Table {
 public:
  Table() = default;
  explicit Table(std::vector<std::string> columns);

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }

  std::optional<size_t> find_column(std::string_view name) const;
  /// Throws ValidationError naming the column when absent.
  size_t column(std::string_view name) const;
  void require_columns(std::initializer_list<std::string_view> names, std::string_view context) const;

  void add_row(std::vector<std::string> row);
  const std::vector<std::string>& row(size_t i) const { return rows_.at(i); }
  const std::string& at(size_t row, size_t col) const { return rows_.at(row).at(col); }
  const std::string& at(size_t row, std::string_view col) const { return at(row, column(col)); }

  /// Numeric view of a column; throws ValidationError on a non-numeric cell.
  std::vector<double> numeric(std::string_view col) const;

  /// Rows whose `col` value is in `keep`.
  Table filter(std::string_view col, const std::set<std::string>& keep) const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/// Missing-value marker in text tables.
inline constexpr std::string_view kMissing = "NA";

std::optional<double> parse_double(std::string_view s);
/// Fixed six-decimal rendering; NaN renders as NA.
std::string format_fixed(double v);
/// Shortest text that parses back to the same double.
std::string format_exact(double v);

// Tab-separated, header line first. Lines starting with '#' before the
// header are skipped and returned through `comments`.
void write_tsv(std::ostream& out, const Table& t, std::string_view comment = {});
Table read_tsv(std::istream& in, std::string_view source, std::vector<std::string>* comments = nullptr);

}  // namespace icprobe
