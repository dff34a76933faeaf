#include "icprobe/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>

#include "icprobe/error.hpp"

namespace icprobe {

Table::Table(std::vector<std::string> columns) : columns_(std::move(columns)) {
  for (size_t i = 0; i < columns_.size(); ++i) {
    for (size_t j = 0; j < i; ++j) {
      if (columns_[i] == columns_[j]) throw ValidationError("duplicate column '" + columns_[i] + "'");
    }
  }
}

std::optional<size_t> Table::find_column(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) return std::nullopt;
  return static_cast<size_t>(it - columns_.begin());
}

size_t Table::column(std::string_view name) const {
  auto c = find_column(name);
  if (!c) throw ValidationError("missing column '" + std::string(name) + "'");
  return *c;
}

void Table::require_columns(std::initializer_list<std::string_view> names, std::string_view context) const {
  for (auto n : names) {
    if (!find_column(n)) throw ValidationError(std::string(context) + ": missing column '" + std::string(n) + "'");
  }
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns_.size()) {
    throw ValidationError("row has " + std::to_string(row.size()) + " cells, table has " +
                          std::to_string(columns_.size()) + " columns");
  }
  rows_.push_back(std::move(row));
}

std::vector<double> Table::numeric(std::string_view col) const {
  const size_t c = column(col);
  std::vector<double> out;
  out.reserve(rows_.size());
  for (size_t i = 0; i < rows_.size(); ++i) {
    auto v = parse_double(rows_[i][c]);
    if (!v) {
      throw ValidationError("column '" + std::string(col) + "', row " + std::to_string(i + 1) + ": '" + rows_[i][c] +
                            "' is not a number");
    }
    out.push_back(*v);
  }
  return out;
}

Table Table::filter(std::string_view col, const std::set<std::string>& keep) const {
  const size_t c = column(col);
  Table out(columns_);
  for (auto& r : rows_) {
    if (keep.contains(r[c])) out.rows_.push_back(r);
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  if (s == kMissing) return std::numeric_limits<double>::quiet_NaN();
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string format_fixed(double v) {
  if (std::isnan(v)) return std::string(kMissing);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string format_exact(double v) {
  if (std::isnan(v)) return std::string(kMissing);
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_tsv(std::ostream& out, const Table& t, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of("\t\n") != std::string::npos) {
        throw ValidationError("cell '" + cells[i] + "' contains a tab or newline");
      }
      if (i) out << '\t';
      out << cells[i];
    }
    out << '\n';
  };
  line(t.columns());
  for (size_t i = 0; i < t.size(); ++i) line(t.row(i));
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cells;
  size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    cells.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cells;
}

}  // namespace

Table read_tsv(std::istream& in, std::string_view source, std::vector<std::string>* comments) {
  std::string line;
  size_t line_no = 0;
  std::optional<Table> t;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!t) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (comments) comments->push_back(line.size() > 2 ? line.substr(2) : std::string{});
        continue;
      }
      t.emplace(split_tabs(line));
      continue;
    }
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != t->columns().size()) {
      throw LoadError(std::string(source) + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(t->columns().size()));
    }
    t->add_row(std::move(cells));
  }
  if (!t) throw LoadError(std::string(source) + ": no header line");
  return *t;
}

}  // namespace icprobe
