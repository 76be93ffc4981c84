#include "tailkit/series.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace tailkit {

bool Series::has_column(const std::string& name) const {
  for (const auto& n : names_)
    if (n == name) return true;
  return false;
}

int Series::col_index(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  throw SchemaError("no such column: " + name);
}

const std::vector<double>& Series::col(const std::string& name) const {
  return cols_[col_index(name)];
}

double Series::at(int row, const std::string& name) const {
  return cols_[col_index(name)][row];
}

bool Series::is_missing(int row, int col) const {
  return std::isnan(cols_[col][row]);
}

void Series::add_column(const std::string& name, std::vector<double> values) {
  if (n_cols() == 0)
    n_ = static_cast<int>(values.size());
  else if (static_cast<int>(values.size()) != n_)
    throw std::invalid_argument("add_column: length mismatch for " + name);
  if (has_column(name)) throw std::invalid_argument("add_column: duplicate column " + name);
  names_.push_back(name);
  cols_.push_back(std::move(values));
}

std::vector<int> Series::complete_rows(const std::vector<std::string>& names) const {
  std::vector<int> idx;
  for (const auto& n : names) col_index(n);  // validate up front
  for (int r = 0; r < n_; ++r) {
    bool ok = true;
    for (const auto& n : names)
      if (std::isnan(at(r, n))) {
        ok = false;
        break;
      }
    if (ok) idx.push_back(r);
  }
  return idx;
}

Series Series::subset(const std::vector<int>& rows) const {
  Series out;
  for (int c = 0; c < n_cols(); ++c) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (int r : rows) v.push_back(cols_[c][r]);
    out.add_column(names_[c], std::move(v));
  }
  if (out.n_cols() == 0) out.n_ = 0;
  return out;
}

static bool parse_cell(const std::string& cell, double* out) {
  if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "na") {
    *out = std::nan("");
    return true;
  }
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str()) return false;
  while (*end == ' ' || *end == '\r') ++end;
  if (*end != '\0') return false;
  *out = v;
  return true;
}

static std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

Series Series::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::string line;
  int row = 0;
  // Leading '#' lines carry embedded metadata; the header is the first
  // uncommented line.  Row numbers in errors stay physical.
  do {
    if (!std::getline(in, line)) throw SchemaError("read_csv: empty file " + path);
    ++row;
  } while (!line.empty() && line[0] == '#');
  const auto header = split_csv_line(line);
  std::vector<std::vector<double>> cols(header.size());
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw SchemaError("read_csv: row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v;
      if (!parse_cell(cells[c], &v))
        throw SchemaError("read_csv: row " + std::to_string(row) + " column " + header[c] +
                          ": cannot parse '" + cells[c] + "'");
      cols[c].push_back(v);
    }
  }
  Series s;
  for (std::size_t c = 0; c < header.size(); ++c) s.add_column(header[c], std::move(cols[c]));
  return s;
}

void Series::write_csv(const std::string& path, const std::string& comment) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  if (!comment.empty()) {
    std::istringstream lines(comment);
    std::string cl;
    while (std::getline(lines, cl)) out << "# " << cl << "\n";
  }
  for (int c = 0; c < n_cols(); ++c) out << (c ? "," : "") << names_[c];
  out << "\n";
  std::ostringstream cell;
  cell.precision(17);
  for (int r = 0; r < n_; ++r) {
    for (int c = 0; c < n_cols(); ++c) {
      if (c) out << ",";
      const double v = cols_[c][r];
      if (std::isnan(v)) {
        out << "NA";
      } else {
        cell.str("");
        cell << v;
        out << cell.str();
      }
    }
    out << "\n";
  }
}

void add_calendar_columns(Series& s, const CalendarConfig& cfg) {
  const int n = s.n_rows();
  const int months_per_year = cfg.days_per_year / cfg.days_per_month;
  const int months_per_season = months_per_year / cfg.n_seasons;
  std::vector<double> year(n), month(n), season(n), day(n);
  for (int t = 0; t < n; ++t) {
    const int y = t / cfg.days_per_year;
    const int d = t % cfg.days_per_year;
    const int m = d / cfg.days_per_month;  // 0-based within the year
    year[t] = y + 1;
    day[t] = d + 1;
    month[t] = m + 1;
    season[t] = m / months_per_season + 1;
  }
  if (!s.has_column("year")) s.add_column("year", year);
  if (!s.has_column("month")) s.add_column("month", month);
  if (!s.has_column("season")) s.add_column("season", season);
  if (!s.has_column("day_of_year")) s.add_column("day_of_year", day);
}

}  // namespace tailkit
