#pragma once

#include <string>
#include <vector>

#include "tailkit/common.hpp"

namespace tailkit {

// Column-oriented numeric table.  Missing cells are stored as NaN and
// reported through is_missing.
class Series {
 public:
  Series() = default;

  int n_rows() const { return n_; }
  int n_cols() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

  bool has_column(const std::string& name) const;
  // Throws SchemaError naming the column when absent.
  int col_index(const std::string& name) const;

  const std::vector<double>& col(const std::string& name) const;
  const std::vector<double>& col(int idx) const { return cols_[idx]; }
  double at(int row, const std::string& name) const;
  double at(int row, int col) const { return cols_[col][row]; }
  bool is_missing(int row, int col) const;

  void add_column(const std::string& name, std::vector<double> values);
  void set(int row, int col, double value) { cols_[col][row] = value; }

  // Row indices where none of the named columns is missing.
  std::vector<int> complete_rows(const std::vector<std::string>& names) const;

  Series subset(const std::vector<int>& rows) const;

  // Header row required; leading '#' lines are skipped (embedded metadata).
  static Series read_csv(const std::string& path);
  // Non-empty comment lines are emitted first, each prefixed with "# ".
  void write_csv(const std::string& path, const std::string& comment = "") const;

 private:
  int n_ = 0;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> cols_;
};

struct CalendarConfig {
  int days_per_year = 300;
  int days_per_month = 25;
  int n_seasons = 2;
};

// Derives year / month / season / day_of_year columns from the row index
// (0-based, one row per day).  Existing columns with these names are kept.
void add_calendar_columns(Series& s, const CalendarConfig& cfg = {});

}  // namespace tailkit
