#include "hsel/csv.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace hsel {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool matches_role(const std::string& column, const std::string& entry) {
  if (column == entry) return true;
  if (column.size() <= entry.size() || column.compare(0, entry.size(), entry) != 0)
    return false;
  for (size_t i = entry.size(); i < column.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(column[i]))) return false;
  return true;
}

bool matches_any(const std::string& column, const std::vector<std::string>& entries) {
  for (const auto& e : entries)
    if (matches_role(column, e)) return true;
  return false;
}

double parse_cell(const std::string& cell, Index row, const std::string& column) {
  const std::string t = trim(cell);
  size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != t.size() || t.empty() || !std::isfinite(value))
    throw std::invalid_argument("csv: non-numeric cell in data row " +
                                std::to_string(row + 1) + ", column '" + column + "'");
  return value;
}

}  // namespace

SelectionDataset ingest_csv(const std::string& path, const ColumnRoles& roles,
                            CsvReport* report) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);

  Index col_y1 = -1, col_y2 = -1;
  std::vector<Index> cols_w, cols_x;
  for (Index c = 0; c < static_cast<Index>(header.size()); ++c) {
    const std::string name = trim(header[c]);
    if (name == roles.y1) {
      col_y1 = c;
    } else if (name == roles.y2) {
      col_y2 = c;
    } else {
      // A column may serve both roles (the main-equation regressors are
      // typically a subset of the selection regressors).
      if (matches_any(name, roles.w)) cols_w.push_back(c);
      if (matches_any(name, roles.x)) cols_x.push_back(c);
    }
  }
  if (col_y1 < 0) throw std::invalid_argument("csv: missing column '" + roles.y1 + "'");
  if (col_y2 < 0) throw std::invalid_argument("csv: missing column '" + roles.y2 + "'");
  if (cols_w.empty()) throw std::invalid_argument("csv: no selection regressor columns");
  if (cols_x.empty()) throw std::invalid_argument("csv: no main-equation regressor columns");

  std::vector<double> y1v, y2v;
  std::vector<std::vector<double>> wv, xv;
  std::vector<std::string> warnings;
  Index row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (static_cast<Index>(cells.size()) != static_cast<Index>(header.size()))
      throw std::invalid_argument("csv: data row " + std::to_string(row + 1) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));

    const double y1 = parse_cell(cells[col_y1], row, trim(header[col_y1]));
    if (y1 != 0.0 && y1 != 1.0)
      throw std::invalid_argument("csv: non-binary y1 in data row " +
                                  std::to_string(row + 1));
    const std::string y2_cell = trim(cells[col_y2]);
    double y2 = std::numeric_limits<double>::quiet_NaN();
    if (y1 == 1.0) {
      if (y2_cell.empty())
        throw std::invalid_argument("csv: missing y2 on selected data row " +
                                    std::to_string(row + 1));
      y2 = parse_cell(cells[col_y2], row, trim(header[col_y2]));
    } else if (!y2_cell.empty()) {
      warnings.push_back("csv: y2 value on unselected data row " +
                         std::to_string(row + 1) + " dropped");
    }

    y1v.push_back(y1);
    y2v.push_back(y2);
    wv.emplace_back();
    for (Index c : cols_w) wv.back().push_back(parse_cell(cells[c], row, trim(header[c])));
    xv.emplace_back();
    for (Index c : cols_x) xv.back().push_back(parse_cell(cells[c], row, trim(header[c])));
    ++row;
  }
  if (row == 0) throw std::invalid_argument("csv: no data rows");

  Matrix w(row, static_cast<Index>(cols_w.size()));
  Matrix x_full(row, static_cast<Index>(cols_x.size()));
  Vector y1(row), y2_full(row);
  for (Index i = 0; i < row; ++i) {
    y1[i] = y1v[static_cast<size_t>(i)];
    y2_full[i] = y1[i] == 1.0 ? y2v[static_cast<size_t>(i)] : 0.0;
    for (Index j = 0; j < w.cols(); ++j) w(i, j) = wv[static_cast<size_t>(i)][static_cast<size_t>(j)];
    for (Index j = 0; j < x_full.cols(); ++j)
      x_full(i, j) = xv[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }

  if (report) {
    report->n_rows = row;
    report->n_w = w.cols();
    report->n_x = x_full.cols();
    report->warnings = warnings;
  }
  return make_selection_dataset(std::move(w), std::move(y1), x_full, y2_full);
}

void export_csv(const std::string& path, const Matrix& w, const Vector& y1,
                const Matrix& x_full, const Vector& y2_full) {
  if (w.rows() != y1.size() || x_full.rows() != y1.size() || y2_full.size() != y1.size())
    throw std::invalid_argument("export_csv: dimension mismatch");
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("export_csv: cannot open '" + path + "'");

  out << "y1,y2";
  for (Index j = 0; j < w.cols(); ++j) out << ",w" << (j + 1);
  for (Index j = 0; j < x_full.cols(); ++j) out << ",x" << (j + 1);
  out << "\n";

  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (Index i = 0; i < y1.size(); ++i) {
    out << (y1[i] == 1.0 ? "1" : "0") << ",";
    if (y1[i] == 1.0) put(y2_full[i]);
    for (Index j = 0; j < w.cols(); ++j) {
      out << ",";
      put(w(i, j));
    }
    for (Index j = 0; j < x_full.cols(); ++j) {
      out << ",";
      put(x_full(i, j));
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("export_csv: write failed");
}

}  // namespace hsel
