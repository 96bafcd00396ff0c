#pragma once

#include <string>

#include "hsel/types.hpp"

namespace hsel {

/// Maps CSV header names onto dataset roles. w and x entries match a column
/// either exactly or as a prefix followed by digits (e.g. "w" matches "w12").
struct ColumnRoles {
  std::string y1 = "y1";
  std::string y2 = "y2";
  std::vector<std::string> w = {"w"};
  std::vector<std::string> x = {"x"};
};

struct CsvReport {
  Index n_rows = 0;
  Index n_w = 0;
  Index n_x = 0;
  std::vector<std::string> warnings;
};

// Reads a UTF-8, comma-separated file with a header row. Cells must be
// numeric; the only legal empty cell is y2 on a row with y1 = 0. A y2 value
// on an unselected row is dropped with a warning; a missing y2 on a selected
// row is an error. Parse errors name the offending row and column.
SelectionDataset ingest_csv(const std::string& path, const ColumnRoles& roles,
                            CsvReport* report = nullptr);

// Writes the full-sample design in the layout ingest_csv reads: y1, y2
// (blank where y1 = 0), then the w and x columns.
void export_csv(const std::string& path, const Matrix& w, const Vector& y1,
                const Matrix& x_full, const Vector& y2_full);

}  // namespace hsel
