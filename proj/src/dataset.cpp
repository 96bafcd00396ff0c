#include "hsel/types.hpp"

#include <cmath>

namespace hsel {

namespace {

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

void SelectionDataset::validate() const {
  if (y1.size() != w.rows()) throw std::invalid_argument("w and y1 row counts differ");
  if (y2.size() != x.rows()) throw std::invalid_argument("x and y2 row counts differ");
  Index ones = 0;
  for (Index i = 0; i < y1.size(); ++i) {
    if (y1[i] != 0.0 && y1[i] != 1.0) throw std::invalid_argument("y1 must be binary");
    ones += y1[i] == 1.0;
  }
  if (ones != static_cast<Index>(selected_rows.size()) || ones != x.rows())
    throw std::invalid_argument("selected_rows inconsistent with y1");
  for (size_t k = 0; k < selected_rows.size(); ++k) {
    Index r = selected_rows[k];
    if (r < 0 || r >= w.rows()) throw std::invalid_argument("selected row out of range");
    if (k > 0 && selected_rows[k - 1] >= r)
      throw std::invalid_argument("selected_rows not strictly increasing");
    if (y1[r] != 1.0) throw std::invalid_argument("selected row has y1 = 0");
  }
  if (!all_finite(w) || !all_finite(x) || !y1.allFinite() || !y2.allFinite())
    throw std::invalid_argument("non-finite entries in dataset");
}

std::vector<Index> split_selected(const Vector& y1) {
  std::vector<Index> rows;
  for (Index i = 0; i < y1.size(); ++i)
    if (y1[i] == 1.0) rows.push_back(i);
  return rows;
}

SelectionDataset make_selection_dataset(Matrix w, Vector y1, const Matrix& x_full,
                                        const Vector& y2_full) {
  if (x_full.rows() != w.rows() || y2_full.size() != w.rows())
    throw std::invalid_argument("full-sample shapes disagree");
  SelectionDataset ds;
  ds.selected_rows = split_selected(y1);
  const Index ns = static_cast<Index>(ds.selected_rows.size());
  ds.x.resize(ns, x_full.cols());
  ds.y2.resize(ns);
  for (Index k = 0; k < ns; ++k) {
    ds.x.row(k) = x_full.row(ds.selected_rows[k]);
    ds.y2[k] = y2_full[ds.selected_rows[k]];
  }
  ds.w = std::move(w);
  ds.y1 = std::move(y1);
  ds.validate();
  return ds;
}

std::pair<Matrix, Vector> demean_columns(const Matrix& m) {
  if (m.rows() == 0) throw std::invalid_argument("demean_columns: empty matrix");
  Vector means = m.colwise().mean();
  Matrix centered = m.rowwise() - means.transpose();
  return {std::move(centered), std::move(means)};
}

Vector column_rms(const Matrix& m) {
  if (m.rows() == 0) throw std::invalid_argument("column_rms: empty matrix");
  return (m.array().square().colwise().mean()).sqrt().matrix().transpose();
}

IndexSet extract_support(Vector& beta, double tol) {
  IndexSet support;
  for (Index j = 0; j < beta.size(); ++j) {
    if (std::abs(beta[j]) < tol)
      beta[j] = 0.0;
    else
      support.insert(j);
  }
  return support;
}

}  // namespace hsel
