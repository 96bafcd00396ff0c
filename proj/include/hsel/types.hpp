#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

namespace hsel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using IndexSet = std::set<Index>;

/// Selection-model dataset: full-sample selection equation (w, y1) plus the
/// selected subsample (x, y2) restricted to rows with y1 = 1.
struct SelectionDataset {
  Matrix w;                          // n x d selection regressors
  Vector y1;                         // length n, entries in {0,1}
  Matrix x;                          // n_s x p main-equation regressors
  Vector y2;                         // length n_s outcome on selected rows
  std::vector<Index> selected_rows;  // strictly increasing, into 0..n-1

  Index n() const { return w.rows(); }
  Index d() const { return w.cols(); }
  Index n_selected() const { return x.rows(); }
  Index p() const { return x.cols(); }

  // Throws std::invalid_argument if any structural invariant fails.
  void validate() const;
};

// Builds the dataset from full-sample main-equation data: keeps only rows
// with y1 = 1 in (x_full, y2_full).
SelectionDataset make_selection_dataset(Matrix w, Vector y1, const Matrix& x_full,
                                        const Vector& y2_full);

// Row indices with y1 = 1, in order.
std::vector<Index> split_selected(const Vector& y1);

// Centers each column; returns the column means for un-centering.
std::pair<Matrix, Vector> demean_columns(const Matrix& m);

// Per-column root mean square: sqrt((1/n) sum_i m(i,j)^2).
Vector column_rms(const Matrix& m);

/// Sparse coefficient estimate with its support and a KKT certificate.
struct SparseFit {
  Vector beta;
  IndexSet support;
  double lambda = 0.0;
  double kkt_residual = 0.0;
  double objective = 0.0;
  bool converged = true;
};

// Coordinates below this magnitude are treated as exact zeros when the
// support is extracted.
inline constexpr double kSupportZeroTol = 1e-10;

IndexSet extract_support(Vector& beta, double tol = kSupportZeroTol);

}  // namespace hsel
