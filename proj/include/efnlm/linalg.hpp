#pragma once

#include <Eigen/Dense>

namespace efnlm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EigenDecomposition {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // column j pairs with eigenvalues(j)
  int sweeps = 0;
};

/// Relative symmetry test: |a_ij - a_ji| <= tol * max(1, max|a|).
bool is_symmetric(const Matrix& a, double tol = 1e-10);

/// Solves A X = B for symmetric positive-definite A via Cholesky.
/// Throws NotPositiveDefinite, NotSymmetric or DimensionMismatch.
Matrix solve_spd(const Matrix& a, const Matrix& b);

/// Inverse of a symmetric positive-definite matrix (symmetrized on return).
Matrix inverse_spd(const Matrix& a);

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps run in fixed row-major pivot order until the off-diagonal
/// Frobenius norm drops below 1e-12 times the Frobenius norm of the input
/// (at most 64 sweeps). Eigenvalues are sorted descending; each eigenvector
/// is oriented so that its entry of largest magnitude is positive, the
/// lowest index winning ties (magnitudes equal to 1e-12 relative count as
/// tied). Identical inputs give bit-identical outputs.
EigenDecomposition sym_eigen(const Matrix& s);

double trace(const Matrix& s);

}  // namespace efnlm
