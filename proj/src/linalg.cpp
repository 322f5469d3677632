#include "efnlm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "efnlm/error.hpp"

namespace efnlm {

namespace {

constexpr int kMaxSweeps = 64;
constexpr double kOffDiagonalTol = 1e-12;

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    fail(ErrorCode::DimensionMismatch,
         std::string(what) + ": expected a square matrix, got " + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()));
  }
}

double off_diagonal_norm(const Matrix& a) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (i != j) sum += a(i, j) * a(i, j);
  return std::sqrt(sum);
}

}  // namespace

bool is_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol * scale) return false;
  return true;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  require_square(a, "solve_spd");
  if (a.rows() != b.rows()) {
    fail(ErrorCode::DimensionMismatch, "solve_spd: right-hand side has " + std::to_string(b.rows()) +
                                           " rows, system has " + std::to_string(a.rows()));
  }
  if (!is_symmetric(a)) fail(ErrorCode::NotSymmetric, "solve_spd: matrix is not symmetric");
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::NotPositiveDefinite, "solve_spd: non-positive pivot in Cholesky factorization");
  }
  return llt.solve(b);
}

Matrix inverse_spd(const Matrix& a) {
  Matrix inv = solve_spd(a, Matrix::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

EigenDecomposition sym_eigen(const Matrix& s) {
  require_square(s, "sym_eigen");
  if (!is_symmetric(s)) fail(ErrorCode::NotSymmetric, "sym_eigen: matrix is not symmetric");
  if (!s.allFinite()) fail(ErrorCode::DomainError, "sym_eigen: non-finite entry");

  const Eigen::Index n = s.rows();
  Matrix a = 0.5 * (s + s.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double threshold = kOffDiagonalTol * a.norm();

  int sweep = 0;
  for (; sweep <= kMaxSweeps; ++sweep) {
    if (off_diagonal_norm(a) <= threshold) break;
    if (sweep == kMaxSweeps) {
      fail(ErrorCode::NoConvergence, "sym_eigen: exceeded " + std::to_string(kMaxSweeps) + " sweeps");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rutishauser's stable rotation
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  EigenDecomposition out;
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.eigenvalues(j) = a(src, src);
    Vector col = v.col(src);
    Eigen::Index lead = 0;
    for (Eigen::Index k = 1; k < n; ++k)
      if (std::abs(col(k)) > std::abs(col(lead)) * (1.0 + 1e-12)) lead = k;
    if (col(lead) < 0.0) col = -col;
    out.eigenvectors.col(j) = col;
  }
  return out;
}

double trace(const Matrix& s) {
  require_square(s, "trace");
  return s.trace();
}

}  // namespace efnlm
