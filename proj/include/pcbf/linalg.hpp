#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "pcbf/errors.hpp"

namespace pcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double symmetry_defect(const Mat & m)
{
  if (m.rows() != m.cols()) { return std::numeric_limits<double>::infinity(); }
  return m.rows() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Throws NonSymmetric unless |M - M^T| <= 1e-12 * max(1, |M|max).
inline void require_symmetric(const Mat & m, double tol = 1e-12)
{
  const double scale = m.size() == 0 ? 1.0 : std::max(1.0, m.cwiseAbs().maxCoeff());
  if (symmetry_defect(m) > tol * scale) {
    throw NonSymmetric("matrix is not symmetric (defect " + std::to_string(symmetry_defect(m)) + ")");
  }
}

struct SymmetricEigen
{
  Vec values;   ///< ascending
  Mat vectors;  ///< column i pairs with values(i)
};

/**
 * Cyclic Jacobi diagonalization of a small symmetric matrix.
 *
 * Sweeps over all (p, q) pairs in row order until the off-diagonal Frobenius
 * mass drops below eps * |A|_F. Deterministic: the rotation sequence depends
 * only on the input.
 */
inline SymmetricEigen jacobi_eigen(const Mat & input)
{
  require_symmetric(input);
  const Eigen::Index n = input.rows();
  Mat a = 0.5 * (input + input.transpose());
  Mat v = Mat::Identity(n, n);

  const double fro = a.norm();
  const double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) { off += a(p, q) * a(p, q); }
    }
    if (std::sqrt(2.0 * off) <= eps * fro || off == 0.0) { break; }

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) { continue; }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) { order[static_cast<std::size_t>(i)] = i; }
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = order[static_cast<std::size_t>(i)];
    out.values(i) = a(src, src);
    out.vectors.col(i) = v.col(src).normalized();
  }
  return out;
}

struct Eigenpair
{
  double value;
  Vec vector;
};

/// Smallest eigenvalue and a unit eigenvector.
inline Eigenpair min_eigenpair(const Mat & m)
{
  if (m.rows() == 0) { throw InvalidArgument("min_eigenpair of an empty matrix"); }
  auto eig = jacobi_eigen(m);
  return {eig.values(0), eig.vectors.col(0)};
}

inline double min_eigenvalue(const Mat & m) { return min_eigenpair(m).value; }

}  // namespace pcbf
