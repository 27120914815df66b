#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

#include "pcbf/errors.hpp"
#include "pcbf/linalg.hpp"
#include "pcbf/qp.hpp"

namespace pcbf {

/// Control-affine dynamics x' = f(x) + g(x) u.
struct Dynamics
{
  int n = 0;
  int m = 0;
  std::function<Vec(const Vec &)> f;
  std::function<Mat(const Vec &)> g;
  /// Optional analytic Jacobians: df/dx (n x n) and dg/dx_i (n x m each, one per state coordinate).
  std::function<Mat(const Vec &)> jac_f;
  std::function<std::vector<Mat>(const Vec &)> jac_g;

  Vec flow(const Vec & x, const Vec & u) const { return f(x) + g(x) * u; }
};

/// Input set U = { u : A u <= b }.
struct InputPolytope
{
  Mat A;
  Vec b;

  InputPolytope() = default;
  InputPolytope(Mat a, Vec bound) : A(std::move(a)), b(std::move(bound))
  {
    QuadraticProgram qp{Mat::Identity(A.cols(), A.cols()), Vec::Zero(A.cols()), A, b};
    if (A.rows() != b.size()) { throw InvalidArgument("input polytope shape mismatch"); }
    if (solve_qp(qp).status != QpStatus::Optimal) { throw InvalidArgument("input polytope is empty"); }
  }

  static InputPolytope box(const Vec & lower, const Vec & upper)
  {
    const auto m = lower.size();
    Mat a(2 * m, m);
    a << Mat::Identity(m, m), -Mat::Identity(m, m);
    Vec bound(2 * m);
    bound << upper, -lower;
    return {a, bound};
  }

  Eigen::Index dim() const { return A.cols(); }

  bool contains(const Vec & u, double tol = 1e-8) const
  {
    return A.rows() == 0 || (A * u - b).maxCoeff() <= tol;
  }

  /// Clamps u against every row of the form +-c e_j (removes solver round-off on box bounds).
  Vec clip(Vec u) const
  {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      Eigen::Index j = 0;
      const double c = A.row(i).cwiseAbs().maxCoeff(&j);
      if (c == 0.0 || A.row(i).cwiseAbs().sum() != c) { continue; }
      if (A(i, j) > 0.0) {
        u(j) = std::min(u(j), b(i) / A(i, j));
      } else {
        u(j) = std::max(u(j), b(i) / A(i, j));
      }
    }
    return u;
  }
};

/// Class-K function alpha(y, k), optionally with d alpha / dy.
struct ClassK
{
  std::function<double(double, const Vec &)> value;
  std::function<double(double, const Vec &)> derivative;

  double operator()(double y, const Vec & k) const { return value(y, k); }

  static ClassK linear(double slope)
  {
    return {[slope](double y, const Vec &) { return slope * y; }, [slope](double, const Vec &) { return slope; }};
  }
};

/// Barrier-like scalar with gradients in state and parameter.
struct BarrierValue
{
  double value = 0.0;
  Vec grad_x;
  Vec grad_k;
};

using BarrierFn = std::function<BarrierValue(const Vec & x, const Vec & k)>;

/**
 * High-order parametrized barrier: phi_0 = h and
 * phi_j = L_f phi_{j-1} + alpha_j(phi_{j-1}, k), supplied in closed form.
 * `alphas` holds alpha_1 .. alpha_r.
 */
struct Hopcbf
{
  int n_k = 0;
  std::vector<BarrierFn> phi;
  std::vector<ClassK> alphas;

  int relative_degree() const { return static_cast<int>(phi.size()); }
};

/// Relative-degree-one parametrized barrier.
struct Pcbf
{
  int n_k = 0;
  BarrierFn h;
  ClassK alpha;

  Hopcbf as_hopcbf() const { return Hopcbf{n_k, {h}, {alpha}}; }
};

struct ScalarParamValue
{
  double value = 0.0;
  Vec grad_k;
  double dt = 0.0;  ///< explicit time partial (right derivative at kinks)
};

/// Scalar parameter constraint rho(k, t) >= 0 with rate function beta.
struct ScalarParamConstraint
{
  std::function<ScalarParamValue(const Vec & k, double t)> eval;
  ClassK beta;
};

/// Matrix parameter constraint rho(k) >= 0 (PSD) with linear rate gamma.
struct MatrixParamConstraint
{
  std::function<Mat(const Vec & k)> rho;
  /// Directional derivative D rho(k)[v]; linear in v.
  std::function<Mat(const Vec & k, const Vec & v)> dir_deriv;
  double gamma = 1.0;
};

struct ParamConstraintSet
{
  std::vector<ScalarParamConstraint> scalar;
  std::vector<MatrixParamConstraint> matrix;

  std::size_t size() const { return scalar.size() + matrix.size(); }
};

}  // namespace pcbf
