#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "pcbf/cbf_types.hpp"
#include "pcbf/linalg.hpp"

namespace pcbf {

/// phi_j - (grad_x phi_{j-1} . f + alpha_j(phi_{j-1}, k)) for j = 1..r-1.
inline Vec chain_residual(const Hopcbf & hop, const Dynamics & dyn, const Vec & x, const Vec & k)
{
  const int r = hop.relative_degree();
  Vec res(std::max(0, r - 1));
  if (r <= 1) { return res; }
  const Vec fx = dyn.f(x);
  BarrierValue prev = hop.phi[0](x, k);
  for (int j = 1; j < r; ++j) {
    const BarrierValue cur = hop.phi[static_cast<std::size_t>(j)](x, k);
    const double expected = prev.grad_x.dot(fx) + hop.alphas[static_cast<std::size_t>(j - 1)](prev.value, k);
    res(j - 1) = cur.value - expected;
    prev = cur;
  }
  return res;
}

/// |grad_x phi_{j-1} g(x)|_inf for j = 1..r-1; zero for a valid relative degree r.
inline Vec relative_degree_defect(const Hopcbf & hop, const Dynamics & dyn, const Vec & x, const Vec & k)
{
  const int r = hop.relative_degree();
  Vec res(std::max(0, r - 1));
  if (r <= 1) { return res; }
  const Mat gx = dyn.g(x);
  for (int j = 1; j < r; ++j) {
    const BarrierValue v = hop.phi[static_cast<std::size_t>(j - 1)](x, k);
    res(j - 1) = (v.grad_x.transpose() * gx).cwiseAbs().maxCoeff();
  }
  return res;
}

/**
 * Max over coordinates of |analytic - central difference| / (1 + |analytic|).
 * A non-positive step selects 1e-6 * (1 + |point|_inf).
 */
inline double gradient_check(
  const std::function<double(const Vec &)> & fn, const Vec & gradient, const Vec & point, double step = 0.0)
{
  if (step <= 0.0) { step = 1e-6 * (1.0 + (point.size() ? point.cwiseAbs().maxCoeff() : 0.0)); }
  double worst = 0.0;
  Vec probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    probe(i) = point(i) + step;
    const double up = fn(probe);
    probe(i) = point(i) - step;
    const double down = fn(probe);
    probe(i) = point(i);
    const double fd = (up - down) / (2.0 * step);
    worst = std::max(worst, std::abs(gradient(i) - fd) / (1.0 + std::abs(gradient(i))));
  }
  return worst;
}

/// Worst gradient_check error over both the x and k gradients of a barrier.
inline double barrier_gradient_error(const BarrierFn & fn, const Vec & x, const Vec & k)
{
  const BarrierValue v = fn(x, k);
  const double ex = gradient_check([&](const Vec & xx) { return fn(xx, k).value; }, v.grad_x, x);
  const double ek = k.size() ? gradient_check([&](const Vec & kk) { return fn(x, kk).value; }, v.grad_k, k) : 0.0;
  return std::max(ex, ek);
}

struct Membership
{
  double min_phi = std::numeric_limits<double>::infinity();
  double min_rho = std::numeric_limits<double>::infinity();

  bool inside(double tol = 0.0) const { return min_phi >= -tol && min_rho >= -tol; }
};

/// (x, k) lies in the safe augmented set iff both minima are nonnegative.
inline Membership membership(
  const Hopcbf & hop, const ParamConstraintSet & params, const Vec & x, const Vec & k, double t)
{
  Membership m;
  for (const auto & phi : hop.phi) { m.min_phi = std::min(m.min_phi, phi(x, k).value); }
  for (const auto & c : params.scalar) { m.min_rho = std::min(m.min_rho, c.eval(k, t).value); }
  for (const auto & c : params.matrix) { m.min_rho = std::min(m.min_rho, min_eigenvalue(c.rho(k))); }
  return m;
}

/// alpha(0, k) = 0 to 1e-12 and strictly increasing on a 100-point grid of [0, y_max].
inline bool check_class_k(const ClassK & alpha, const std::vector<Vec> & k_samples, double y_max = 10.0)
{
  for (const auto & k : k_samples) {
    if (std::abs(alpha(0.0, k)) > 1e-12) { return false; }
    double prev = alpha(0.0, k);
    for (int i = 1; i < 100; ++i) {
      const double cur = alpha(y_max * i / 99.0, k);
      if (!(cur > prev)) { return false; }
      prev = cur;
    }
  }
  return true;
}

/// Max relative mismatch between supplied Jacobians and central differences.
inline double dynamics_jacobian_error(const Dynamics & dyn, const Vec & x)
{
  double worst = 0.0;
  const double step = 1e-6 * (1.0 + x.cwiseAbs().maxCoeff());
  if (dyn.jac_f) {
    const Mat j = dyn.jac_f(x);
    for (int r = 0; r < dyn.n; ++r) {
      Vec grad = j.row(r).transpose();
      worst = std::max(worst, gradient_check([&](const Vec & xx) { return dyn.f(xx)(r); }, grad, x, step));
    }
  }
  if (dyn.jac_g) {
    const auto jg = dyn.jac_g(x);
    for (int r = 0; r < dyn.n; ++r) {
      for (int c = 0; c < dyn.m; ++c) {
        Vec grad(dyn.n);
        for (int i = 0; i < dyn.n; ++i) { grad(i) = jg[static_cast<std::size_t>(i)](r, c); }
        worst = std::max(worst, gradient_check([&](const Vec & xx) { return dyn.g(xx)(r, c); }, grad, x, step));
      }
    }
  }
  return worst;
}

/// max |D(k, a v1 + v2) - a D(k, v1) - D(k, v2)|.
inline double linearity_defect(const MatrixParamConstraint & c, const Vec & k, const Vec & v1, const Vec & v2, double a)
{
  const Mat lhs = c.dir_deriv(k, a * v1 + v2);
  const Mat rhs = a * c.dir_deriv(k, v1) + c.dir_deriv(k, v2);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

struct HopcbfReport
{
  double max_chain_residual = 0.0;
  double max_degree_defect = 0.0;
  double max_gradient_error = 0.0;
  int samples = 0;

  bool ok(double chain_tol = 1e-8, double degree_tol = 1e-10, double grad_tol = 1e-5) const
  {
    return max_chain_residual <= chain_tol && max_degree_defect <= degree_tol && max_gradient_error <= grad_tol;
  }
};

/// Evaluates the registration checks at `count` points drawn from `sample`.
inline HopcbfReport inspect_hopcbf(
  const Hopcbf & hop, const Dynamics & dyn, const std::function<std::pair<Vec, Vec>()> & sample, int count = 200)
{
  HopcbfReport rep;
  for (int i = 0; i < count; ++i) {
    const auto [x, k] = sample();
    const Vec res = chain_residual(hop, dyn, x, k);
    const Vec def = relative_degree_defect(hop, dyn, x, k);
    if (res.size()) { rep.max_chain_residual = std::max(rep.max_chain_residual, res.cwiseAbs().maxCoeff()); }
    if (def.size()) { rep.max_degree_defect = std::max(rep.max_degree_defect, def.maxCoeff()); }
    for (const auto & phi : hop.phi) {
      rep.max_gradient_error = std::max(rep.max_gradient_error, barrier_gradient_error(phi, x, k));
    }
    ++rep.samples;
  }
  return rep;
}

/// Throws ValidationError unless inspect_hopcbf passes its thresholds.
inline void register_hopcbf(
  const Hopcbf & hop, const Dynamics & dyn, const std::function<std::pair<Vec, Vec>()> & sample, int count = 200)
{
  if (hop.alphas.size() != hop.phi.size() || hop.phi.empty()) {
    throw ValidationError("HOPCBF needs one class-K function per chain element");
  }
  const auto rep = inspect_hopcbf(hop, dyn, sample, count);
  if (!rep.ok()) {
    std::ostringstream os;
    os << "HOPCBF registration failed: chain residual " << rep.max_chain_residual << ", relative degree defect "
       << rep.max_degree_defect << ", gradient error " << rep.max_gradient_error;
    throw ValidationError(os.str());
  }
}

}  // namespace pcbf
