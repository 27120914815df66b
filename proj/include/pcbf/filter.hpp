#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <iomanip>
#include <optional>
#include <sstream>
#include <vector>

#include "pcbf/cbf_types.hpp"
#include "pcbf/lmi.hpp"
#include "pcbf/log.hpp"
#include "pcbf/qp.hpp"
#include "pcbf/validation.hpp"

namespace pcbf {

struct FilterConfig
{
  double mu = 0.01;  ///< weight on |v|^2
  Vec W;             ///< diagonal weight on u; empty means identity
  Vec V;             ///< diagonal weight on v; empty means identity
  double nu = 10.0;  ///< CLF slack weight
  ClassK alpha_clf = ClassK::linear(1.0);
  double tol_psd = 1e-8;
  int max_cuts = 200;
  double v_bound = 1e6;  ///< box on each v_j to keep the QP bounded

  void validate(Eigen::Index m, Eigen::Index n_k) const
  {
    if (!(mu > 0.0) || !(nu > 0.0)) { throw InvalidArgument("mu and nu must be positive"); }
    if (W.size() && (W.size() != m || W.minCoeff() <= 0.0)) { throw InvalidArgument("W must be positive, size m"); }
    if (V.size() && (V.size() != n_k || V.minCoeff() <= 0.0)) { throw InvalidArgument("V must be positive, size n_k"); }
  }
};

enum class RowKind { Chain, Terminal, ScalarParam };

/// Safety row du . u + dv . v + offset >= 0.
struct SafetyRow
{
  RowKind kind = RowKind::Terminal;
  int index = 0;  ///< chain order j, or constraint index
  Vec du;
  Vec dv;
  double offset = 0.0;

  double eval(const Vec & u, const Vec & v) const { return du.dot(u) + dv.dot(v) + offset; }
  double scale() const
  {
    double s = 1.0;
    if (du.size()) { s = std::max(s, du.cwiseAbs().maxCoeff()); }
    if (dv.size()) { s = std::max(s, dv.cwiseAbs().maxCoeff()); }
    return s;
  }
};

struct AssembledRows
{
  std::vector<SafetyRow> rows;
  std::vector<LmiConstraint> lmis;  ///< over v only: gamma rho(k) + D rho(k)[v] >= 0
};

/**
 * Builds the augmented-input constraints at (x, k, t), in order:
 *  (a) chain rows  grad_k phi_{j-1} . v + phi_j >= 0, j = 1..r-1
 *  (b) the order-r row with the input term
 *  (c) one row per scalar parameter constraint
 *  (d) one LMI per matrix parameter constraint.
 */
inline AssembledRows assemble_rows(
  const Hopcbf & hop, const Dynamics & dyn, const ParamConstraintSet & params, const Vec & x, const Vec & k, double t)
{
  AssembledRows out;
  const int r = hop.relative_degree();
  const auto n_k = k.size();
  std::vector<BarrierValue> phi;
  phi.reserve(static_cast<std::size_t>(r));
  for (const auto & fn : hop.phi) { phi.push_back(fn(x, k)); }

  for (int j = 1; j < r; ++j) {
    const auto & prev = phi[static_cast<std::size_t>(j - 1)];
    out.rows.push_back({RowKind::Chain, j, Vec::Zero(dyn.m), prev.grad_k, phi[static_cast<std::size_t>(j)].value});
  }

  const auto & last = phi.back();
  const Vec lgh = dyn.g(x).transpose() * last.grad_x;
  const double lfh = last.grad_x.dot(dyn.f(x));
  out.rows.push_back({RowKind::Terminal, r, lgh, last.grad_k, lfh + hop.alphas.back()(last.value, k)});

  for (std::size_t i = 0; i < params.scalar.size(); ++i) {
    const auto & c = params.scalar[i];
    const auto ev = c.eval(k, t);
    out.rows.push_back({RowKind::ScalarParam, static_cast<int>(i), Vec::Zero(dyn.m), ev.grad_k, ev.dt + c.beta(ev.value, k)});
  }

  for (const auto & c : params.matrix) {
    LmiConstraint lmi;
    lmi.base = c.gamma * c.rho(k);
    lmi.coeffs.reserve(static_cast<std::size_t>(n_k));
    for (Eigen::Index j = 0; j < n_k; ++j) { lmi.coeffs.push_back(c.dir_deriv(k, Vec::Unit(n_k, j))); }
    out.lmis.push_back(std::move(lmi));
  }
  return out;
}

struct FilterOutput
{
  Vec u;
  Vec v;
  std::optional<double> slack;
  std::vector<char> rows_active;  ///< per assembled scalar safety row
  QpSolution qp;
  AssembledRows rows;
  std::vector<double> lmi_lambda_min;
  Membership entry_membership;
  int cuts = 0;
};

struct ClfValue
{
  double value = 0.0;
  Vec grad;
};

namespace detail {

inline std::string dump_state(
  const AssembledRows & rows, const Vec & x, const Vec & k, double t, const Membership & mem, const CutSet * cuts)
{
  std::ostringstream os;
  os << std::setprecision(17);
  os << "t=" << t << "\nx=" << x.transpose() << "\nk=" << k.transpose() << "\nmin_phi=" << mem.min_phi
     << " min_rho=" << mem.min_rho << "\n";
  for (const auto & row : rows.rows) {
    os << "row kind=" << static_cast<int>(row.kind) << " idx=" << row.index << " du=[" << row.du.transpose()
       << "] dv=[" << row.dv.transpose() << "] offset=" << row.offset << "\n";
  }
  for (std::size_t i = 0; i < rows.lmis.size(); ++i) {
    os << "lmi " << i << " base=\n" << rows.lmis[i].base << "\n";
  }
  if (cuts) { os << "cuts=" << cuts->cuts.size() << "\n"; }
  return os.str();
}

struct ProgramLayout
{
  Eigen::Index m = 0;
  Eigen::Index n_k = 0;
  bool with_slack = false;
  Eigen::Index dim() const { return m + n_k + (with_slack ? 1 : 0); }
};

/// Rows of A z <= b: safety rows, optional CLF row, input polytope, v box.
inline QuadraticProgram build_program(
  const ProgramLayout & lay, const AssembledRows & rows, const InputPolytope & input, const FilterConfig & cfg,
  const Vec & u_ref, const std::optional<std::pair<Vec, double>> & clf_row)
{
  const Eigen::Index d = lay.dim();
  QuadraticProgram qp;
  qp.H = Mat::Zero(d, d);
  qp.f = Vec::Zero(d);
  for (Eigen::Index i = 0; i < lay.m; ++i) {
    const double w = cfg.W.size() ? cfg.W(i) : 1.0;
    qp.H(i, i) = 2.0 * w;
    qp.f(i) = -2.0 * w * u_ref(i);
  }
  for (Eigen::Index j = 0; j < lay.n_k; ++j) {
    const double w = cfg.V.size() ? cfg.V(j) : 1.0;
    qp.H(lay.m + j, lay.m + j) = 2.0 * cfg.mu * w;
  }
  if (lay.with_slack) { qp.H(d - 1, d - 1) = 2.0 * cfg.nu; }

  const Eigen::Index n_rows = static_cast<Eigen::Index>(rows.rows.size()) + (clf_row ? 1 : 0) + input.A.rows() + 2 * lay.n_k;
  qp.A = Mat::Zero(n_rows, d);
  qp.b = Vec::Zero(n_rows);
  Eigen::Index r = 0;
  for (const auto & row : rows.rows) {
    qp.A.block(r, 0, 1, lay.m) = -row.du.transpose();
    if (lay.n_k) { qp.A.block(r, lay.m, 1, lay.n_k) = -row.dv.transpose(); }
    qp.b(r) = row.offset;
    ++r;
  }
  if (clf_row) {
    // L_g V u - s <= -(L_f V + alpha_clf(V))
    qp.A.block(r, 0, 1, lay.m) = clf_row->first.transpose();
    qp.A(r, d - 1) = -1.0;
    qp.b(r) = clf_row->second;
    ++r;
  }
  for (Eigen::Index i = 0; i < input.A.rows(); ++i, ++r) {
    qp.A.block(r, 0, 1, lay.m) = input.A.row(i);
    qp.b(r) = input.b(i);
  }
  for (Eigen::Index j = 0; j < lay.n_k; ++j) {
    qp.A(r, lay.m + j) = 1.0;
    qp.b(r++) = cfg.v_bound;
    qp.A(r, lay.m + j) = -1.0;
    qp.b(r++) = cfg.v_bound;
  }
  return qp;
}

inline std::vector<LmiConstraint> lift_lmis(const ProgramLayout & lay, const std::vector<LmiConstraint> & over_v)
{
  std::vector<LmiConstraint> out;
  for (const auto & lmi : over_v) {
    LmiConstraint full;
    full.base = lmi.base;
    const Mat zero = Mat::Zero(lmi.size(), lmi.size());
    full.coeffs.assign(static_cast<std::size_t>(lay.dim()), zero);
    for (Eigen::Index j = 0; j < lay.n_k; ++j) {
      full.coeffs[static_cast<std::size_t>(lay.m + j)] = lmi.coeffs[static_cast<std::size_t>(j)];
    }
    out.push_back(std::move(full));
  }
  return out;
}

inline FilterOutput solve_filter(
  const ProgramLayout & lay, AssembledRows rows, const InputPolytope & input, const FilterConfig & cfg,
  const Vec & u_ref, const std::optional<std::pair<Vec, double>> & clf_row, const Vec & x, const Vec & k, double t,
  const Membership & mem, CutStore * store)
{
  const QuadraticProgram qp = build_program(lay, rows, input, cfg, u_ref, clf_row);
  FilterOutput out;
  out.entry_membership = mem;

  CutSet warm;
  if (rows.lmis.empty()) {
    out.qp = solve_qp(qp);
  } else {
    const auto lmis = lift_lmis(lay, rows.lmis);
    if (store) { warm = store->current(); }
    auto res = solve_qp_with_lmi(qp, lmis, cfg.tol_psd, cfg.max_cuts, store ? &warm : nullptr);
    if (store && res.qp.status == QpStatus::Optimal) { store->update(res); }
    out.cuts = static_cast<int>(res.cuts.cuts.size());
    warm = res.cuts;
    out.qp = std::move(res.qp);
  }

  if (out.qp.status != QpStatus::Optimal) {
    const std::string why = std::string("filter QP ") + std::string(to_string(out.qp.status)) +
                            (mem.inside() ? " inside the safe set" : " outside the safe set");
    throw SafetyFault(why, dump_state(rows, x, k, t, mem, &warm));
  }

  const Vec & z = out.qp.z;
  out.u = input.clip(z.head(lay.m));
  out.v = z.segment(lay.m, lay.n_k);
  if (lay.with_slack) { out.slack = z(lay.dim() - 1); }

  // Independent post-check of every safety row, the input set and the LMIs.
  out.rows_active.resize(rows.rows.size());
  for (std::size_t i = 0; i < rows.rows.size(); ++i) {
    const double val = rows.rows[i].eval(out.u, out.v);
    if (val < -1e-8 * rows.rows[i].scale()) {
      throw SafetyFault("filter output violates a safety row by " + std::to_string(val), dump_state(rows, x, k, t, mem, &warm));
    }
    out.rows_active[i] = std::binary_search(out.qp.active_set.begin(), out.qp.active_set.end(), static_cast<int>(i));
  }
  if (!input.contains(out.u, 1e-8)) {
    throw SafetyFault("filter output leaves the input set", dump_state(rows, x, k, t, mem, &warm));
  }
  for (const auto & lmi : rows.lmis) {
    Eigen::SelfAdjointEigenSolver<Mat> es(lmi.evaluate(out.v), Eigen::EigenvaluesOnly);
    const double lam = es.eigenvalues()(0);
    out.lmi_lambda_min.push_back(lam);
    if (lam < -cfg.tol_psd * (1.0 + lmi.base.cwiseAbs().maxCoeff())) {
      throw SafetyFault("filter output violates an LMI, lambda_min " + std::to_string(lam), dump_state(rows, x, k, t, mem, &warm));
    }
  }
  out.rows = std::move(rows);
  return out;
}

inline void note_membership(const Membership & mem, double t)
{
  if (!mem.inside(1e-6)) {
    log().debug("t={:.4f}: state outside safe set on entry (min_phi={:.3e}, min_rho={:.3e})", t, mem.min_phi, mem.min_rho);
  }
}

}  // namespace detail

/// One PCBF/HOPCBF-QP step: minimizes |u - u_ref|_W^2 + mu |v|_V^2 over the assembled rows.
inline FilterOutput filter_step(
  const Hopcbf & hop, const Dynamics & dyn, const InputPolytope & input, const ParamConstraintSet & params,
  const FilterConfig & cfg, const Vec & x, const Vec & k, double t, const Vec & u_ref, CutStore * store = nullptr)
{
  const Membership mem = membership(hop, params, x, k, t);
  detail::note_membership(mem, t);
  const detail::ProgramLayout lay{dyn.m, k.size(), false};
  return detail::solve_filter(lay, assemble_rows(hop, dyn, params, x, k, t), input, cfg, u_ref, std::nullopt, x, k, t, mem, store);
}

/// CLF-PCBF-QP step: minimizes |u|_W^2 + mu |v|_V^2 + nu s^2 with L_f V + L_g V u + alpha_clf(V) <= s.
inline FilterOutput clf_filter_step(
  const Hopcbf & hop, const Dynamics & dyn, const InputPolytope & input, const ParamConstraintSet & params,
  const FilterConfig & cfg, const ClfValue & clf, const Vec & x, const Vec & k, double t, CutStore * store = nullptr)
{
  const Membership mem = membership(hop, params, x, k, t);
  detail::note_membership(mem, t);
  const detail::ProgramLayout lay{dyn.m, k.size(), true};
  const Vec lgv = dyn.g(x).transpose() * clf.grad;
  const double rhs = -(clf.grad.dot(dyn.f(x)) + cfg.alpha_clf(clf.value, k));
  return detail::solve_filter(
    lay, assemble_rows(hop, dyn, params, x, k, t), input, cfg, Vec::Zero(dyn.m), std::make_pair(lgv, rhs), x, k, t, mem, store);
}

/// A filter bound to one problem, carrying the cut cache between steps.
class SafetyFilter
{
public:
  SafetyFilter(Hopcbf hop, Dynamics dyn, InputPolytope input, ParamConstraintSet params, FilterConfig cfg)
      : hop_(std::move(hop)), dyn_(std::move(dyn)), input_(std::move(input)), params_(std::move(params)), cfg_(std::move(cfg))
  {
    cfg_.validate(dyn_.m, hop_.n_k);
  }

  FilterOutput step(const Vec & x, const Vec & k, double t, const Vec & u_ref)
  {
    return filter_step(hop_, dyn_, input_, params_, cfg_, x, k, t, u_ref, &cuts_);
  }

  FilterOutput clf_step(const ClfValue & clf, const Vec & x, const Vec & k, double t)
  {
    return clf_filter_step(hop_, dyn_, input_, params_, cfg_, clf, x, k, t, &cuts_);
  }

  void reset() { cuts_.clear(); }

  const Hopcbf & hopcbf() const { return hop_; }
  const Dynamics & dynamics() const { return dyn_; }
  const InputPolytope & input() const { return input_; }
  const ParamConstraintSet & params() const { return params_; }
  const FilterConfig & config() const { return cfg_; }
  const CutStore & cut_store() const { return cuts_; }

private:
  Hopcbf hop_;
  Dynamics dyn_;
  InputPolytope input_;
  ParamConstraintSet params_;
  FilterConfig cfg_;
  CutStore cuts_;
};

}  // namespace pcbf
