#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "pcbf/linalg.hpp"
#include "pcbf/qp.hpp"

namespace pcbf {

/// Affine matrix inequality M(z) = base + sum_j z_j coeffs[j] >= 0 (PSD).
struct LmiConstraint
{
  Mat base;
  std::vector<Mat> coeffs;

  Eigen::Index size() const { return base.rows(); }

  Mat evaluate(const Vec & z) const
  {
    Mat m = base;
    for (std::size_t j = 0; j < coeffs.size(); ++j) { m += z(static_cast<Eigen::Index>(j)) * coeffs[j]; }
    return m;
  }

  void validate(Eigen::Index dim) const
  {
    if (static_cast<Eigen::Index>(coeffs.size()) != dim) { throw InvalidArgument("LMI coefficient count mismatch"); }
    require_symmetric(base);
    for (const auto & c : coeffs) {
      if (c.rows() != base.rows() || c.cols() != base.cols()) { throw InvalidArgument("LMI coefficient shape mismatch"); }
      require_symmetric(c);
    }
  }
};

/// A cut xi' M_lmi(z) xi >= 0 with |xi| = 1.
struct Cut
{
  int lmi = 0;
  Vec xi;
};

struct CutSet
{
  std::vector<Cut> cuts;
};

struct LmiSolveResult
{
  QpSolution qp;
  CutSet cuts;                     ///< warm pool followed by the cuts generated here
  std::vector<double> lambda_min;  ///< per LMI at the returned z
  std::vector<char> cut_tight;     ///< per cut: row active at the solution
  int new_cuts = 0;
  int rounds = 0;
};

class CutBudgetExceeded : public Error
{
public:
  CutBudgetExceeded(const std::string & what, LmiSolveResult last) : Error(what), last_(std::move(last)) {}
  const LmiSolveResult & last() const noexcept { return last_; }

private:
  LmiSolveResult last_;
};

namespace detail {

inline void write_cut_row(QuadraticProgram & qp, Eigen::Index r, const LmiConstraint & lmi, const Vec & xi)
{
  for (Eigen::Index j = 0; j < qp.dim(); ++j) {
    qp.A(r, j) = -xi.dot(lmi.coeffs[static_cast<std::size_t>(j)] * xi);
  }
  qp.b(r) = xi.dot(lmi.base * xi);
}

/// Appends one row per cut: -sum_j z_j xi' M_j xi <= xi' M_0 xi.
inline void append_cut_rows(QuadraticProgram & qp, std::span<const LmiConstraint> lmis, std::span<const Cut> cuts)
{
  const Eigen::Index r0 = qp.A.rows();
  qp.A.conservativeResize(r0 + static_cast<Eigen::Index>(cuts.size()), qp.dim());
  qp.b.conservativeResize(r0 + static_cast<Eigen::Index>(cuts.size()));
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    write_cut_row(qp, r0 + static_cast<Eigen::Index>(i), lmis[static_cast<std::size_t>(cuts[i].lmi)], cuts[i].xi);
  }
}

}  // namespace detail

/**
 * Enforces LMI constraints on top of a QP by outer approximation.
 *
 * Each round solves the QP with the current cuts, then adds one cut per
 * eigenvector whose eigenvalue at z is below -tol_psd. `warm` cuts form a pool: a pooled cut enters the
 * QP once the iterate violates it, and eigenvector cuts are generated only when
 * no pooled cut is violated. `max_cuts` bounds the cuts generated by this call.
 */
inline LmiSolveResult solve_qp_with_lmi(
  const QuadraticProgram & qp, std::span<const LmiConstraint> lmis, double tol_psd = 1e-8, int max_cuts = 200,
  const CutSet * warm = nullptr)
{
  if (tol_psd <= 0.0) { throw InvalidArgument("tol_psd must be positive"); }
  for (const auto & lmi : lmis) { lmi.validate(qp.dim()); }

  QuadraticProgram work = qp;
  LmiSolveResult res;
  if (warm) {
    for (const auto & cut : warm->cuts) {
      if (cut.lmi < 0 || static_cast<std::size_t>(cut.lmi) >= lmis.size()) { continue; }
      if (cut.xi.size() != lmis[static_cast<std::size_t>(cut.lmi)].size()) { continue; }
      res.cuts.cuts.push_back(cut);
    }
  }
  QuadraticProgram pool;
  pool.H = qp.H;
  pool.A.resize(0, qp.dim());
  detail::append_cut_rows(pool, lmis, res.cuts.cuts);
  std::vector<char> pooled(res.cuts.cuts.size(), 1);
  // QP row qp.rows() + j holds cut row_cut[j].
  std::vector<std::size_t> row_cut;

  for (;;) {
    ++res.rounds;
    res.qp = solve_qp(work);
    res.lambda_min.assign(lmis.size(), 0.0);
    if (res.qp.status != QpStatus::Optimal) { break; }

    std::vector<std::size_t> hit;
    if (pool.A.rows() > 0) {
      const Vec excess = pool.A * res.qp.z - pool.b;
      for (Eigen::Index i = 0; i < excess.size(); ++i) {
        if (pooled[static_cast<std::size_t>(i)] && excess(i) > tol_psd) { hit.push_back(static_cast<std::size_t>(i)); }
      }
    }
    if (!hit.empty()) {
      const Eigen::Index r0 = work.A.rows();
      work.A.conservativeResize(r0 + static_cast<Eigen::Index>(hit.size()), Eigen::NoChange);
      work.b.conservativeResize(r0 + static_cast<Eigen::Index>(hit.size()));
      for (std::size_t j = 0; j < hit.size(); ++j) {
        work.A.row(r0 + static_cast<Eigen::Index>(j)) = pool.A.row(static_cast<Eigen::Index>(hit[j]));
        work.b(r0 + static_cast<Eigen::Index>(j)) = pool.b(static_cast<Eigen::Index>(hit[j]));
        pooled[hit[j]] = 0;
        row_cut.push_back(hit[j]);
      }
      continue;
    }

    bool violated = false;
    std::vector<SymmetricEigen> eig(lmis.size());
    for (std::size_t i = 0; i < lmis.size(); ++i) {
      eig[i] = jacobi_eigen(lmis[i].evaluate(res.qp.z));
      res.lambda_min[i] = eig[i].values(0);
      violated = violated || eig[i].values(0) < -tol_psd;
    }
    if (!violated) { break; }
    if (res.new_cuts >= max_cuts) {
      double deficit = 0.0;
      for (double l : res.lambda_min) { deficit = std::min(deficit, l); }
      throw CutBudgetExceeded("cut budget exhausted with lambda_min " + std::to_string(deficit), res);
    }
    std::vector<Cut> fresh;
    for (std::size_t i = 0; i < lmis.size(); ++i) {
      for (Eigen::Index j = 0; j < eig[i].values.size() && eig[i].values(j) < -tol_psd; ++j) {
        fresh.push_back({static_cast<int>(i), eig[i].vectors.col(j)});
      }
    }
    detail::append_cut_rows(work, lmis, fresh);
    for (const auto & c : fresh) {
      row_cut.push_back(res.cuts.cuts.size());
      res.cuts.cuts.push_back(c);
    }
    res.new_cuts += static_cast<int>(fresh.size());
  }

  res.cut_tight.assign(res.cuts.cuts.size(), 0);
  for (int i : res.qp.active_set) {
    if (i >= qp.rows()) { res.cut_tight[row_cut[static_cast<std::size_t>(i - qp.rows())]] = 1; }
  }
  // Report multipliers for the caller's rows only.
  if (res.qp.multipliers.size() > qp.rows()) { res.qp.multipliers.conservativeResize(qp.rows()); }
  std::erase_if(res.qp.active_set, [&](int i) { return i >= qp.rows(); });
  return res;
}

/**
 * Cut cache carried across consecutive solves of one filter.
 *
 * A cut is a valid inequality for any parameter value, so replaying old cuts
 * never removes feasible points. Cuts that stay slack for `max_idle` solves in a
 * row are pruned.
 */
class CutStore
{
public:
  explicit CutStore(int max_idle = 50) : max_idle_(max_idle) {}

  CutSet current() const
  {
    CutSet s;
    for (const auto & e : entries_) { s.cuts.push_back(e.cut); }
    return s;
  }

  /// Merge the cuts of a solve that was warm-started from current().
  void update(const LmiSolveResult & res)
  {
    std::vector<Entry> next;
    next.reserve(res.cuts.cuts.size());
    for (std::size_t i = 0; i < res.cuts.cuts.size(); ++i) {
      const bool tight = i < res.cut_tight.size() && res.cut_tight[i];
      int idle = 0;
      if (i < entries_.size()) { idle = entries_[i].idle; }
      idle = tight ? 0 : idle + 1;
      if (idle >= max_idle_) { continue; }
      next.push_back({res.cuts.cuts[i], idle});
    }
    entries_ = std::move(next);
  }

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

private:
  struct Entry
  {
    Cut cut;
    int idle = 0;
  };
  std::vector<Entry> entries_;
  int max_idle_;
};

}  // namespace pcbf
