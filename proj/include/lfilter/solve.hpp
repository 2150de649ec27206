#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lfilter/sparse_operator.hpp"
#include "lfilter/state.hpp"

namespace lfilter {

struct ShiftedSolveOptions {
  double tol = 1e-10;  // relative true residual ||F x - rhs|| / ||rhs||
  long max_iter = 300000;
  bool refine = true;                 // iterative refinement down to the roundoff floor
  int dense_fallback_max_sites = 12;  // LU rescue when the iteration stagnates
};

struct ShiftedSolveInfo {
  long iterations = 0;
  double residual = 0.0;  // absolute ||F x - rhs||
  int refinements = 0;
  bool dense_fallback = false;
};

namespace detail {

/// F v = v + i*alpha*(H - E) v   (adjoint flips the sign of the imaginary part)
inline Vector filter_apply(const SparseOperator& h, double energy, double alpha, bool adj,
                           const Vector& v) {
  Vector hv = h.apply(v);
  hv -= energy * v;
  const Complex ia = adj ? Complex(0.0, -alpha) : Complex(0.0, alpha);
  return v + ia * hv;
}

inline double infinity_norm_bound(const SparseOperator& h) {
  double best = 0.0;
  for (int k = 0; k < h.mat.outerSize(); ++k) {
    double row = 0.0;
    for (SparseMatrix::InnerIterator it(h.mat, k); it; ++it) row += std::abs(it.value());
    best = std::max(best, row);
  }
  return best;
}

/// CG on the normal equations F^dag F x = F^dag b. F^dag F = 1 + alpha^2 (H-E)^2
/// is Hermitian positive definite with spectrum >= 1, so plain CG is reliable;
/// convergence is tracked on the true residual of the original system.
inline Vector cgnr(const SparseOperator& h, double energy, double alpha, const Vector& rhs,
                   double abs_tol, long max_iter, long& iters_used, double& final_res,
                   bool& stagnated) {
  const Eigen::Index dim = rhs.size();
  auto normal_apply = [&](const Vector& v) -> Vector {
    return filter_apply(h, energy, alpha, true, filter_apply(h, energy, alpha, false, v));
  };

  Vector x = Vector::Zero(dim);
  Vector r = filter_apply(h, energy, alpha, true, rhs);  // normal-equation residual at x = 0
  Vector p = r;
  double rr = r.squaredNorm();
  double best_true = rhs.norm();
  long best_iter = 0;
  stagnated = false;

  final_res = best_true;
  if (best_true <= abs_tol) {
    iters_used = 0;
    return x;
  }

  for (long it = 1; it <= max_iter; ++it) {
    Vector ap = normal_apply(p);
    const double p_ap = p.dot(ap).real();
    if (!(p_ap > 0.0)) {
      stagnated = true;  // loss of positivity is a roundoff breakdown
      iters_used = it;
      return x;
    }
    const double step = rr / p_ap;
    x += step * p;
    r -= step * ap;
    const double rr_new = r.squaredNorm();

    if (it % 16 == 0 || rr_new <= 1e-4 * abs_tol * abs_tol) {
      const double true_res = (filter_apply(h, energy, alpha, false, x) - rhs).norm();
      final_res = true_res;
      if (true_res <= abs_tol) {
        iters_used = it;
        return x;
      }
      if (true_res < 0.9 * best_true) {
        best_true = true_res;
        best_iter = it;
      } else if (it - best_iter > 4000) {
        stagnated = true;  // no meaningful progress for thousands of iterations
        iters_used = it;
        return x;
      }
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  stagnated = true;
  iters_used = max_iter;
  final_res = (filter_apply(h, energy, alpha, false, x) - rhs).norm();
  return x;
}

}  // namespace detail

/// Solves (1 + i (H - E)/delta) x = rhs for Hermitian H. delta > 0; an
/// infinite delta is the identity filter. Reports stagnation via exception
/// unless the dense fallback can take over.
inline Vector shifted_solve(const SparseOperator& h, double energy, double delta,
                            const Vector& rhs, ShiftedSolveOptions opts = {},
                            ShiftedSolveInfo* info = nullptr) {
  if (rhs.size() != h.dim()) throw std::invalid_argument("shifted_solve: dimension mismatch");
  if (!(delta > 0.0)) throw std::invalid_argument("shifted_solve: delta must be positive");
  const double alpha = std::isinf(delta) ? 0.0 : 1.0 / delta;

  ShiftedSolveInfo local;
  ShiftedSolveInfo& out_info = info ? *info : local;
  out_info = {};

  if (alpha == 0.0) {
    out_info.residual = 0.0;
    return rhs;
  }

  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return Vector::Zero(rhs.size());

  const double op_bound = 1.0 + alpha * (detail::infinity_norm_bound(h) + std::abs(energy));

  bool stagnated = false;
  long iters = 0;
  double res = 0.0;
  Vector x = detail::cgnr(h, energy, alpha, rhs, opts.tol * rhs_norm, opts.max_iter, iters, res,
                          stagnated);
  out_info.iterations = iters;

  if (!stagnated && opts.refine) {
    // Drive the residual to its roundoff floor; each pass solves a cheap
    // correction system a few digits deep.
    double prev = res;
    for (int pass = 0; pass < 4; ++pass) {
      Vector r = rhs - detail::filter_apply(h, energy, alpha, false, x);
      const double rn = r.norm();
      const double floor = 8.0 * std::numeric_limits<double>::epsilon() * op_bound *
                           std::max(x.norm(), rhs_norm / op_bound);
      if (rn <= floor || rn >= 0.7 * prev) break;
      prev = rn;
      bool inner_stag = false;
      long inner_iters = 0;
      double inner_res = 0.0;
      Vector dx = detail::cgnr(h, energy, alpha, r, std::max(1e-2 * rn, 0.25 * floor),
                               opts.max_iter / 4, inner_iters, inner_res, inner_stag);
      out_info.iterations += inner_iters;
      ++out_info.refinements;
      if (inner_stag) break;
      x += dx;
    }
    res = (detail::filter_apply(h, energy, alpha, false, x) - rhs).norm();
  }
  out_info.residual = res;

  if (res <= opts.tol * rhs_norm) return x;

  if (h.n_sites <= opts.dense_fallback_max_sites) {
    Matrix f = Matrix(h.mat);
    f -= energy * Matrix::Identity(h.dim(), h.dim());
    f *= Complex(0.0, alpha);
    f += Matrix::Identity(h.dim(), h.dim());
    Vector xd = f.partialPivLu().solve(rhs);
    out_info.dense_fallback = true;
    out_info.residual = (detail::filter_apply(h, energy, alpha, false, xd) - rhs).norm();
    return xd;
  }
  throw std::runtime_error("shifted_solve: stagnation, residual " + std::to_string(res) +
                           " after " + std::to_string(out_info.iterations) + " iterations");
}

}  // namespace lfilter
