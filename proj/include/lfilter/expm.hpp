#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lfilter/eigs.hpp"
#include "lfilter/sparse_operator.hpp"
#include "lfilter/state.hpp"

namespace lfilter {

struct ExpmOptions {
  int max_basis = 64;        // Krylov subspace cap per substep
  double min_substep = 0.0;  // 0 = auto (1e-12 * |t|)
};

namespace detail {

struct LanczosBasis {
  std::vector<Vector> v;
  std::vector<double> alpha;
  std::vector<double> beta;  // beta[j] couples v[j] and v[j+1]
  bool exhausted = false;    // invariant subspace found: expansion is exact
};

template <LinearMap Op>
LanczosBasis build_lanczos(const Op& op, const Vector& start, int max_basis) {
  LanczosBasis lb;
  lb.v.push_back(start);
  double scale = 0.0;
  for (int m = 0; m < max_basis; ++m) {
    Vector w = op.apply(lb.v.back());
    const double a = lb.v.back().dot(w).real();
    lb.alpha.push_back(a);
    w -= a * lb.v.back();
    if (m > 0) w -= lb.beta.back() * lb.v[lb.v.size() - 2];
    for (const auto& q : lb.v) w -= q.dot(w) * q;  // full reorthogonalization
    const double b = w.norm();
    scale = std::max({scale, std::abs(a), b});
    if (b <= 1e-13 * std::max(1.0, scale)) {
      lb.exhausted = true;
      return lb;
    }
    if (m + 1 < max_basis) {
      lb.beta.push_back(b);
      lb.v.push_back(w / b);
    } else {
      lb.beta.push_back(b);  // kept for the residual estimate only
    }
  }
  return lb;
}

/// y(h) = exp(-i h T_m) * e_1 in the Krylov basis (unit first coefficient).
inline Eigen::VectorXcd small_exp(const LanczosBasis& lb, double h) {
  const auto m = static_cast<Eigen::Index>(lb.alpha.size());
  Eigen::VectorXd values;
  Eigen::MatrixXd vecs;
  std::vector<double> sub(lb.beta.begin(),
                          lb.beta.begin() + static_cast<std::ptrdiff_t>(m > 0 ? m - 1 : 0));
  tridiag_eigs(lb.alpha, sub, values, vecs);
  Eigen::VectorXd c0 = vecs.row(0).transpose();  // U^T e_1
  Eigen::VectorXcd phases(m);
  for (Eigen::Index j = 0; j < m; ++j)
    phases[j] = std::exp(Complex(0.0, -h * values[j])) * c0[j];
  return vecs.cast<Complex>() * phases;
}

}  // namespace detail

/// result ~ exp(-i t op) v for Hermitian op, with ||error|| <= tol * ||v||.
/// Lanczos projection with an a-posteriori residual estimate; the time step
/// is subdivided adaptively whenever the estimate exceeds the budget.
template <LinearMap Op>
Vector expm_apply(const Op& op, const Vector& v, double t, double tol, ExpmOptions opts = {}) {
  if (v.size() != op.dim()) throw std::invalid_argument("expm_apply: dimension mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("expm_apply: tolerance must be positive");
  const double vnorm = v.norm();
  if (t == 0.0 || vnorm == 0.0) return v;

  const double total = std::abs(t);
  const double dir = (t > 0.0) ? 1.0 : -1.0;
  const double min_h = opts.min_substep > 0.0 ? opts.min_substep : 1e-12 * total;

  Vector u = v;
  double remaining = total;
  double h_try = total;

  while (remaining > 1e-15 * total) {
    double h = std::min(h_try, remaining);
    const double unorm = u.norm();
    detail::LanczosBasis lb = detail::build_lanczos(op, u / unorm, opts.max_basis);
    const auto m = static_cast<Eigen::Index>(lb.alpha.size());

    Eigen::VectorXcd y;
    double est = 0.0;
    for (;;) {
      y = detail::small_exp(lb, dir * h);
      if (lb.exhausted) break;  // subspace is invariant: projection is exact
      const double beta_last = lb.beta.back();
      const Eigen::VectorXcd y_half = detail::small_exp(lb, dir * h * 0.5);
      est = beta_last * h * std::max(std::abs(y[m - 1]), std::abs(y_half[m - 1]));
      const double budget = 0.5 * tol * vnorm * (h / total);
      if (est <= budget) break;
      h *= 0.5;
      if (h < min_h)
        throw std::runtime_error("expm_apply: tolerance unreachable within subspace cap");
    }

    Vector next = Vector::Zero(u.size());
    for (Eigen::Index j = 0; j < m; ++j) next += y[j] * lb.v[static_cast<std::size_t>(j)];
    u = unorm * next;
    remaining -= h;

    if (!lb.exhausted) {
      const double budget = 0.5 * tol * vnorm * (h / total);
      h_try = (est < 0.1 * budget) ? 2.0 * h : h;
    } else {
      h_try = remaining;
    }
  }
  return u;
}

}  // namespace lfilter
