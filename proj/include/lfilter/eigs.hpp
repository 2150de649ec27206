#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lfilter/sparse_operator.hpp"
#include "lfilter/state.hpp"

namespace lfilter {

enum class Which { lowest, highest };

struct EigenPair {
  double value = 0.0;
  Vector vector;
};

struct LanczosOptions {
  int max_basis = 400;
  int max_restarts = 8;
  double tol = 1e-8;  // accepted residual ||Av - lambda v||
  unsigned seed = 0x5eedu;
};

namespace detail {

inline Vector random_state(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = Complex(dist(rng), dist(rng));
  normalize(v);
  return v;
}

/// Eigendecomposition of the real symmetric tridiagonal (alpha, beta).
inline void tridiag_eigs(const std::vector<double>& alpha, const std::vector<double>& beta,
                         Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const auto m = static_cast<Eigen::Index>(alpha.size());
  Eigen::VectorXd diag(m), sub(std::max<Eigen::Index>(m - 1, 0));
  for (Eigen::Index i = 0; i < m; ++i) diag[i] = alpha[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i + 1 < m; ++i) sub[i] = beta[static_cast<std::size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub);
  if (es.info() != Eigen::Success) throw std::runtime_error("tridiagonal eigensolver failed");
  values = es.eigenvalues();
  vectors = es.eigenvectors();
}

}  // namespace detail

/// Extremal eigenpairs of a Hermitian operator by Lanczos iteration with full
/// reorthogonalization. Returns k pairs sorted from the requested end of the
/// spectrum; every returned pair has verified residual ||Av - lambda v|| <= tol.
template <LinearMap Op>
std::vector<EigenPair> extremal_eigs(const Op& op, int k, Which which, LanczosOptions opts = {}) {
  const Eigen::Index dim = op.dim();
  if (k < 1 || static_cast<Eigen::Index>(k) > dim)
    throw std::invalid_argument("extremal_eigs: k out of range");

  const double sign = (which == Which::highest) ? -1.0 : 1.0;
  auto apply = [&](const Vector& v) -> Vector {
    Vector w = op.apply(v);
    if (sign < 0) w = -w;
    return w;
  };

  std::mt19937_64 rng(opts.seed);
  const int basis_cap = static_cast<int>(std::min<Eigen::Index>(opts.max_basis, dim));

  // Assemble the j-lowest Ritz vectors and verify their residuals exactly.
  auto try_extract = [&](const std::vector<Vector>& basis, const std::vector<double>& alpha,
                         const std::vector<double>& beta,
                         std::vector<EigenPair>& out) -> bool {
    if (static_cast<int>(alpha.size()) < k) return false;
    Eigen::VectorXd theta;
    Eigen::MatrixXd s;
    detail::tridiag_eigs(alpha, beta, theta, s);
    const auto m = static_cast<int>(alpha.size());
    out.clear();
    for (int j = 0; j < k; ++j) {
      Vector x = Vector::Zero(dim);
      for (int i = 0; i < m; ++i) x += s(i, j) * basis[static_cast<std::size_t>(i)];
      normalize(x);
      Vector r = apply(x) - theta[j] * x;
      if (r.norm() > opts.tol) return false;
      out.push_back({sign * theta[j], std::move(x)});
    }
    return true;
  };

  Vector start;
  {
    std::mt19937_64 seed_rng(opts.seed);
    start = detail::random_state(dim, seed_rng);
  }

  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    std::vector<Vector> basis;
    basis.reserve(static_cast<std::size_t>(basis_cap));
    std::vector<double> alpha, beta;
    basis.push_back(start);
    double op_scale = 0.0;

    while (static_cast<int>(basis.size()) <= basis_cap) {
      Vector w = apply(basis.back());
      const double a = basis.back().dot(w).real();
      alpha.push_back(a);
      op_scale = std::max(op_scale, std::abs(a));
      const auto m = static_cast<int>(alpha.size());

      // cheap Ritz residual screen, exact verification on success
      if (m >= k && (m % 4 == 0 || m == basis_cap)) {
        Eigen::VectorXd theta;
        Eigen::MatrixXd s;
        detail::tridiag_eigs(alpha, beta, theta, s);
        Vector res = w - a * basis.back();
        if (basis.size() > 1) res -= beta.back() * basis[basis.size() - 2];
        const double res_norm = res.norm();
        bool screen_ok = true;
        for (int j = 0; j < k && j < m; ++j)
          if (res_norm * std::abs(s(m - 1, j)) > 0.5 * opts.tol) screen_ok = false;
        if (screen_ok || m == basis_cap) {
          std::vector<EigenPair> out;
          if (try_extract(basis, alpha, beta, out)) return out;
          if (m == basis_cap) {
            start = Vector::Zero(dim);
            for (int j = 0; j < k && j < m; ++j)
              for (int i = 0; i < m; ++i) start += s(i, j) * basis[static_cast<std::size_t>(i)];
            start += 1e-6 * detail::random_state(dim, rng);
            normalize(start);
            break;
          }
        }
      }
      if (m == basis_cap) {
        std::vector<EigenPair> out;
        if (try_extract(basis, alpha, beta, out)) return out;
        start = detail::random_state(dim, rng);
        break;
      }

      w -= a * basis.back();
      if (!beta.empty() && basis.size() > 1) w -= beta.back() * basis[basis.size() - 2];
      for (int pass = 0; pass < 2; ++pass) {
        const double before = w.norm();
        for (const auto& q : basis) w -= q.dot(w) * q;
        if (w.norm() > 0.5 * before) break;
      }
      const double b = w.norm();
      op_scale = std::max(op_scale, b);
      if (b <= 1e-12 * std::max(1.0, op_scale)) {
        // exact invariant subspace; harvest it or extend with a fresh direction
        if (static_cast<int>(basis.size()) >= k) {
          std::vector<EigenPair> out;
          if (try_extract(basis, alpha, beta, out)) return out;
        }
        Vector fresh = detail::random_state(dim, rng);
        for (const auto& q : basis) fresh -= q.dot(fresh) * q;
        const double fn = fresh.norm();
        if (fn < 1e-10) throw std::runtime_error("extremal_eigs: basis exhausted the space");
        beta.push_back(0.0);
        basis.push_back(fresh / fn);
      } else {
        beta.push_back(b);
        basis.push_back(w / b);
      }
    }
  }
  throw std::runtime_error("extremal_eigs: not converged within restart cap (tol " +
                           std::to_string(opts.tol) + ")");
}

/// All eigenvalues of a Hermitian operator via dense diagonalization.
/// Takes the real-symmetric path when the matrix has no imaginary part.
inline Eigen::VectorXd dense_spectrum(const SparseOperator& op, int dense_max_sites = 12) {
  if (op.n_sites > dense_max_sites)
    throw std::invalid_argument("dense_spectrum: system too large for dense diagonalization");
  double max_imag = 0.0, max_abs = 0.0;
  for (int kk = 0; kk < op.mat.outerSize(); ++kk)
    for (SparseMatrix::InnerIterator it(op.mat, kk); it; ++it) {
      max_imag = std::max(max_imag, std::abs(it.value().imag()));
      max_abs = std::max(max_abs, std::abs(it.value()));
    }
  if (max_imag <= 1e-14 * std::max(1.0, max_abs)) {
    Eigen::MatrixXd real = Matrix(op.mat).real();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(real, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
    return es.eigenvalues();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(op.mat), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
  return es.eigenvalues();
}

}  // namespace lfilter
