// Independent reference implementations used only by the test suites.
// Everything here is built directly from 2x2 matrices and dense linear
// algebra so it shares no code path with the library it checks.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <random>
#include <span>
#include <vector>

#include "lfilter/pauli.hpp"
#include "lfilter/sparse_operator.hpp"
#include "lfilter/state.hpp"

namespace oracles {

using lfilter::Complex;
using lfilter::Matrix;
using lfilter::PauliString;
using lfilter::Vector;

inline Eigen::Matrix2cd single_site_matrix(lfilter::Pauli p) {
  Eigen::Matrix2cd m;
  switch (p) {
    case lfilter::Pauli::I: m << 1, 0, 0, 1; break;
    case lfilter::Pauli::X: m << 0, 1, 1, 0; break;
    case lfilter::Pauli::Y: m << 0, Complex(0, -1), Complex(0, 1), 0; break;
    case lfilter::Pauli::Z: m << 1, 0, 0, -1; break;
  }
  return m;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Explicit tensor-product construction; site 0 is the leftmost factor
/// (most significant bit), matching the library's basis convention.
inline Matrix dense_from_string(const PauliString& s) {
  Matrix m = Matrix::Identity(1, 1);
  for (int i = 0; i < s.n_sites; ++i) m = kron(m, single_site_matrix(s.factor(i)));
  return s.coeff * m;
}

inline Matrix dense_from_terms(std::span<const PauliString> terms, int n_sites) {
  const Eigen::Index dim = Eigen::Index{1} << n_sites;
  Matrix m = Matrix::Zero(dim, dim);
  for (const auto& t : terms) m += dense_from_string(t);
  return m;
}

inline Matrix dense_from_terms(const std::vector<PauliString>& terms, int n_sites) {
  return dense_from_terms(std::span<const PauliString>(terms), n_sites);
}

inline lfilter::SparseOperator operator_from_dense(const Matrix& m, int n_sites,
                                                   bool hermitian = true) {
  lfilter::SparseOperator op;
  op.n_sites = n_sites;
  op.hermitian = hermitian;
  op.mat = m.sparseView();
  return op;
}

/// exp(-i t M) v via full eigendecomposition of the Hermitian matrix M.
inline Vector dense_expm_apply(const Matrix& m, const Vector& v, double t) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  Vector phases(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < phases.size(); ++i)
    phases[i] = std::exp(Complex(0.0, -t * es.eigenvalues()[i]));
  return es.eigenvectors() * phases.asDiagonal() * (es.eigenvectors().adjoint() * v);
}

/// Entropy through the reduced density matrix, not the SVD route the
/// library takes.
inline double entropy_from_density_matrix(const Vector& v, int cut) {
  const int n = lfilter::sites_of_dim(v.size());
  const Eigen::Index rows = Eigen::Index{1} << cut;
  const Eigen::Index cols = Eigen::Index{1} << (n - cut);
  Matrix psi(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) psi(r, c) = v[r * cols + c];
  Matrix rho = psi * psi.adjoint();
  rho /= v.squaredNorm();
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double p = es.eigenvalues()[i];
    if (p > 1e-24) s -= p * std::log(p);
  }
  return s;
}

inline Vector random_state(Eigen::Index dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = Complex(dist(rng), dist(rng));
  v /= v.norm();
  return v;
}

inline Matrix random_hermitian(Eigen::Index dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = Complex(dist(rng), dist(rng));
  return 0.5 * (m + Matrix(m.adjoint()));
}

/// Least-squares slope and intercept of y against x.
inline std::array<double, 2> linear_fit(const std::vector<double>& x,
                                        const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  return {slope, intercept};
}

}  // namespace oracles
