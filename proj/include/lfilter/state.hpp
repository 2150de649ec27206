#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>

namespace lfilter {

using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;

/// Number of sites for a 2^n amplitude vector; rejects non-power-of-two dims.
inline int sites_of_dim(Eigen::Index dim) {
  if (dim < 2) throw std::invalid_argument("state dimension must be >= 2");
  const auto u = static_cast<std::uint64_t>(dim);
  if ((u & (u - 1)) != 0) throw std::invalid_argument("state dimension is not a power of two");
  return std::countr_zero(u);
}

inline Eigen::Index dim_of_sites(int n) { return Eigen::Index{1} << n; }

inline Vector basis_state(int n_sites, std::uint64_t index) {
  const Eigen::Index dim = dim_of_sites(n_sites);
  if (index >= static_cast<std::uint64_t>(dim)) throw std::invalid_argument("basis index out of range");
  Vector v = Vector::Zero(dim);
  v[static_cast<Eigen::Index>(index)] = 1.0;
  return v;
}

inline void normalize(Vector& v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw std::runtime_error("cannot normalize a zero state vector");
  v /= n;
}

inline Vector normalized(Vector v) {
  normalize(v);
  return v;
}

/// |<a|b>|^2, invariant under global phases; inputs need not be normalized.
inline double fidelity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("fidelity: dimension mismatch");
  const double na = a.squaredNorm(), nb = b.squaredNorm();
  if (!(na > 0.0) || !(nb > 0.0)) throw std::invalid_argument("fidelity: zero-norm input");
  const double f = std::norm(a.dot(b)) / (na * nb);
  return f < 0.0 ? 0.0 : (f > 1.0 ? 1.0 : f);
}

}  // namespace lfilter
