#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <complex>
#include <concepts>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "lfilter/pauli.hpp"
#include "lfilter/state.hpp"

namespace lfilter {

/// Anything that can act on a state vector: explicit sparse matrices and
/// matrix-free compositions alike. Krylov routines are written against this.
template <typename T>
concept LinearMap = requires(const T& op, const Vector& v) {
  { op.dim() } -> std::convertible_to<Eigen::Index>;
  { op.apply(v) } -> std::convertible_to<Vector>;
};

using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

/// Operator on the 2^n space in compressed-row storage.
struct SparseOperator {
  SparseMatrix mat;
  bool hermitian = false;
  int n_sites = 0;

  Eigen::Index dim() const { return mat.rows(); }

  Vector apply(const Vector& v) const {
    if (v.size() != mat.cols()) throw std::invalid_argument("matvec: dimension mismatch");
    return mat * v;
  }

  /// Max elementwise |A - A^dagger|; small-instance verification helper.
  double hermiticity_error() const {
    SparseMatrix d = SparseMatrix(mat.adjoint()) - mat;
    double m = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
  }
};

inline Matrix to_dense(const SparseOperator& op) { return Matrix(op.mat); }

inline SparseOperator identity_operator(int n_sites) {
  SparseOperator out;
  out.n_sites = n_sites;
  out.hermitian = true;
  const Eigen::Index dim = dim_of_sites(n_sites);
  out.mat = SparseMatrix(dim, dim);
  out.mat.setIdentity();
  return out;
}

namespace detail {

/// Like-term collection: factors-key -> summed coefficient, in first-seen order.
inline std::vector<PauliString> collect_terms(std::span<const PauliString> terms, int n_sites) {
  std::unordered_map<std::uint64_t, std::size_t> index;
  std::vector<PauliString> out;
  out.reserve(terms.size());
  for (const auto& t : terms) {
    if (t.n_sites != n_sites) throw std::invalid_argument("term site count mismatch");
    const std::uint64_t key = t.packed_factors();
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) {
      out.push_back(t);
    } else {
      out[it->second].coeff += t.coeff;
    }
  }
  return out;
}

}  // namespace detail

/// Assembles sum of Pauli strings into an explicit sparse matrix.
/// The hermitian flag is set when the collected term list is closed under
/// conjugation, i.e. every collected coefficient is real.
inline SparseOperator assemble(std::span<const PauliString> terms, int n_sites) {
  if (n_sites < 1 || n_sites > kMaxSites)
    throw std::invalid_argument("assemble: site count outside supported range");
  const Eigen::Index dim = dim_of_sites(n_sites);

  auto collected = detail::collect_terms(terms, n_sites);

  double max_abs = 0.0, max_imag = 0.0;
  for (const auto& t : collected) {
    max_abs = std::max(max_abs, std::abs(t.coeff));
    max_imag = std::max(max_imag, std::abs(t.coeff.imag()));
  }
  const bool herm = max_imag <= 1e-13 * std::max(1.0, max_abs);

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(static_cast<std::size_t>(dim) * collected.size());
  for (const auto& t : collected) {
    if (t.coeff == Complex{0.0, 0.0}) continue;
    CompiledPauli cp(t);
    for (Eigen::Index col = 0; col < dim; ++col) {
      const auto b = static_cast<std::uint64_t>(col);
      trip.emplace_back(static_cast<Eigen::Index>(cp.target(b)), col, cp.amplitude(b));
    }
  }

  SparseOperator out;
  out.n_sites = n_sites;
  out.hermitian = herm;
  out.mat = SparseMatrix(dim, dim);
  out.mat.setFromTriplets(trip.begin(), trip.end());
  out.mat.makeCompressed();
  return out;
}

inline SparseOperator assemble(const std::vector<PauliString>& terms, int n_sites) {
  return assemble(std::span<const PauliString>(terms), n_sites);
}

/// out += S v for a single compiled string; one scatter pass per term.
inline void add_string_apply(const CompiledPauli& cp, const Vector& v, Vector& out) {
  const auto dim = v.size();
  for (Eigen::Index b = 0; b < dim; ++b) {
    const auto src = static_cast<std::uint64_t>(b);
    out[static_cast<Eigen::Index>(cp.target(src))] += cp.amplitude(src) * v[b];
  }
}

}  // namespace lfilter
