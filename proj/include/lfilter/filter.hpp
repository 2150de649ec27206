#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <span>
#include <stdexcept>

#include "lfilter/eigs.hpp"
#include "lfilter/solve.hpp"
#include "lfilter/sparse_operator.hpp"
#include "lfilter/state.hpp"

namespace lfilter {

/// Lorentzian filter data: center energy E_F and width delta. The inverse
/// width is the primary field; delta_inv = 0 is the identity filter.
struct FilterParams {
  double e_f = 0.0;
  double delta_inv = 0.0;

  FilterParams() = default;
  FilterParams(double center, double dinv) : e_f(center), delta_inv(dinv) {
    if (!(dinv >= 0.0)) throw std::invalid_argument("FilterParams: delta_inv must be >= 0");
  }
  static FilterParams from_delta(double center, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("FilterParams: delta must be positive");
    return FilterParams(center, std::isinf(delta) ? 0.0 : 1.0 / delta);
  }
  double delta() const {
    return delta_inv == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / delta_inv;
  }
};

/// (1 +- i (H - E_F)/delta) v as a sparse composition; never squares a matrix.
inline Vector filter_matvec(const SparseOperator& h, const FilterParams& fp, const Vector& v,
                            bool adjoint = false) {
  if (v.size() != h.dim()) throw std::invalid_argument("filter_matvec: dimension mismatch");
  return detail::filter_apply(h, fp.e_f, fp.delta_inv, adjoint, v);
}

/// Normalized F^{-1} |psi>: the Lorentzian-filtered state.
inline Vector filtered_state(const SparseOperator& h, const Vector& psi, const FilterParams& fp,
                             ShiftedSolveOptions opts = {}, ShiftedSolveInfo* info = nullptr) {
  if (fp.delta_inv == 0.0) {
    if (info) *info = {};
    return normalized(psi);
  }
  Vector x = shifted_solve(h, fp.e_f, fp.delta(), psi, opts, info);
  normalize(x);
  return x;
}

/// Parent Hamiltonian of the filtered state: H_par = F^dag (sum_i P_i) F.
/// For small systems the three expansion parts
///   H_par(a) = P + a * i[P, H-E] + a^2 (H-E) P (H-E),  a = 1/delta,
/// are kept as explicit sparse matrices, which makes the operator cheap to
/// evaluate at any point of an adiabatic schedule. Larger systems fall back
/// to the matrix-free composition.
struct ParentHamiltonian {
  FilterParams params;
  int n_sites = 0;
  SparseOperator hamiltonian;    // H
  SparseOperator projector_sum;  // P = sum_i P_i
  std::optional<SparseOperator> commutator_part;  // i [P, H-E]
  std::optional<SparseOperator> sandwich_part;    // (H-E) P (H-E)
  std::optional<SparseOperator> raw;              // H_par at delta_inv

  Eigen::Index dim() const { return projector_sum.dim(); }
  bool is_explicit() const { return raw.has_value(); }
  double rescale_factor() const { return 1.0 / (1.0 + params.delta_inv * params.delta_inv); }

  /// H_par(alpha) v for an arbitrary inverse width alpha.
  Vector apply_at(double alpha, const Vector& v) const {
    if (v.size() != dim()) throw std::invalid_argument("ParentHamiltonian: dimension mismatch");
    if (commutator_part && sandwich_part) {
      Vector out = projector_sum.apply(v);
      if (alpha != 0.0) {
        out += alpha * commutator_part->apply(v);
        out += (alpha * alpha) * sandwich_part->apply(v);
      }
      return out;
    }
    Vector z = detail::filter_apply(hamiltonian, params.e_f, alpha, false, v);
    Vector pz = projector_sum.apply(z);
    return detail::filter_apply(hamiltonian, params.e_f, alpha, true, pz);
  }

  Vector apply_raw(const Vector& v) const {
    if (raw) return raw->apply(v);
    return apply_at(params.delta_inv, v);
  }

  Vector apply_rescaled(const Vector& v) const { return rescale_factor() * apply_raw(v); }

  /// Explicit rescaled matrix H_par / (1 + delta_inv^2); explicit mode only.
  SparseOperator rescaled() const {
    if (!raw) throw std::logic_error("ParentHamiltonian: no explicit matrix at this size");
    SparseOperator out = *raw;
    out.mat *= rescale_factor();
    return out;
  }
};

struct ParentBuildOptions {
  int explicit_max_sites = 14;
  /// When the product-state energy is known, an off-center filter is reported.
  std::optional<double> known_state_energy;
  std::ostream* warn_stream = &std::cerr;
};

namespace detail {

inline void prune_sparse(SparseMatrix& m) {
  double max_abs = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      max_abs = std::max(max_abs, std::abs(it.value()));
  if (max_abs > 0.0) m.prune(max_abs, 1e-14);
}

}  // namespace detail

inline ParentHamiltonian build_parent(std::span<const PauliString> h_terms,
                                      std::span<const PauliString> projector_terms,
                                      const FilterParams& fp, ParentBuildOptions opts = {}) {
  if (h_terms.empty() || projector_terms.empty())
    throw std::invalid_argument("build_parent: empty term list");
  const int n = h_terms.front().n_sites;

  ParentHamiltonian ph;
  ph.params = fp;
  ph.n_sites = n;
  ph.hamiltonian = assemble(h_terms, n);
  ph.projector_sum = assemble(projector_terms, n);
  if (!ph.hamiltonian.hermitian || !ph.projector_sum.hermitian)
    throw std::invalid_argument("build_parent: term lists must assemble to Hermitian operators");

  if (opts.known_state_energy && opts.warn_stream) {
    const double scale = std::max(1.0, std::abs(*opts.known_state_energy));
    if (std::abs(*opts.known_state_energy - fp.e_f) > 1e-9 * scale)
      (*opts.warn_stream) << "build_parent: filter center E_F = " << fp.e_f
                          << " is off the state energy E0 = " << *opts.known_state_energy
                          << "; filtering away from E0 is generally impractical\n";
  }

  if (n <= opts.explicit_max_sites) {
    const Eigen::Index dim = ph.dim();
    SparseMatrix hbar = ph.hamiltonian.mat;
    {
      SparseMatrix eye(dim, dim);
      eye.setIdentity();
      hbar -= fp.e_f * eye;
    }
    const SparseMatrix& p = ph.projector_sum.mat;
    SparseMatrix ph_ = p * hbar;
    SparseMatrix hp = hbar * p;
    SparseMatrix comm = (Complex(0.0, 1.0) * (ph_ - hp)).pruned();
    SparseMatrix sand = (hbar * ph_).pruned();
    detail::prune_sparse(comm);
    detail::prune_sparse(sand);

    const double a = fp.delta_inv;
    SparseMatrix rawm = (p + a * comm + (a * a) * sand).pruned();

    ph.commutator_part = SparseOperator{std::move(comm), true, n};
    ph.sandwich_part = SparseOperator{std::move(sand), true, n};
    ph.raw = SparseOperator{std::move(rawm), true, n};
  }
  return ph;
}

inline ParentHamiltonian build_parent(const std::vector<PauliString>& h_terms,
                                      const std::vector<PauliString>& projector_terms,
                                      const FilterParams& fp, ParentBuildOptions opts = {}) {
  return build_parent(std::span<const PauliString>(h_terms),
                      std::span<const PauliString>(projector_terms), fp, opts);
}

/// Numerical certificate that the parent Hamiltonian is gapped: all
/// eigenvalues h of H_par satisfy h^2 - h >= 0, equivalently the spectrum
/// avoids (0, 1), and the smallest nonzero eigenvalue sits at or above 1.
struct GapCertificate {
  double h2_minus_h_min = 0.0;
  double lowest_nonzero = 0.0;
  double ground_energy = 0.0;
  bool passed = false;
};

inline GapCertificate gap_certificate(const ParentHamiltonian& ph, int dense_max_sites = 12) {
  if (ph.n_sites > dense_max_sites)
    throw std::invalid_argument("gap_certificate: system too large for dense certification");
  if (!ph.raw) throw std::logic_error("gap_certificate: explicit parent matrix required");
  const Eigen::VectorXd evals = dense_spectrum(*ph.raw, dense_max_sites);

  GapCertificate cert;
  cert.ground_energy = evals[0];
  cert.h2_minus_h_min = std::numeric_limits<double>::infinity();
  cert.lowest_nonzero = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    const double h = evals[i];
    cert.h2_minus_h_min = std::min(cert.h2_minus_h_min, h * h - h);
    if (h > 1e-8) cert.lowest_nonzero = std::min(cert.lowest_nonzero, h);
  }
  cert.passed = cert.h2_minus_h_min >= -1e-8 && cert.lowest_nonzero >= 1.0 - 1e-8 &&
                std::abs(cert.ground_energy) <= 1e-8;
  return cert;
}

/// Distance from E to the nearest eigenvalue of H; the filtering floor:
/// widths below this distance cannot suppress anything further.
inline double discreteness_eta(const SparseOperator& h, double energy, int dense_max_sites = 12) {
  const Eigen::VectorXd evals = dense_spectrum(h, dense_max_sites);
  double eta = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < evals.size(); ++i) eta = std::min(eta, std::abs(evals[i] - energy));
  return eta;
}

namespace detail {

/// exp(x^2) erfc(x) for x >= 0 without overflow. Below x = 4 the libm erfc
/// is accurate directly; above, a Laplace continued fraction converges to
/// machine precision in a few dozen terms.
inline double erfcx(double x) {
  if (x < 0.0) throw std::domain_error("erfcx: negative argument");
  if (x < 4.0) return std::exp(x * x) * std::erfc(x);
  // erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + 2/(x + ...)))))
  double f = 0.0;
  for (int k = 60; k >= 1; --k) f = (0.5 * k) / (x + f);
  return (1.0 / std::sqrt(M_PI)) / (x + f);
}

}  // namespace detail

/// Closed-form variance of a Lorentzian-filtered Gaussian energy profile:
///   sigma_L^2 = -delta^2 + delta * sqrt(2 sigma0^2 / pi) / erfcx(delta / sqrt(2 sigma0^2)).
/// Limits: sigma0^2 as delta -> inf, delta * sqrt(2 sigma0^2 / pi) as delta -> 0.
inline double variance_theory(double delta, double sigma0_sq) {
  if (!(delta > 0.0) || !(sigma0_sq > 0.0))
    throw std::invalid_argument("variance_theory: delta and sigma0^2 must be positive");
  const double x = delta / std::sqrt(2.0 * sigma0_sq);
  return -delta * delta + delta * std::sqrt(2.0 * sigma0_sq / M_PI) / detail::erfcx(x);
}

}  // namespace lfilter
