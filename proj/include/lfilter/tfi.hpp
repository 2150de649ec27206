#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "lfilter/observables.hpp"
#include "lfilter/pauli.hpp"
#include "lfilter/sparse_operator.hpp"
#include "lfilter/state.hpp"

namespace lfilter {

/// Transverse-field Ising chain couplings; J sets the energy unit.
struct TfiParams {
  int n = 2;
  double j = 1.0;
  double g = -1.05;
  double h = 0.5;
};

/// H = J ( sum_i Z_i Z_{i+1} + sum_i g X_i + sum_i h Z_i ), open boundary.
inline std::vector<PauliString> build_tfi(const TfiParams& p) {
  if (p.n < 2) throw std::invalid_argument("build_tfi: need at least two sites");
  std::vector<PauliString> terms;
  terms.reserve(static_cast<std::size_t>(3 * p.n - 1));
  for (int i = 0; i + 1 < p.n; ++i) {
    PauliString zz(p.n, p.j);
    zz.set_factor(i, Pauli::Z);
    zz.set_factor(i + 1, Pauli::Z);
    terms.push_back(std::move(zz));
  }
  for (int i = 0; i < p.n; ++i) terms.push_back(PauliString::single(p.n, i, Pauli::X, p.j * p.g));
  for (int i = 0; i < p.n; ++i) terms.push_back(PauliString::single(p.n, i, Pauli::Z, p.j * p.h));
  return terms;
}

/// Per-site product-state description: the alternating |1 0 1 0 ...> pattern
/// or the uniform (cos t |0> + sin t |1>)^N family.
struct ProductStateSpec {
  enum class Kind { afm, theta };
  Kind kind = Kind::afm;
  double theta = 0.0;
  int n = 2;

  static ProductStateSpec afm(int n_sites) { return {Kind::afm, 0.0, n_sites}; }
  static ProductStateSpec uniform(int n_sites, double theta) {
    return {Kind::theta, theta, n_sites};
  }

  /// (amp0, amp1) of the single-qubit state on site i.
  std::array<double, 2> site_amplitudes(int i) const {
    if (kind == Kind::afm) return (i % 2 == 0) ? std::array{0.0, 1.0} : std::array{1.0, 0.0};
    return {std::cos(theta), std::sin(theta)};
  }

  std::string label() const {
    if (kind == Kind::afm) return "afm";
    return "theta=" + std::to_string(theta);
  }
};

inline Vector product_state(const ProductStateSpec& spec) {
  if (spec.n < 1 || spec.n > kMaxSites) throw std::invalid_argument("product_state: bad site count");
  const Eigen::Index dim = dim_of_sites(spec.n);
  // kron(v, site_i): earlier sites stay more significant
  Vector v = Vector::Ones(1);
  for (int i = 0; i < spec.n; ++i) {
    const auto amp = spec.site_amplitudes(i);
    Vector next(v.size() * 2);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      next[2 * k] = amp[0] * v[k];
      next[2 * k + 1] = amp[1] * v[k];
    }
    v = std::move(next);
  }
  if (v.size() != dim) throw std::logic_error("product_state: dimension bookkeeping error");
  normalize(v);
  return v;
}

/// Bloch vector (nx, ny, nz) of the site-i single-qubit state.
inline std::array<double, 3> site_bloch(const ProductStateSpec& spec, int i) {
  const auto amp = spec.site_amplitudes(i);
  const double a = amp[0], b = amp[1];
  return {2.0 * a * b, 0.0, a * a - b * b};
}

/// One-site projectors P_i = (1 - n.sigma)/2 annihilating the product state,
/// each returned as its Pauli-string decomposition.
inline std::vector<std::vector<PauliString>> site_projectors(const ProductStateSpec& spec) {
  std::vector<std::vector<PauliString>> out;
  out.reserve(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    const auto nvec = site_bloch(spec, i);
    std::vector<PauliString> p;
    p.push_back(PauliString::identity(spec.n, 0.5));
    if (nvec[0] != 0.0) p.push_back(PauliString::single(spec.n, i, Pauli::X, -0.5 * nvec[0]));
    if (nvec[1] != 0.0) p.push_back(PauliString::single(spec.n, i, Pauli::Y, -0.5 * nvec[1]));
    if (nvec[2] != 0.0) p.push_back(PauliString::single(spec.n, i, Pauli::Z, -0.5 * nvec[2]));
    out.push_back(std::move(p));
  }
  return out;
}

/// Flattened term list of sum_i P_i.
inline std::vector<PauliString> projector_sum_terms(const ProductStateSpec& spec) {
  std::vector<PauliString> out;
  for (auto& p : site_projectors(spec))
    for (auto& s : p) out.push_back(std::move(s));
  return out;
}

namespace detail {

inline double site_expectation(const ProductStateSpec& spec, int site, Pauli p) {
  switch (p) {
    case Pauli::I: return 1.0;
    case Pauli::X: return site_bloch(spec, site)[0];
    case Pauli::Y: return site_bloch(spec, site)[1];
    case Pauli::Z: return site_bloch(spec, site)[2];
  }
  return 0.0;
}

inline Complex string_expectation(const ProductStateSpec& spec, const PauliString& s) {
  Complex e = s.coeff;
  for (int i = 0; i < s.n_sites && e != Complex{0.0, 0.0}; ++i)
    e *= site_expectation(spec, i, s.factors[static_cast<std::size_t>(i)]);
  return e;
}

}  // namespace detail

/// Mean and variance of sum of local terms in a product state by direct
/// contraction; no 2^N object is ever formed. Covariances of terms with
/// disjoint support vanish identically and are skipped.
inline Moments classical_moments(const ProductStateSpec& spec,
                                 std::span<const PauliString> terms) {
  Complex mean{0.0, 0.0};
  std::vector<Complex> expect(terms.size());
  std::vector<std::uint32_t> masks(terms.size());
  for (std::size_t g = 0; g < terms.size(); ++g) {
    if (terms[g].n_sites != spec.n)
      throw std::invalid_argument("classical_moments: term site count mismatch");
    expect[g] = detail::string_expectation(spec, terms[g]);
    masks[g] = terms[g].support_mask();
    mean += expect[g];
  }
  Complex var{0.0, 0.0};
  for (std::size_t a = 0; a < terms.size(); ++a) {
    for (std::size_t b = 0; b < terms.size(); ++b) {
      if ((masks[a] & masks[b]) == 0) continue;  // <hh'> factorizes exactly
      const PauliString ab = product(terms[a], terms[b]);
      var += detail::string_expectation(spec, ab) - expect[a] * expect[b];
    }
  }
  if (std::abs(mean.imag()) > 1e-10 * std::max(1.0, std::abs(mean.real())))
    throw std::runtime_error("classical_moments: non-Hermitian term list");
  double variance = var.real();
  if (variance < 0.0) variance = 0.0;
  return {mean.real(), variance};
}

inline Moments classical_moments(const ProductStateSpec& spec,
                                 const std::vector<PauliString>& terms) {
  return classical_moments(spec, std::span<const PauliString>(terms));
}

/// Thermodynamic-limit energy density of the uniform theta state:
/// E/JN = cos^2(2t) + h cos(2t) + g sin(2t).
inline double theta_energy_density(double theta, double g, double h) {
  const double c = std::cos(2.0 * theta), s = std::sin(2.0 * theta);
  return c * c + h * c + g * s;
}

}  // namespace lfilter
