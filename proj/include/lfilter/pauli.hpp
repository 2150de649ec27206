#pragma once

#include <array>
#include <bit>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfilter {

using Complex = std::complex<double>;

/// Hard cap on the number of sites; 2^n amplitudes must stay addressable
/// and support masks fit in 32 bits.
inline constexpr int kMaxSites = 20;

enum class Pauli : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

inline char pauli_char(Pauli p) { return "IXYZ"[static_cast<int>(p)]; }

inline Pauli pauli_from_char(char c) {
  switch (c) {
    case 'I': return Pauli::I;
    case 'X': return Pauli::X;
    case 'Y': return Pauli::Y;
    case 'Z': return Pauli::Z;
    default:
      throw std::invalid_argument(std::string("unknown Pauli symbol '") + c + "'");
  }
}

namespace detail {

// sigma_a * sigma_b = i^ipow * sigma_out
struct SitePauliProduct {
  Pauli out;
  std::uint8_t ipow;
};

inline constexpr std::array<std::array<SitePauliProduct, 4>, 4> kSiteProductTable = {{
    // rhs:   I              X              Y              Z
    {{{Pauli::I, 0}, {Pauli::X, 0}, {Pauli::Y, 0}, {Pauli::Z, 0}}},   // I *
    {{{Pauli::X, 0}, {Pauli::I, 0}, {Pauli::Z, 1}, {Pauli::Y, 3}}},   // X *
    {{{Pauli::Y, 0}, {Pauli::Z, 3}, {Pauli::I, 0}, {Pauli::X, 1}}},   // Y *
    {{{Pauli::Z, 0}, {Pauli::Y, 1}, {Pauli::X, 3}, {Pauli::I, 0}}},   // Z *
}};

inline constexpr std::array<Complex, 4> kIPow = {Complex{1.0, 0.0}, Complex{0.0, 1.0},
                                                 Complex{-1.0, 0.0}, Complex{0.0, -1.0}};

}  // namespace detail

/// Tensor product of single-site Paulis on n_sites sites, scaled by a
/// complex coefficient. The universal term representation for Hamiltonians,
/// projectors and circuit rotations.
struct PauliString {
  int n_sites = 0;
  std::vector<Pauli> factors;
  Complex coeff{1.0, 0.0};

  PauliString() = default;
  explicit PauliString(int n, Complex c = Complex{1.0, 0.0})
      : n_sites(n), factors(static_cast<std::size_t>(n), Pauli::I), coeff(c) {
    if (n < 1 || n > kMaxSites) throw std::invalid_argument("PauliString: bad site count");
  }

  /// Single non-identity factor at `site`.
  static PauliString single(int n, int site, Pauli p, Complex c = Complex{1.0, 0.0}) {
    PauliString s(n, c);
    if (site < 0 || site >= n) throw std::invalid_argument("PauliString: site out of range");
    s.factors[static_cast<std::size_t>(site)] = p;
    return s;
  }

  static PauliString identity(int n, Complex c = Complex{1.0, 0.0}) { return PauliString(n, c); }

  Pauli factor(int site) const { return factors[static_cast<std::size_t>(site)]; }
  void set_factor(int site, Pauli p) { factors[static_cast<std::size_t>(site)] = p; }

  bool is_identity() const {
    for (Pauli p : factors)
      if (p != Pauli::I) return false;
    return true;
  }

  int weight() const {
    int w = 0;
    for (Pauli p : factors) w += (p != Pauli::I);
    return w;
  }

  /// Bit i set iff site i carries a non-identity factor.
  std::uint32_t support_mask() const {
    std::uint32_t m = 0;
    for (int i = 0; i < n_sites; ++i)
      if (factors[static_cast<std::size_t>(i)] != Pauli::I) m |= (1u << i);
    return m;
  }

  std::string label() const {
    std::string s(static_cast<std::size_t>(n_sites), 'I');
    for (int i = 0; i < n_sites; ++i) s[static_cast<std::size_t>(i)] = pauli_char(factors[static_cast<std::size_t>(i)]);
    return s;
  }

  /// Factors packed 2 bits per site; collection key for like-term merging.
  std::uint64_t packed_factors() const {
    std::uint64_t k = 0;
    for (int i = 0; i < n_sites; ++i)
      k |= static_cast<std::uint64_t>(factors[static_cast<std::size_t>(i)]) << (2 * i);
    return k;
  }

  static PauliString from_packed(int n, std::uint64_t key, Complex c) {
    PauliString s(n, c);
    for (int i = 0; i < n; ++i)
      s.factors[static_cast<std::size_t>(i)] = static_cast<Pauli>((key >> (2 * i)) & 3u);
    return s;
  }
};

/// Product of two strings is again a single string; the +-1/+-i phase from
/// the site-wise algebra is folded into the coefficient.
inline PauliString product(const PauliString& a, const PauliString& b) {
  if (a.n_sites != b.n_sites) throw std::invalid_argument("PauliString product: site count mismatch");
  PauliString out(a.n_sites);
  unsigned ipow = 0;
  for (int i = 0; i < a.n_sites; ++i) {
    const auto& e = detail::kSiteProductTable[static_cast<int>(a.factors[static_cast<std::size_t>(i)])]
                                             [static_cast<int>(b.factors[static_cast<std::size_t>(i)])];
    out.factors[static_cast<std::size_t>(i)] = e.out;
    ipow += e.ipow;
  }
  out.coeff = a.coeff * b.coeff * detail::kIPow[ipow & 3u];
  return out;
}

/// Hermitian conjugate: factors are self-adjoint, only the coefficient conjugates.
inline PauliString adjoint(const PauliString& s) {
  PauliString out = s;
  out.coeff = std::conj(s.coeff);
  return out;
}

inline bool commutes(const PauliString& a, const PauliString& b) {
  // Strings commute iff they anticommute on an even number of sites.
  if (a.n_sites != b.n_sites) throw std::invalid_argument("commutes: site count mismatch");
  int anti = 0;
  for (int i = 0; i < a.n_sites; ++i) {
    Pauli pa = a.factors[static_cast<std::size_t>(i)], pb = b.factors[static_cast<std::size_t>(i)];
    if (pa != Pauli::I && pb != Pauli::I && pa != pb) ++anti;
  }
  return (anti % 2) == 0;
}

/// Precomputed action on computational basis states. Convention: site 0 is
/// the most significant bit of the basis index and Z|0> = +|0>.
class CompiledPauli {
 public:
  explicit CompiledPauli(const PauliString& s) : n_(s.n_sites) {
    for (int i = 0; i < n_; ++i) {
      const std::uint64_t bit = std::uint64_t{1} << (n_ - 1 - i);
      switch (s.factors[static_cast<std::size_t>(i)]) {
        case Pauli::I: break;
        case Pauli::X: flip_ |= bit; break;
        case Pauli::Y: flip_ |= bit; sign_ |= bit; ++n_y_; break;
        case Pauli::Z: sign_ |= bit; break;
      }
    }
    base_ = s.coeff * detail::kIPow[static_cast<unsigned>(n_y_) & 3u];
  }

  int n_sites() const { return n_; }
  std::uint64_t target(std::uint64_t basis) const { return basis ^ flip_; }

  /// Amplitude of S|basis> on |target(basis)>.
  Complex amplitude(std::uint64_t basis) const {
    return (std::popcount(basis & sign_) & 1) ? -base_ : base_;
  }

  bool is_diagonal() const { return flip_ == 0; }

 private:
  int n_ = 0;
  int n_y_ = 0;
  std::uint64_t flip_ = 0;
  std::uint64_t sign_ = 0;  // Y and Z sites pick up (-1)^bit
  Complex base_{1.0, 0.0};
};

}  // namespace lfilter
