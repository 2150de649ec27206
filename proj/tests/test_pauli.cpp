#include <catch2/catch_amalgamated.hpp>

#include "lfilter/pauli.hpp"
#include "oracles.hpp"

using namespace lfilter;

TEST_CASE("single-site product table matches the algebra, all 16 cases") {
  const Pauli all[] = {Pauli::I, Pauli::X, Pauli::Y, Pauli::Z};
  for (Pauli a : all) {
    for (Pauli b : all) {
      PauliString sa = PauliString::single(1, 0, a);
      PauliString sb = PauliString::single(1, 0, b);
      PauliString sp = product(sa, sb);
      Eigen::Matrix2cd expected = oracles::single_site_matrix(a) * oracles::single_site_matrix(b);
      Eigen::Matrix2cd got = oracles::dense_from_string(sp);
      REQUIRE((got - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("well-known products carry the right phase") {
  auto one = [](Pauli a, Pauli b) {
    return product(PauliString::single(3, 1, a), PauliString::single(3, 1, b));
  };
  // XY = iZ
  auto xy = one(Pauli::X, Pauli::Y);
  REQUIRE(xy.factor(1) == Pauli::Z);
  REQUIRE(std::abs(xy.coeff - Complex(0, 1)) < 1e-15);
  // YX = -iZ
  auto yx = one(Pauli::Y, Pauli::X);
  REQUIRE(std::abs(yx.coeff - Complex(0, -1)) < 1e-15);
  // ZZ = I
  auto zz = one(Pauli::Z, Pauli::Z);
  REQUIRE(zz.is_identity());
  REQUIRE(std::abs(zz.coeff - Complex(1, 0)) < 1e-15);
}

TEST_CASE("multi-site product is a single string with deterministic phase") {
  // (X0 Z1) * (Y0 Y1) = (XY) (ZY) = (iZ0)(-iX1) = Z0 X1
  PauliString a(2);
  a.set_factor(0, Pauli::X);
  a.set_factor(1, Pauli::Z);
  PauliString b(2);
  b.set_factor(0, Pauli::Y);
  b.set_factor(1, Pauli::Y);
  PauliString p = product(a, b);
  REQUIRE(p.factor(0) == Pauli::Z);
  REQUIRE(p.factor(1) == Pauli::X);
  REQUIRE(std::abs(p.coeff - Complex(1, 0)) < 1e-15);

  Matrix expected = oracles::dense_from_string(a) * oracles::dense_from_string(b);
  REQUIRE((oracles::dense_from_string(p) - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("product on random strings agrees with the dense oracle") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> sym(0, 3);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 4;
    PauliString a(n, Complex(1.5, -0.25)), b(n, Complex(0.0, 2.0));
    for (int i = 0; i < n; ++i) {
      a.set_factor(i, static_cast<Pauli>(sym(rng)));
      b.set_factor(i, static_cast<Pauli>(sym(rng)));
    }
    Matrix expected = oracles::dense_from_string(a) * oracles::dense_from_string(b);
    Matrix got = oracles::dense_from_string(product(a, b));
    REQUIRE((got - expected).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("commutes() agrees with the matrix commutator") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> sym(0, 3);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3;
    PauliString a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a.set_factor(i, static_cast<Pauli>(sym(rng)));
      b.set_factor(i, static_cast<Pauli>(sym(rng)));
    }
    Matrix ma = oracles::dense_from_string(a), mb = oracles::dense_from_string(b);
    const bool mat_commutes = ((ma * mb - mb * ma).cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE(commutes(a, b) == mat_commutes);
  }
}

TEST_CASE("compiled action matches the dense matrix column by column") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> sym(0, 3);
  const int n = 3;
  for (int trial = 0; trial < 20; ++trial) {
    PauliString s(n, Complex(0.3, 0.7));
    for (int i = 0; i < n; ++i) s.set_factor(i, static_cast<Pauli>(sym(rng)));
    Matrix dense = oracles::dense_from_string(s);
    CompiledPauli cp(s);
    for (std::uint64_t col = 0; col < 8; ++col) {
      for (std::uint64_t row = 0; row < 8; ++row) {
        Complex expect = dense(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
        Complex got = (cp.target(col) == row) ? cp.amplitude(col) : Complex(0, 0);
        REQUIRE(std::abs(expect - got) < 1e-15);
      }
    }
  }
}

TEST_CASE("support mask and weight") {
  PauliString s(5);
  s.set_factor(1, Pauli::X);
  s.set_factor(4, Pauli::Z);
  REQUIRE(s.support_mask() == ((1u << 1) | (1u << 4)));
  REQUIRE(s.weight() == 2);
  REQUIRE(s.label() == "IXIIZ");
  REQUIRE(PauliString::from_packed(5, s.packed_factors(), s.coeff).label() == "IXIIZ");
}

TEST_CASE("invariants: site counts enforced") {
  REQUIRE_THROWS_AS(PauliString(0), std::invalid_argument);
  REQUIRE_THROWS_AS(PauliString(kMaxSites + 1), std::invalid_argument);
  PauliString a(2), b(3);
  REQUIRE_THROWS_AS(product(a, b), std::invalid_argument);
}
