#include <catch2/catch_amalgamated.hpp>

#include "lfilter/eigs.hpp"
#include "lfilter/observables.hpp"
#include "lfilter/tfi.hpp"
#include "oracles.hpp"

using namespace lfilter;

TEST_CASE("build_tfi: N=2 term content") {
  TfiParams p{2, 1.0, -1.05, 0.5};
  auto terms = build_tfi(p);
  REQUIRE(terms.size() == 5);  // Z0Z1, X0, X1, Z0, Z1
  REQUIRE(terms[0].label() == "ZZ");
  REQUIRE(std::abs(terms[0].coeff - Complex(1.0, 0)) < 1e-15);
  REQUIRE(terms[1].label() == "XI");
  REQUIRE(std::abs(terms[1].coeff - Complex(-1.05, 0)) < 1e-15);
  REQUIRE(terms[2].label() == "IX");
  REQUIRE(terms[3].label() == "ZI");
  REQUIRE(std::abs(terms[3].coeff - Complex(0.5, 0)) < 1e-15);
  REQUIRE(terms[4].label() == "IZ");
}

TEST_CASE("build_tfi: term count is 3N-1 and N<2 is rejected") {
  for (int n : {2, 5, 9}) REQUIRE(build_tfi({n, 1.0, -1.05, 0.5}).size() == std::size_t(3 * n - 1));
  REQUIRE_THROWS_AS(build_tfi({1, 1.0, -1.05, 0.5}), std::invalid_argument);
}

TEST_CASE("build_tfi: assembled N=4 spectrum matches the dense oracle") {
  TfiParams p{4, 1.0, -1.05, 0.5};
  auto terms = build_tfi(p);
  Eigen::VectorXd got = dense_spectrum(assemble(terms, 4));
  Eigen::SelfAdjointEigenSolver<Matrix> es(oracles::dense_from_terms(terms, 4),
                                           Eigen::EigenvaluesOnly);
  REQUIRE((got - es.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("product_state: theta endpoints and the uniform superposition") {
  const int n = 4;
  Vector zero = product_state(ProductStateSpec::uniform(n, 0.0));
  REQUIRE(std::abs(zero[0] - Complex(1, 0)) < 1e-15);
  REQUIRE(zero.tail(15).norm() < 1e-15);

  Vector one = product_state(ProductStateSpec::uniform(n, M_PI / 2));
  REQUIRE(std::abs(one[15] - Complex(1, 0)) < 1e-12);

  Vector plus = product_state(ProductStateSpec::uniform(n, M_PI / 4));
  for (Eigen::Index i = 0; i < 16; ++i) REQUIRE(std::abs(plus[i] - Complex(0.25, 0)) < 1e-12);
}

TEST_CASE("product_state: AFM is |1 0 1 0 ...> with site 0 most significant") {
  Vector afm = product_state(ProductStateSpec::afm(4));
  // |1010> = binary 1010 = index 10
  REQUIRE(std::abs(afm[10] - Complex(1, 0)) < 1e-15);
  REQUIRE(afm.norm() == Catch::Approx(1.0));

  Vector afm3 = product_state(ProductStateSpec::afm(3));
  REQUIRE(std::abs(afm3[5] - Complex(1, 0)) < 1e-15);  // |101>
}

TEST_CASE("projectors: theta=0 gives (1 - Z)/2 on each site") {
  const auto spec = ProductStateSpec::uniform(3, 0.0);
  auto projs = site_projectors(spec);
  REQUIRE(projs.size() == 3);
  for (int i = 0; i < 3; ++i) {
    Matrix p = oracles::dense_from_terms(projs[static_cast<std::size_t>(i)], 3);
    Matrix expected = 0.5 * (Matrix::Identity(8, 8) -
                             oracles::dense_from_string(PauliString::single(3, i, Pauli::Z)));
    REQUIRE((p - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("projectors annihilate their product state for every spec") {
  std::vector<ProductStateSpec> specs = {
      ProductStateSpec::afm(5), ProductStateSpec::uniform(5, 0.0),
      ProductStateSpec::uniform(5, M_PI / 6), ProductStateSpec::uniform(5, 1.1)};
  for (const auto& spec : specs) {
    Vector psi = product_state(spec);
    for (const auto& proj : site_projectors(spec)) {
      SparseOperator p = assemble(proj, spec.n);
      REQUIRE(p.apply(psi).norm() < 1e-12);
    }
    SparseOperator sum = assemble(projector_sum_terms(spec), spec.n);
    REQUIRE(sum.apply(psi).norm() < 1e-12);
  }
}

TEST_CASE("projectors are idempotent: P^2 = P for N=3, theta=pi/6") {
  const auto spec = ProductStateSpec::uniform(3, M_PI / 6);
  for (const auto& proj : site_projectors(spec)) {
    Matrix p = oracles::dense_from_terms(proj, 3);
    REQUIRE((p * p - p).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("classical_moments: AFM energy is -(N-1) J and X-term variance") {
  TfiParams p{6, 1.0, -1.05, 0.5};
  auto terms = build_tfi(p);
  auto [mean, var] = classical_moments(ProductStateSpec::afm(6), terms);
  REQUIRE(std::abs(mean - (-5.0)) < 1e-12);
  // AFM variance comes entirely from the X terms: N (J g)^2
  REQUIRE(std::abs(var - 6.0 * 1.05 * 1.05) < 1e-12);
}

TEST_CASE("classical_moments: theta=pi/6 energy density approaches -0.409 with N") {
  // finite-size contraction converges to the thermodynamic formula like 1/N;
  // nothing exponential is built, only the kMaxSites cap limits the sizes here
  const double target = theta_energy_density(M_PI / 6, -1.05, 0.5);
  std::vector<double> densities;
  const std::vector<int> sizes = {10, 16, 20};
  for (int n : sizes) {
    TfiParams p{n, 1.0, -1.05, 0.5};
    auto terms = build_tfi(p);
    auto [mean, var] = classical_moments(ProductStateSpec::uniform(n, M_PI / 6), terms);
    densities.push_back(mean / n);
  }
  REQUIRE(std::abs(densities[2] - target) < std::abs(densities[0] - target));
  REQUIRE(std::abs(densities[2] - target) < 0.05);
  // Richardson extrapolation in 1/N lands on the formula value
  const double x1 = 1.0 / sizes[1], x2 = 1.0 / sizes[2];
  const double extrap = densities[2] + (densities[2] - densities[1]) * x2 / (x1 - x2);
  REQUIRE(std::abs(extrap - target) < 2e-3);
}

TEST_CASE("classical_moments agree with exact-vector moments at N=8") {
  TfiParams p{8, 1.0, -1.05, 0.5};
  auto terms = build_tfi(p);
  SparseOperator h = assemble(terms, 8);
  std::vector<ProductStateSpec> specs = {ProductStateSpec::afm(8),
                                         ProductStateSpec::uniform(8, M_PI / 6)};
  for (const auto& spec : specs) {
    auto cm = classical_moments(spec, terms);
    auto em = energy_moments(h, product_state(spec));
    REQUIRE(std::abs(cm.mean - em.mean) < 1e-9);
    REQUIRE(std::abs(cm.variance - em.variance) < 1e-9);
    REQUIRE(cm.variance >= 0.0);
  }
}

TEST_CASE("property: contraction equals exact moments over the full grid N<=10") {
  for (int n : {4, 6, 10}) {
    TfiParams p{n, 1.0, -1.05, 0.5};
    auto terms = build_tfi(p);
    SparseOperator h = assemble(terms, n);
    std::vector<ProductStateSpec> specs = {ProductStateSpec::afm(n)};
    for (double theta : {0.0, M_PI / 8, M_PI / 6, M_PI / 4, M_PI / 2})
      specs.push_back(ProductStateSpec::uniform(n, theta));
    for (const auto& spec : specs) {
      auto cm = classical_moments(spec, terms);
      auto em = energy_moments(h, product_state(spec));
      REQUIRE(std::abs(cm.mean - em.mean) < 1e-9);
      REQUIRE(std::abs(cm.variance - em.variance) < 1e-9);
    }
  }
}

TEST_CASE("projector sum: unique zero ground state with gap >= 1") {
  for (int n : {4, 8, 10}) {
    const auto spec = ProductStateSpec::uniform(n, M_PI / 6);
    SparseOperator p = assemble(projector_sum_terms(spec), n);
    auto pairs = extremal_eigs(p, 2, Which::lowest);
    REQUIRE(std::abs(pairs[0].value) < 1e-9);
    REQUIRE(pairs[1].value >= 1.0 - 1e-9);
    REQUIRE(fidelity(pairs[0].vector, product_state(spec)) > 1.0 - 1e-9);
  }
}

TEST_CASE("theta_energy_density: quoted values") {
  REQUIRE(theta_energy_density(M_PI / 6, -1.05, 0.5) == Catch::Approx(-0.4093).margin(5e-4));
  REQUIRE(std::abs(theta_energy_density(0.0, -1.05, 0.5) - 1.5) < 1e-12);
  REQUIRE(std::abs(theta_energy_density(M_PI / 4, -1.05, 0.5) - (-1.05)) < 1e-12);
}

TEST_CASE("theta_energy_density covers both signs across [0, pi/2]") {
  double lo = 1e300, hi = -1e300;
  double prev = theta_energy_density(0.0, -1.05, 0.5);
  double max_jump = 0.0;
  for (int i = 1; i <= 256; ++i) {
    const double t = (M_PI / 2) * i / 256.0;
    const double e = theta_energy_density(t, -1.05, 0.5);
    lo = std::min(lo, e);
    hi = std::max(hi, e);
    max_jump = std::max(max_jump, std::abs(e - prev));
    prev = e;
  }
  REQUIRE(lo < 0.0);
  REQUIRE(hi > 0.0);
  REQUIRE(max_jump < 0.05);  // continuity at this grid resolution
}
