#include <catch2/catch_amalgamated.hpp>

#include "lfilter/eigs.hpp"
#include "lfilter/expm.hpp"
#include "lfilter/filter.hpp"
#include "lfilter/solve.hpp"
#include "lfilter/tfi.hpp"
#include "oracles.hpp"

using namespace lfilter;

namespace {

SparseOperator diag_op(std::initializer_list<double> entries) {
  const auto dim = static_cast<Eigen::Index>(entries.size());
  Matrix m = Matrix::Zero(dim, dim);
  Eigen::Index i = 0;
  for (double e : entries) m(i, i) = e, ++i;
  return oracles::operator_from_dense(m, sites_of_dim(dim));
}

}  // namespace

// --- extremal eigenpairs ----------------------------------------------------

TEST_CASE("extremal_eigs: diag(0,1,2,3) lowest") {
  SparseOperator op = diag_op({0.0, 1.0, 2.0, 3.0});
  auto pairs = extremal_eigs(op, 1, Which::lowest);
  REQUIRE(pairs.size() == 1);
  REQUIRE(std::abs(pairs[0].value - 0.0) < 1e-9);
  REQUIRE(fidelity(pairs[0].vector, basis_state(2, 0)) > 1.0 - 1e-12);
}

TEST_CASE("extremal_eigs: diag highest and k=2") {
  SparseOperator op = diag_op({-1.5, 0.25, 2.0, 7.0});
  auto hi = extremal_eigs(op, 2, Which::highest);
  REQUIRE(std::abs(hi[0].value - 7.0) < 1e-9);
  REQUIRE(std::abs(hi[1].value - 2.0) < 1e-9);
}

TEST_CASE("extremal_eigs: projector sum has the product state as ground state") {
  const auto spec = ProductStateSpec::afm(5);
  SparseOperator p = assemble(projector_sum_terms(spec), 5);
  auto pairs = extremal_eigs(p, 2, Which::lowest);
  REQUIRE(std::abs(pairs[0].value) < 1e-9);
  REQUIRE(fidelity(pairs[0].vector, product_state(spec)) > 1.0 - 1e-10);
  REQUIRE(pairs[1].value > 1.0 - 1e-8);  // gap of the projector sum
}

TEST_CASE("extremal_eigs: TFI N=8 ground energy matches dense oracle to 1e-8") {
  TfiParams p{8, 1.0, -1.05, 0.5};
  auto terms = build_tfi(p);
  SparseOperator op = assemble(terms, 8);
  auto pairs = extremal_eigs(op, 1, Which::lowest);
  Eigen::SelfAdjointEigenSolver<Matrix> es(oracles::dense_from_terms(terms, 8),
                                           Eigen::EigenvaluesOnly);
  REQUIRE(std::abs(pairs[0].value - es.eigenvalues()[0]) < 1e-8);
  // residual contract
  Vector r = op.apply(pairs[0].vector) - pairs[0].value * pairs[0].vector;
  REQUIRE(r.norm() < 1e-8);
}

TEST_CASE("extremal_eigs rejects bad k") {
  SparseOperator op = diag_op({0.0, 1.0});
  REQUIRE_THROWS_AS(extremal_eigs(op, 0, Which::lowest), std::invalid_argument);
  REQUIRE_THROWS_AS(extremal_eigs(op, 3, Which::lowest), std::invalid_argument);
}

// --- shifted solve -----------------------------------------------------------

TEST_CASE("shifted_solve: eigenvector right-hand side has the closed form") {
  TfiParams p{4, 1.0, -1.05, 0.5};
  auto terms = build_tfi(p);
  SparseOperator h = assemble(terms, 4);
  Eigen::SelfAdjointEigenSolver<Matrix> es(oracles::dense_from_terms(terms, 4));
  const int n_pick = 5;
  Vector en = es.eigenvectors().col(n_pick);
  const double e_n = es.eigenvalues()[n_pick];
  const double energy = -1.0, delta = 0.5;
  Vector x = shifted_solve(h, energy, delta, en);
  Vector expected = en / Complex(1.0, (e_n - energy) / delta);
  REQUIRE((x - expected).norm() < 1e-9);
}

TEST_CASE("shifted_solve: infinite delta is the identity filter") {
  TfiParams p{3, 1.0, -1.05, 0.5};
  SparseOperator h = assemble(build_tfi(p), 3);
  Vector rhs = oracles::random_state(8, 5);
  Vector x = shifted_solve(h, 0.3, std::numeric_limits<double>::infinity(), rhs);
  REQUIRE((x - rhs).norm() < 1e-14);
}

TEST_CASE("shifted_solve: TFI N=4 AFM rhs matches full eigendecomposition oracle") {
  TfiParams p{4, 1.0, -1.05, 0.5};
  auto terms = build_tfi(p);
  SparseOperator h = assemble(terms, 4);
  const auto spec = ProductStateSpec::afm(4);
  Vector psi = product_state(spec);
  const double e0 = classical_moments(spec, terms).mean;
  const double delta = 0.5;

  ShiftedSolveInfo info;
  Vector x = shifted_solve(h, e0, delta, psi, {}, &info);

  Eigen::SelfAdjointEigenSolver<Matrix> es(oracles::dense_from_terms(terms, 4));
  Vector c = es.eigenvectors().adjoint() * psi;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    c[i] /= Complex(1.0, (es.eigenvalues()[i] - e0) / delta);
  Vector expected = es.eigenvectors() * c;

  REQUIRE((x - expected).norm() < 1e-9);
  REQUIRE(info.residual <= 1e-10 * psi.norm() * 1.01);
}

TEST_CASE("shifted_solve: consistency, applying the filter recovers the rhs") {
  TfiParams p{6, 1.0, -1.05, 0.5};
  auto terms = build_tfi(p);
  SparseOperator h = assemble(terms, 6);
  Vector rhs = oracles::random_state(64, 9);
  for (double delta : {0.1, 0.5, 2.0}) {
    Vector x = shifted_solve(h, -3.0, delta, rhs);
    FilterParams fp = FilterParams::from_delta(-3.0, delta);
    REQUIRE((filter_matvec(h, fp, x) - rhs).norm() < 1e-10 * rhs.norm());
  }
}

TEST_CASE("shifted_solve rejects bad inputs") {
  SparseOperator h = diag_op({0.0, 1.0});
  Vector rhs = basis_state(1, 0);
  REQUIRE_THROWS_AS(shifted_solve(h, 0.0, -1.0, rhs), std::invalid_argument);
  Vector wrong = Vector::Zero(4);
  REQUIRE_THROWS_AS(shifted_solve(h, 0.0, 1.0, wrong), std::invalid_argument);
}

// --- Krylov propagator -------------------------------------------------------

TEST_CASE("expm_apply: t = 0 returns the input") {
  SparseOperator op = diag_op({0.0, 1.0, 2.0, 3.0});
  Vector v = oracles::random_state(4, 1);
  REQUIRE((expm_apply(op, v, 0.0, 1e-10) - v).norm() < 1e-15);
}

TEST_CASE("expm_apply: generator annihilating the state acts as identity") {
  const auto spec = ProductStateSpec::uniform(5, 0.4);
  SparseOperator p = assemble(projector_sum_terms(spec), 5);
  Vector psi = product_state(spec);
  Vector out = expm_apply(p, psi, 0.7, 1e-10);
  REQUIRE((out - psi).norm() < 1e-10);
}

TEST_CASE("expm_apply: random 4-qubit Hermitian operator matches dense oracle to 1e-9") {
  Matrix m = oracles::random_hermitian(16, 77);
  SparseOperator op = oracles::operator_from_dense(m, 4);
  Vector v = oracles::random_state(16, 78);
  const double t = 0.7;
  Vector got = expm_apply(op, v, t, 1e-9);
  Vector expected = oracles::dense_expm_apply(m, v, t);
  REQUIRE((got - expected).norm() < 1e-9);
}

TEST_CASE("expm_apply: long times and both signs stay within tolerance") {
  TfiParams p{5, 1.0, -1.05, 0.5};
  auto terms = build_tfi(p);
  SparseOperator op = assemble(terms, 5);
  Matrix dense = oracles::dense_from_terms(terms, 5);
  Vector v = oracles::random_state(32, 12);
  for (double t : {3.0, -2.25}) {
    Vector got = expm_apply(op, v, t, 1e-9);
    Vector expected = oracles::dense_expm_apply(dense, v, t);
    REQUIRE((got - expected).norm() < 1e-9);
  }
}

TEST_CASE("property: expm_apply preserves the norm") {
  TfiParams p{4, 1.0, -1.05, 0.5};
  SparseOperator op = assemble(build_tfi(p), 4);
  for (unsigned trial = 0; trial < 6; ++trial) {
    Vector v = oracles::random_state(16, 300 + trial);
    Vector out = expm_apply(op, v, 0.31 * (trial + 1), 1e-9);
    REQUIRE(std::abs(out.norm() - 1.0) < 1e-10);
  }
}

TEST_CASE("expm_apply input validation") {
  SparseOperator op = diag_op({0.0, 1.0});
  Vector v = basis_state(1, 0);
  REQUIRE_THROWS_AS(expm_apply(op, v, 1.0, 0.0), std::invalid_argument);
  Vector wrong = Vector::Zero(4);
  REQUIRE_THROWS_AS(expm_apply(op, wrong, 1.0, 1e-9), std::invalid_argument);
}
