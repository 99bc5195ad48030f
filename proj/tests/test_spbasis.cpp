#include <doctest.h>

#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>

#include "fbgate/errors.hpp"
#include "fbgate/spbasis.hpp"

using namespace fbgate;

namespace {

// Lowest eigenvalues of -1/2 d^2 + V on a uniform grid, three-point Laplacian,
// Richardson-combined over two spacings.
Eigen::VectorXd grid_levels(double b, double d, int n_levels) {
  auto solve = [&](int points) {
    const double half = 14.0;
    const double h = 2.0 * half / (points + 1);
    Eigen::VectorXd diag(points);
    Eigen::VectorXd off = Eigen::VectorXd::Constant(points - 1, -0.5 / (h * h));
    for (int i = 0; i < points; ++i) {
      const double x = -half + (i + 1) * h;
      diag(i) = 1.0 / (h * h) + 0.5 * x * x +
                b / (std::sqrt(2.0 * M_PI) * d) * std::exp(-x * x / (2.0 * d * d));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s;
    s.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
    return Eigen::VectorXd(s.eigenvalues().head(n_levels));
  };
  const Eigen::VectorXd coarse = solve(2999);
  const Eigen::VectorXd fine = solve(5999);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace

TEST_CASE("harmonic limit reproduces n + 1/2") {
  const auto basis = diagonalize_double_well(40, 0.0, 1.0);
  for (int n = 0; n < 40; ++n) CHECK(basis.energies(n) == doctest::Approx(n + 0.5).epsilon(1e-13));
}

TEST_CASE("barrier ground-state element matches the Gaussian integral") {
  for (double d : {0.3, 1.0, 1.5, 4.0}) {
    const double b = 7.0;
    const double c = 1.0 + 1.0 / (2.0 * d * d);
    const double expected = b / (std::sqrt(2.0 * M_PI) * d) / std::sqrt(c);
    CHECK(barrier_matrix_element(0, 0, b, d) == doctest::Approx(expected).epsilon(1e-13));
    // <1|V|1> carries an extra 1/c from the x^2 moment.
    CHECK(barrier_matrix_element(1, 1, b, d) == doctest::Approx(expected / c).epsilon(1e-13));
    CHECK(barrier_matrix_element(0, 1, b, d) == 0.0);
  }
}

TEST_CASE("barrier matrix is symmetric and parity selective") {
  const Eigen::MatrixXd v = gaussian_barrier_matrix(30, 2.5, 0.8);
  CHECK((v - v.transpose()).cwiseAbs().maxCoeff() == 0.0);
  for (int m = 0; m < 30; ++m)
    for (int n = m + 1; n < 30; n += 2) CHECK(v(m, n) == 0.0);
}

TEST_CASE("double-well energies agree with a finite-difference oracle") {
  for (auto [b, d] : {std::pair{15.0, 1.0}, std::pair{36.0, 1.5}}) {
    TrapConfig cfg;
    cfg.b = b;
    cfg.d = d;
    const auto basis = solve_single_particle(cfg);
    const Eigen::VectorXd ref = grid_levels(b, d, 6);
    for (int n = 0; n < 6; ++n) CHECK(basis.energies(n) == doctest::Approx(ref(n)).epsilon(1e-7));
    CHECK(basis.converged);
    CHECK(basis.drift < 1e-8);
  }
}

TEST_CASE("parity alternates within the tunnelling doublet and eigenvectors are orthonormal") {
  TrapConfig cfg;
  const auto basis = solve_single_particle(cfg);
  CHECK(basis.parity(0) == 1);
  CHECK(basis.parity(1) == -1);
  const Eigen::MatrixXd gram = basis.coeffs.transpose() * basis.coeffs;
  CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-12);
  for (int i = 0; i < basis.size(); ++i) {
    Eigen::Index arg;
    basis.coeffs.col(i).cwiseAbs().maxCoeff(&arg);
    CHECK(basis.coeffs(arg, i) > 0.0);
  }
}

TEST_CASE("localized states sit in opposite wells") {
  TrapConfig cfg;
  const auto basis = solve_single_particle(cfg);
  const auto pair = localized_states(basis);
  const double xl = position_expectation(pair.left);
  const double xr = position_expectation(pair.right);
  CHECK(xl < -2.0);
  CHECK(xr == doctest::Approx(-xl).epsilon(1e-12));
  CHECK(pair.left.dot(pair.right) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(pair.splitting == doctest::Approx(basis.energies(1) - basis.energies(0)));
  CHECK(pair.splitting > 0.0);
}

TEST_CASE("truncation check raises when the basis is too small") {
  TrapConfig cfg;
  cfg.b = 100.0;
  cfg.d = 0.5;
  cfg.n_basis = 8;
  CHECK_THROWS_AS(solve_single_particle(cfg), ConvergenceError);
}

TEST_CASE("invalid trap parameters raise") {
  TrapConfig cfg;
  cfg.d = -1.0;
  CHECK_THROWS_AS(solve_single_particle(cfg), ConfigError);
  cfg.d = 1.0;
  cfg.b = std::nan("");
  CHECK_THROWS_AS(solve_single_particle(cfg), ConfigError);
}

TEST_CASE("plane-wave matrix in the harmonic basis") {
  const auto basis = diagonalize_double_well(30, 0.0, 1.0);
  for (double k : {0.05, 0.21337, 1.3}) {
    const double g = std::exp(-k * k / 4.0);
    const auto f00 = franck_condon(basis, k, 0, 0);
    CHECK(f00.real() == doctest::Approx(g).epsilon(1e-13));
    CHECK(std::abs(f00.imag()) < 1e-15);
    const auto f01 = franck_condon(basis, k, 0, 1);
    CHECK(std::abs(f01.real()) < 1e-15);
    CHECK(std::abs(f01.imag()) == doctest::Approx(k / std::sqrt(2.0) * g).epsilon(1e-12));
    const auto f11 = franck_condon(basis, k, 1, 1);
    CHECK(f11.real() == doctest::Approx((1.0 - k * k / 2.0) * g).epsilon(1e-12));
  }
}

TEST_CASE("Franck-Condon matrix is complex symmetric with parity-split phases") {
  TrapConfig cfg;
  const auto basis = solve_single_particle(cfg);
  const Eigen::MatrixXcd f = franck_condon_matrix(basis, 0.4, 10);
  CHECK((f - f.transpose()).cwiseAbs().maxCoeff() < 1e-13);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      if (basis.parity(i) == basis.parity(j))
        CHECK(std::abs(f(i, j).imag()) < 1e-13);
      else
        CHECK(std::abs(f(i, j).real()) < 1e-13);
    }
  CHECK(std::abs(f(0, 1)) == doctest::Approx(std::abs(franck_condon(basis, 0.4, 0, 1))));
  // exp(ikx) is unitary; rows of the full matrix keep unit norm up to truncation.
  const Eigen::MatrixXcd full = franck_condon_matrix(basis, 0.4, basis.size());
  CHECK(full.row(0).norm() == doctest::Approx(1.0).epsilon(1e-10));
}
