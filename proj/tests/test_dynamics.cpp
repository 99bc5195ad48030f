#include <doctest.h>

#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>

#include "fbgate/crab.hpp"
#include "fbgate/dynamics.hpp"
#include "fbgate/errors.hpp"

using namespace fbgate;
using cd = std::complex<double>;

namespace {

FeshbachModel model_for(double b, double d, double alpha, int n_pair, int n_mol) {
  TrapConfig trap;
  trap.b = b;
  trap.d = d;
  FeshbachConfig cfg;
  cfg.alpha = alpha;
  cfg.n_pair = n_pair;
  cfg.n_mol = n_mol;
  return build_model(trap, cfg);
}

PropagationOptions options(double tau, int n_steps, int stride = 0) {
  PropagationOptions o;
  o.tau = tau;
  o.n_steps = n_steps;
  o.sample_stride = stride;
  return o;
}

// Single-particle Schrodinger equation integrated with classical RK4 on a fine grid.
Eigen::MatrixXcd single_particle_propagator(const Eigen::VectorXd& eps, const Eigen::MatrixXcd& d,
                                            double omega, double delta, double tau, int steps) {
  const int n = static_cast<int>(eps.size());
  auto rhs = [&](double t, const Eigen::MatrixXcd& u) {
    const Eigen::MatrixXcd h = Eigen::MatrixXcd(eps.cast<cd>().asDiagonal()) +
                               omega * (d.real().cast<cd>() * std::cos(delta * t) -
                                        d.imag().cast<cd>() * std::sin(delta * t));
    return Eigen::MatrixXcd(cd(0, -1) * h * u);
  };
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(n, n);
  const double h = tau / steps;
  for (int s = 0; s < steps; ++s) {
    const double t = s * h;
    const Eigen::MatrixXcd k1 = rhs(t, u);
    const Eigen::MatrixXcd k2 = rhs(t + h / 2, u + h / 2 * k1);
    const Eigen::MatrixXcd k3 = rhs(t + h / 2, u + h / 2 * k2);
    const Eigen::MatrixXcd k4 = rhs(t + h, u + h * k3);
    u += h / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

}  // namespace

TEST_CASE("sector dimensions and Pauli blocking") {
  const auto m = model_for(36.0, 1.5, 7.0, 4, 3);
  const auto s = assemble_sector(Sector::Symmetric, m, 201.0, 0.2);
  const auto a = assemble_sector(Sector::Antisymmetric, m, 201.0, 0.2);
  CHECK(s.dim_open == 10);
  CHECK(s.dim_closed == 3);
  CHECK(a.dim_open == 6);
  CHECK(a.dim_closed == 0);
  for (const auto& p : a.pairs) CHECK(p.i < p.j);
  CHECK((s.h0 - s.h0.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(s.label(0) == "pair_0_0");
  CHECK(s.label(10) == "mol_0");
}

TEST_CASE("zero momentum drive is twice the identity on the open channel") {
  const auto m = model_for(36.0, 1.5, 7.0, 5, 2);
  for (Sector sec : {Sector::Symmetric, Sector::Antisymmetric}) {
    const auto h = assemble_sector(sec, m, 201.0, 0.0);
    Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(h.dim(), h.dim());
    expected.topLeftCorner(h.dim_open, h.dim_open) = 2.0 * Eigen::MatrixXcd::Identity(h.dim_open, h.dim_open);
    CHECK((h.drive() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sector drive equals the projected product-space operator") {
  const int np = 5;
  const auto m = model_for(36.0, 1.5, 7.0, np, 2);
  const double k = 0.6;
  const Eigen::MatrixXcd d = franck_condon_matrix(m.basis, k, np);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(np, np);
  Eigen::MatrixXcd full(np * np, np * np);
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < np; ++j)
      for (int k2 = 0; k2 < np; ++k2)
        for (int l = 0; l < np; ++l) full(i * np + j, k2 * np + l) = d(i, k2) * id(j, l) + id(i, k2) * d(j, l);
  for (Sector sec : {Sector::Symmetric, Sector::Antisymmetric}) {
    const auto h = assemble_sector(sec, m, 201.0, k);
    const double sign = sec == Sector::Symmetric ? 1.0 : -1.0;
    Eigen::MatrixXcd iso = Eigen::MatrixXcd::Zero(np * np, h.dim_open);
    for (int q = 0; q < h.dim_open; ++q) {
      const auto [i, j] = h.pairs[q];
      if (i == j) {
        iso(i * np + i, q) = 1.0;
      } else {
        iso(i * np + j, q) = std::sqrt(0.5);
        iso(j * np + i, q) = sign * std::sqrt(0.5);
      }
    }
    const Eigen::MatrixXcd projected = iso.adjoint() * full * iso;
    CHECK((h.drive().topLeftCorner(h.dim_open, h.dim_open) - projected).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("stationary state only acquires its phase") {
  const auto m = model_for(36.0, 1.5, 7.0, 6, 3);
  const auto h = assemble_sector(Sector::Symmetric, m, 201.0, 0.2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.h0);
  const double tau = 50.0;
  for (int idx : {0, 5, h.dim() - 1}) {
    const Eigen::VectorXcd v = es.eigenvectors().col(idx).cast<cd>();
    const auto init = TwoParticleState::from_flat(h, v);
    const auto out = propagate(h, [](double) { return 0.0; }, {}, init, options(tau, 2000));
    const Eigen::VectorXcd expected = std::polar(1.0, -es.eigenvalues()(idx) * tau) * v;
    CHECK((out.final.flat() - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("undriven localized pair tunnels at the doublet splitting") {
  const auto m = model_for(15.0, 1.0, 0.0, 4, 2);
  const auto h = assemble_sector(Sector::Symmetric, m, 201.0, 0.2);
  const auto init = localized_pair_state(h, m.basis);
  const double split = m.basis.energies(1) - m.basis.energies(0);
  const double tau = 3.0 / split;
  const auto out = propagate(h, [](double) { return 0.0; }, {}, init, options(tau, 4000, 40));
  for (const auto& s : out.trajectory) {
    // (g0 g0 - g1 g1)/sqrt2 dephases at 2 * split: return probability cos^2(split * t)
    const double expected = std::pow(std::cos(split * s.t), 2);
    CHECK(std::norm(init.flat().dot(s.amplitudes)) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("non-interacting sectors factor into single-particle propagators") {
  const int np = 6;
  const auto m = model_for(36.0, 1.5, 0.0, np, 2);
  const double k = 0.5, omega = 0.3, tau = 12.0;
  const double delta = m.basis.energies(4) - m.basis.energies(0);
  const Eigen::MatrixXcd d = franck_condon_matrix(m.basis, k, np);
  const Eigen::MatrixXcd u = single_particle_propagator(m.basis.energies.head(np), d, omega, delta, tau, 40000);
  for (Sector sec : {Sector::Symmetric, Sector::Antisymmetric}) {
    const auto h = assemble_sector(sec, m, 201.0, k);
    const auto init = localized_pair_state(h, m.basis);
    const auto out = propagate(h, [&](double) { return omega; }, {delta, 0.0}, init, options(tau, 6000));
    // reference: apply u (x) u to the product amplitudes and project back
    const Eigen::VectorXd lft = m.basis.coeffs.leftCols(np).transpose() * localized_states(m.basis).left;
    const Eigen::VectorXd rgt = m.basis.coeffs.leftCols(np).transpose() * localized_states(m.basis).right;
    const double sign = sec == Sector::Symmetric ? 1.0 : -1.0;
    const Eigen::VectorXcd ul = u * lft.cast<cd>(), ur = u * rgt.cast<cd>();
    for (int q = 0; q < h.dim_open; ++q) {
      const auto [i, j] = h.pairs[q];
      // product amplitude of (L R +/- R L)/sqrt2 after u (x) u
      const cd cij = (ul(i) * ur(j) + sign * ul(j) * ur(i)) / std::sqrt(2.0);
      const cd ref = i == j ? cij : std::sqrt(2.0) * cij;
      CHECK(std::abs(out.final.open(q) - ref) < 1e-8);
    }
  }
}

TEST_CASE("norm is conserved at a moderate step") {
  const auto m = model_for(36.0, 1.5, 7.0, 7, 4);
  const auto h = assemble_sector(Sector::Symmetric, m, 201.0, 0.21);
  const auto init = localized_pair_state(h, m.basis);
  const double hnorm = h.h0.cwiseAbs().rowwise().sum().maxCoeff() + 1.5 * h.drive_norm;
  const double dt = 0.05 / hnorm;
  const int steps = 1000;
  const auto out = propagate(h, [](double) { return 1.5; }, {2.8, 0.0}, init, options(dt * steps, steps));
  CHECK(out.norm_drift < 1e-10);
}

TEST_CASE("forward then time-reversed propagation returns the initial state") {
  const auto m = model_for(36.0, 1.5, 7.0, 6, 3);
  const auto h = assemble_sector(Sector::Symmetric, m, 201.0, 0.21);
  const auto init = localized_pair_state(h, m.basis);
  PulseSpec p;
  p.omega0 = 3.0;
  p.tau = 60.0;
  p.freqs = {0.2, 0.35};
  p.a = {0.3, -0.2};
  p.b = {0.1, 0.25};
  const DriveConfig fwd{2.8, 0.4};
  const auto out = propagate(h, [&](double t) { return p(t); }, fwd, init, options(p.tau, 6000));
  const DriveConfig back{-fwd.delta, fwd.delta * p.tau + fwd.phase0};
  const auto conj = TwoParticleState::from_flat(h, out.final.flat().conjugate());
  const auto ret = propagate(h, [&](double t) { return p(p.tau - t); }, back, conj, options(p.tau, 6000));
  CHECK((ret.final.flat().conjugate() - init.flat()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("the two steppers agree") {
  const auto m = model_for(36.0, 1.5, 7.0, 6, 3);
  const auto h = assemble_sector(Sector::Antisymmetric, m, 201.0, 0.21);
  const auto init = localized_pair_state(h, m.basis);
  auto pulse = [](double t) { return 1.5 * std::sin(M_PI * t / 40.0); };
  auto o = options(40.0, 4000);
  const auto a = propagate(h, pulse, {2.8, 0.0}, init, o);
  o.stepper = Stepper::MidpointRichardson;
  o.n_steps = 8000;
  const auto b = propagate(h, pulse, {2.8, 0.0}, init, o);
  CHECK((a.final.flat() - b.final.flat()).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("step guard and pulse domain errors") {
  const auto m = model_for(36.0, 1.5, 7.0, 4, 2);
  const auto h = assemble_sector(Sector::Antisymmetric, m, 201.0, 0.21);
  const auto init = localized_pair_state(h, m.basis);
  CHECK_THROWS_AS(propagate(h, [](double) { return 1.8; }, {}, init, options(100.0, 100)), PropagationError);
  CHECK_THROWS_AS(propagate(h, [](double t) { return base_pulse(t, 1.0, 5.0); }, {}, init, options(10.0, 1000)),
                  Error);
}

TEST_CASE("gate fidelity reference values") {
  const auto m = model_for(36.0, 1.5, 7.0, 4, 2);
  const auto s = assemble_sector(Sector::Symmetric, m, 201.0, 0.21);
  const auto a = assemble_sector(Sector::Antisymmetric, m, 201.0, 0.21);
  const auto is = localized_pair_state(s, m.basis);
  const auto ia = localized_pair_state(a, m.basis);
  CHECK(gate_fidelity(is, ia, is, ia, 0.0).fidelity == doctest::Approx(1.0));
  auto flipped = is;
  flipped.open *= std::polar(1.0, M_PI);
  const auto r = gate_fidelity(flipped, ia, is, ia, M_PI);
  CHECK(r.fidelity == doctest::Approx(1.0));
  CHECK(std::remainder(r.phi_s - r.phi_a - M_PI, 2 * M_PI) == doctest::Approx(0.0).epsilon(1e-12));
  // a normalized symmetric state orthogonal to the initial one
  Eigen::VectorXcd orth = Eigen::VectorXcd::Zero(s.dim());
  orth(s.dim_open - 1) = 1.0;
  const auto o = gate_fidelity(TwoParticleState::from_flat(s, orth), ia, is, ia, M_PI);
  CHECK(o.fidelity == doctest::Approx(0.25));
  CHECK_FALSE(o.phases_defined);
}

TEST_CASE("leakage bounds") {
  const auto m = model_for(36.0, 1.5, 7.0, 6, 2);
  const auto h = assemble_sector(Sector::Antisymmetric, m, 201.0, 0.21);
  const auto init = localized_pair_state(h, m.basis);
  const auto out = propagate(h, [](double) { return 0.0; }, {}, init, options(20.0, 200, 10));
  CHECK(leakage(h, out.trajectory, 20.0) == 0.0);
  CHECK(leakage(h, out.trajectory, 0.0) == doctest::Approx(1.0));
  CHECK_THROWS(leakage(h, {}, 1.0));
}

TEST_CASE("excited-state selection") {
  TrapConfig trap;
  const auto basis = solve_single_particle(trap);
  CHECK(select_excited_state(basis, 0.2134, 0.2, 12) == 4);
  CHECK(select_excited_state(basis, 0.2134, 0.5, 12) == 6);
}
