#include <doctest.h>

#include <cmath>

#include "fbgate/crab.hpp"
#include "fbgate/errors.hpp"
#include "fbgate/units.hpp"

using namespace fbgate;

namespace {

SectorHamiltonian two_level(double gap) {
  SectorHamiltonian h;
  h.symmetry = Sector::Symmetric;
  h.pairs = {{0, 0}, {0, 1}};
  h.dim_open = 2;
  h.h0 = Eigen::Vector2d(0.0, gap).asDiagonal();
  h.pair_energy = Eigen::Vector2d(0.0, gap);
  h.spectrum = h.pair_energy;
  h.drive_re = Eigen::Matrix2d{{0.0, 1.0}, {1.0, 0.0}};
  h.drive_im = Eigen::Matrix2d::Zero();
  h.drive_norm = 1.0;
  return h;
}

SectorHamiltonian spectator() {
  SectorHamiltonian h;
  h.symmetry = Sector::Antisymmetric;
  h.pairs = {{0, 1}};
  h.dim_open = 1;
  h.h0 = Eigen::MatrixXd::Zero(1, 1);
  h.pair_energy = Eigen::VectorXd::Zero(1);
  h.spectrum = h.pair_energy;
  h.drive_re = Eigen::MatrixXd::Zero(1, 1);
  h.drive_im = Eigen::MatrixXd::Zero(1, 1);
  return h;
}

// Resonantly driven two-level system in the symmetric sector and an undriven spectator: the gate
// phase pi appears when the driven sector completes one full Rabi cycle.
GateProblem toy_problem(double tau) {
  GateProblem p;
  const double gap = 20.0;
  p.sym = two_level(gap);
  p.anti = spectator();
  p.init_s.open = Eigen::Vector2cd(1.0, 0.0);
  p.init_s.closed.resize(0);
  p.init_a.open = Eigen::VectorXcd::Ones(1);
  p.init_a.closed.resize(0);
  p.drive.delta = gap;
  p.settings.tau = tau;
  p.settings.n_steps = 3000;
  p.settings.leakage_cutoff = 1e9;
  return p;
}

double area(const PulseSpec& p) {
  const int n = 20000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += p((i + 0.5) * p.tau / n);
  return sum * p.tau / n;
}

}  // namespace

TEST_CASE("base pulse") {
  CHECK(base_pulse(0.0, 2.0, 10.0) == 0.0);
  CHECK(base_pulse(10.0, 2.0, 10.0) == 0.0);
  CHECK(base_pulse(5.0, 2.0, 10.0) == 0.5);
  CHECK_THROWS_AS(base_pulse(-1e-9, 2.0, 10.0), Error);
  CHECK_THROWS_AS(base_pulse(10.1, 2.0, 10.0), Error);
}

TEST_CASE("crab envelope: identity correction, endpoints, clipping") {
  PulseSpec p{1.0, 10.0, 0.3, {0.7, 1.3}, {0.0, 0.0}, {0.0, 0.0}};
  for (double t : {0.5, 2.0, 7.5}) CHECK(crab_pulse(t, p) == doctest::Approx(std::min(0.3, base_pulse(t, 1.0, 10.0))));
  p.a = {3.0, -2.0};
  p.b = {1.5, 4.0};
  p.omega_max = 100.0;
  CHECK(crab_pulse(0.0, p) == 0.0);
  CHECK(crab_pulse(10.0, p) == 0.0);
  p.omega_max = 0.2;
  for (int i = 0; i <= 10000; ++i) {
    const double v = p(p.tau * i / 10000);
    CHECK(std::abs(v) <= 0.2);
  }
  CHECK(crab_pulse(5.0, p) == 0.2);
  CHECK_THROWS_AS(crab_pulse(11.0, p), Error);
}

TEST_CASE("randomized frequencies") {
  const auto f = randomize_frequencies(5, 100.0, 42);
  REQUIRE(f.size() == 5);
  CHECK(f == randomize_frequencies(5, 100.0, 42));
  CHECK(f != randomize_frequencies(5, 100.0, 43));
  for (int n = 1; n <= 5; ++n) {
    CHECK(f[n - 1] >= units::kPi * n / 100.0);
    CHECK(f[n - 1] <= 3.0 * units::kPi * n / 100.0);
  }
  CHECK_THROWS(randomize_frequencies(0, 100.0, 1));
}

TEST_CASE("nelder-mead on the Rosenbrock function") {
  auto rosen = [](const std::vector<double>& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  NelderMeadOptions o;
  o.max_evals = 5000;
  o.initial_step = 0.5;
  o.f_tolerance = 1e-20;
  o.x_tolerance = 1e-12;
  const auto r = nelder_mead(rosen, {-1.2, 1.0}, o);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.evaluations <= 5000);
}

TEST_CASE("single evaluation returns the base pulse fidelity") {
  const double tau = 60.0;
  const GateProblem problem = toy_problem(tau);
  PulseSpec start{0.5, tau, 5.0, {}, {}, {}};
  CrabOptions o;
  o.n_modes = 3;
  o.restarts = 1;
  o.max_evals = 1;
  const auto rep = optimize(problem, start, o);
  const GateResult base = run_gate(problem, [&](double t) { return base_pulse(t, 0.5, tau); });
  CHECK(rep.evaluations == 1);
  CHECK(rep.best_fidelity == doctest::Approx(base.fidelity.fidelity).epsilon(1e-13));
}

TEST_CASE("optimizer finds the full Rabi cycle on a two-level toy") {
  const double tau = 60.0;
  const GateProblem problem = toy_problem(tau);
  // base area 0.5 tau / 6 = 1.6 pi, short of the 2 pi the phase flip needs
  PulseSpec start{0.5, tau, 5.0, {}, {}, {}};
  CrabOptions o;
  o.n_modes = 2;
  o.restarts = 2;
  o.max_evals = 600;
  o.target_fidelity = 0.9995;
  o.seed = 7;
  const auto rep = optimize(problem, start, o);
  CHECK(rep.best_fidelity > 0.999);
  // rotating-wave oracle: the sector amplitude is cos(A/2), so f ~ 1 requires area A = 2 pi
  CHECK(area(rep.best) == doctest::Approx(2.0 * units::kPi).epsilon(0.02));

  SUBCASE("best-so-far history is monotone and matches the log") {
    for (std::size_t i = 1; i < rep.best_history.size(); ++i) CHECK(rep.best_history[i] >= rep.best_history[i - 1]);
    CHECK(rep.best_history.back() == rep.best_fidelity);
    CHECK(static_cast<int>(rep.evaluations_log.size()) == rep.evaluations);
  }
  SUBCASE("stored pulse replays to the reported fidelity") {
    const GateResult again = run_gate(problem, [&](double t) { return rep.best(t); });
    CHECK(std::abs(again.fidelity.fidelity - rep.best_fidelity) < 1e-10);
  }
  SUBCASE("reruns are identical") {
    const auto rep2 = optimize(problem, start, o);
    CHECK(rep2.best_fidelity == rep.best_fidelity);
    CHECK(rep2.best.a == rep.best.a);
    CHECK(rep2.best.b == rep.best.b);
    CHECK(rep2.best.freqs == rep.best.freqs);
    CHECK(rep2.fidelity_history == rep.fidelity_history);
  }
}

TEST_CASE("every failing evaluation is an error") {
  GateProblem problem = toy_problem(60.0);
  problem.settings.n_steps = 10;  // step guard trips on every candidate
  PulseSpec start{0.5, 60.0, 5.0, {}, {}, {}};
  CrabOptions o;
  o.n_modes = 1;
  o.restarts = 1;
  o.max_evals = 5;
  CHECK_THROWS_AS(optimize(problem, start, o), Error);
}
