#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fbgate/dynamics.hpp"

namespace fbgate {

/// Omega(t) = omega0 (t/tau)(1 - t/tau) [1 + sum_n a_n sin(w_n t) + b_n cos(w_n t)], clipped to
/// +-omega_max. Units: omega0 and omega_max in omega, tau in 1/omega.
struct PulseSpec {
  double omega0 = 2.0;
  double tau = 1300.0;
  double omega_max = 1.8;
  std::vector<double> freqs;
  std::vector<double> a;
  std::vector<double> b;

  int n_modes() const { return static_cast<int>(freqs.size()); }
  double operator()(double t) const;
  void validate() const;
};

/// Throws Error for t outside [0, tau].
double base_pulse(double t, double omega0, double tau);
double crab_pulse(double t, const PulseSpec& spec);

/// w_n = 2 pi n (1 + r_n) / tau with r_n uniform in [-0.5, 0.5), drawn from mt19937_64(seed).
std::vector<double> randomize_frequencies(int n_modes, double tau, std::uint64_t seed);

struct NelderMeadOptions {
  int max_evals = 4000;
  double initial_step = 0.3;
  double f_tolerance = 1e-10;
  double x_tolerance = 1e-8;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;  // simplex collapsed within tolerance
};

/// Minimizes f from x0. Non-finite objective values rank as +inf. `stop` is consulted after
/// every evaluation with the best value so far and ends the search when it returns true.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const NelderMeadOptions& opts,
                             const std::function<bool(double)>& stop = {});

struct CrabOptions {
  int n_modes = 6;
  int restarts = 8;
  int max_evals = 4000;        // per restart
  double initial_step = 0.3;
  double leak_weight = 0.0;    // objective = 1 - f + leak_weight * max_leakage
  double target_fidelity = 1.1;  // stop once reached; > 1 disables
  double phase_tolerance = 1e300;  // the stop also needs |phi_s - phi_a - target_phase| within this
  std::uint64_t seed = 1;
  int parallel_restarts = 1;   // restarts evaluated concurrently per wave
};

struct EvaluationRecord {
  int restart;
  double fidelity;
  double leakage;
  double objective;
  bool failed;
};

struct RestartSummary {
  std::uint64_t freq_seed;
  PulseSpec best;
  double best_fidelity = 0.0;
  double best_objective = 1e300;
  int evaluations = 0;
  int failed = 0;
  bool converged = false;
};

struct OptimizationReport {
  PulseSpec best;
  double best_fidelity = 0.0;
  double best_leakage = 0.0;
  double best_phase_difference = 0.0;
  std::vector<double> fidelity_history;  // fidelity of each successful evaluation, in order
  std::vector<double> best_history;      // best-so-far fidelity after each evaluation
  std::vector<EvaluationRecord> evaluations_log;
  std::vector<RestartSummary> restarts;
  int evaluations = 0;
  int failed = 0;
  std::uint64_t seed = 0;
  bool converged = false;  // target reached, or last simplex collapsed when no target is set
};

/// CRAB search over the 2 n_modes coefficients of `start`'s envelope, one Nelder-Mead run per
/// frequency randomization. Throws Error if every evaluation fails.
OptimizationReport optimize(const GateProblem& problem, const PulseSpec& start, const CrabOptions& opts);

}  // namespace fbgate
