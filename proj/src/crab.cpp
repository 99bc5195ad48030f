#include "fbgate/crab.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "fbgate/errors.hpp"

namespace fbgate {

double base_pulse(double t, double omega0, double tau) {
  if (!(t >= 0.0 && t <= tau)) {
    std::ostringstream msg;
    msg << "pulse evaluated at t=" << t << " outside [0, " << tau << "]";
    throw Error(msg.str());
  }
  const double s = t / tau;
  return omega0 * s * (1.0 - s);
}

double crab_pulse(double t, const PulseSpec& spec) {
  const double base = base_pulse(t, spec.omega0, spec.tau);
  if (base == 0.0) return 0.0;
  double corr = 1.0;
  for (int n = 0; n < spec.n_modes(); ++n) {
    const double wt = spec.freqs[n] * t;
    corr += spec.a[n] * std::sin(wt) + spec.b[n] * std::cos(wt);
  }
  return std::clamp(base * corr, -spec.omega_max, spec.omega_max);
}

double PulseSpec::operator()(double t) const { return crab_pulse(t, *this); }

void PulseSpec::validate() const {
  std::vector<std::string> bad;
  if (!std::isfinite(omega0)) bad.push_back("pulse.omega0 must be finite");
  if (!(tau > 0.0) || !std::isfinite(tau)) bad.push_back("pulse.tau must be positive");
  if (!(omega_max > 0.0)) bad.push_back("pulse.omega_max must be positive");
  if (a.size() != freqs.size() || b.size() != freqs.size())
    bad.push_back("pulse coefficient vectors must match the number of frequencies");
  for (double w : freqs)
    if (!(w > 0.0) || !std::isfinite(w)) {
      bad.push_back("pulse frequencies must be positive and finite");
      break;
    }
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

std::vector<double> randomize_frequencies(int n_modes, double tau, std::uint64_t seed) {
  if (n_modes < 1) throw Error("randomize_frequencies: n_modes must be >= 1");
  if (!(tau > 0.0)) throw Error("randomize_frequencies: tau must be positive");
  std::mt19937_64 rng(seed);
  std::vector<double> out(n_modes);
  for (int n = 0; n < n_modes; ++n) {
    // 53 random bits mapped to [0, 1) by hand so the stream is identical across standard libraries
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    out[n] = 2.0 * M_PI * (n + 1) * (1.0 + (u - 0.5)) / tau;
  }
  return out;
}

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const NelderMeadOptions& opts,
                             const std::function<bool(double)>& stop) {
  const int n = static_cast<int>(x0.size());
  NelderMeadResult res;
  double best = std::numeric_limits<double>::infinity();
  bool halted = false;
  auto eval = [&](const std::vector<double>& x) {
    double v = f(x);
    if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    ++res.evaluations;
    best = std::min(best, v);
    if (stop && stop(best)) halted = true;
    return v;
  };
  auto budget_left = [&] { return !halted && res.evaluations < opts.max_evals; };

  std::vector<std::vector<double>> simplex{x0};
  std::vector<double> values{eval(x0)};
  for (int i = 0; i < n && budget_left(); ++i) {
    std::vector<double> x = x0;
    x[i] += opts.initial_step;
    simplex.push_back(x);
    values.push_back(eval(x));
  }

  std::vector<int> order(simplex.size());
  auto sort_simplex = [&] {
    order.resize(simplex.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    std::vector<std::vector<double>> s2;
    std::vector<double> v2;
    for (int i : order) {
      s2.push_back(simplex[i]);
      v2.push_back(values[i]);
    }
    simplex.swap(s2);
    values.swap(v2);
  };
  auto blend = [&](const std::vector<double>& c, const std::vector<double>& w, double coef) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = c[i] + coef * (w[i] - c[i]);
    return x;
  };

  if (static_cast<int>(simplex.size()) == n + 1) {
    while (budget_left()) {
      sort_simplex();
      double size = 0.0;
      for (int v = 1; v <= n; ++v)
        for (int i = 0; i < n; ++i) size = std::max(size, std::abs(simplex[v][i] - simplex[0][i]));
      if (values[n] - values[0] <= opts.f_tolerance && size <= opts.x_tolerance) {
        res.converged = true;
        break;
      }
      std::vector<double> centroid(n, 0.0);
      for (int v = 0; v < n; ++v)
        for (int i = 0; i < n; ++i) centroid[i] += simplex[v][i] / n;

      const auto xr = blend(centroid, simplex[n], -1.0);
      const double fr = eval(xr);
      if (fr < values[0]) {
        if (!budget_left()) {
          simplex[n] = xr;
          values[n] = fr;
          break;
        }
        const auto xe = blend(centroid, simplex[n], -2.0);
        const double fe = eval(xe);
        if (fe < fr) {
          simplex[n] = xe;
          values[n] = fe;
        } else {
          simplex[n] = xr;
          values[n] = fr;
        }
      } else if (fr < values[n - 1]) {
        simplex[n] = xr;
        values[n] = fr;
      } else {
        const bool outside = fr < values[n];
        const auto xc = outside ? blend(centroid, simplex[n], -0.5) : blend(centroid, simplex[n], 0.5);
        if (!budget_left()) break;
        const double fc = eval(xc);
        if (fc < std::min(fr, values[n])) {
          simplex[n] = xc;
          values[n] = fc;
        } else {
          for (int v = 1; v <= n && budget_left(); ++v) {
            simplex[v] = blend(simplex[0], simplex[v], 0.5);
            values[v] = eval(simplex[v]);
          }
        }
      }
    }
  }
  sort_simplex();
  res.x = simplex[0];
  res.value = values[0];
  return res;
}

namespace {

struct RestartOutcome {
  RestartSummary summary;
  std::vector<EvaluationRecord> log;
  double best_leakage = 0.0;
  double best_phase_difference = 0.0;
};

PulseSpec with_coefficients(const PulseSpec& base, const std::vector<double>& x) {
  PulseSpec p = base;
  const int m = base.n_modes();
  p.a.assign(x.begin(), x.begin() + m);
  p.b.assign(x.begin() + m, x.end());
  return p;
}

bool reached(const RestartOutcome& o, const GateProblem& problem, const CrabOptions& opts) {
  const double phase_error =
      std::abs(std::remainder(o.best_phase_difference - problem.settings.target_phase, 2.0 * M_PI));
  return o.summary.best_fidelity >= opts.target_fidelity && phase_error <= opts.phase_tolerance;
}

RestartOutcome run_restart(const GateProblem& problem, const PulseSpec& seed_pulse, int index,
                           std::uint64_t freq_seed, const CrabOptions& opts) {
  RestartOutcome out;
  out.summary.freq_seed = freq_seed;
  PulseSpec base = seed_pulse;
  std::vector<double> x0(2 * opts.n_modes, 0.0);
  const bool reuse = index == 0 && seed_pulse.n_modes() == opts.n_modes;
  if (reuse) {
    std::copy(seed_pulse.a.begin(), seed_pulse.a.end(), x0.begin());
    std::copy(seed_pulse.b.begin(), seed_pulse.b.end(), x0.begin() + opts.n_modes);
  } else {
    base.freqs = randomize_frequencies(opts.n_modes, seed_pulse.tau, freq_seed);
    base.a.assign(opts.n_modes, 0.0);
    base.b.assign(opts.n_modes, 0.0);
  }
  out.summary.best = base;

  auto objective = [&](const std::vector<double>& x) {
    const PulseSpec p = with_coefficients(base, x);
    EvaluationRecord rec{index, 0.0, 0.0, std::numeric_limits<double>::infinity(), false};
    try {
      const GateResult r = run_gate(problem, [&p](double t) { return p(t); });
      rec.fidelity = r.fidelity.fidelity;
      rec.leakage = r.max_leakage;
      rec.objective = 1.0 - rec.fidelity + opts.leak_weight * rec.leakage;
      if (rec.objective < out.summary.best_objective) {
        out.summary.best_objective = rec.objective;
        out.summary.best_fidelity = rec.fidelity;
        out.summary.best = p;
        out.best_leakage = rec.leakage;
        out.best_phase_difference = std::remainder(r.fidelity.phi_s - r.fidelity.phi_a, 2.0 * M_PI);
      }
    } catch (const Error&) {
      rec.failed = true;
      ++out.summary.failed;
    }
    out.log.push_back(rec);
    return rec.objective;
  };

  NelderMeadOptions nm;
  nm.max_evals = opts.max_evals;
  nm.initial_step = opts.initial_step;
  const auto stop = [&](double) { return reached(out, problem, opts); };
  const auto res = nelder_mead(objective, x0, nm, stop);
  out.summary.evaluations = res.evaluations;
  out.summary.converged = res.converged;
  return out;
}

}  // namespace

OptimizationReport optimize(const GateProblem& problem, const PulseSpec& start, const CrabOptions& opts) {
  if (opts.n_modes < 1 || opts.restarts < 1 || opts.max_evals < 1)
    throw ConfigError({"optimizer needs n_modes, restarts and max_evals >= 1"});
  if (std::abs(start.tau - problem.settings.tau) > 1e-12 * problem.settings.tau)
    throw ConfigError({"pulse.tau must match the gate duration"});

  std::mt19937_64 master(opts.seed);
  std::vector<std::uint64_t> seeds(opts.restarts);
  for (auto& s : seeds) s = master();

  OptimizationReport report;
  report.seed = opts.seed;
  double best_objective = std::numeric_limits<double>::infinity();
  double best_so_far = 0.0;
  bool target_hit = false;
  const int wave = std::max(1, opts.parallel_restarts);
  for (int first = 0; first < opts.restarts && !target_hit; first += wave) {
    const int last = std::min(opts.restarts, first + wave);
    std::vector<std::future<RestartOutcome>> jobs;
    for (int r = first; r < last; ++r)
      jobs.push_back(std::async(wave > 1 ? std::launch::async : std::launch::deferred,
                                [&, r] { return run_restart(problem, start, r, seeds[r], opts); }));
    for (auto& job : jobs) {
      RestartOutcome o = job.get();
      for (const auto& rec : o.log) {
        ++report.evaluations;
        report.evaluations_log.push_back(rec);
        if (rec.failed) {
          ++report.failed;
          continue;
        }
        report.fidelity_history.push_back(rec.fidelity);
        best_so_far = std::max(best_so_far, rec.fidelity);
        report.best_history.push_back(best_so_far);
      }
      if (o.summary.best_objective < best_objective) {
        best_objective = o.summary.best_objective;
        report.best = o.summary.best;
        report.best_fidelity = o.summary.best_fidelity;
        report.best_leakage = o.best_leakage;
        report.best_phase_difference = o.best_phase_difference;
      }
      if (reached(o, problem, opts)) target_hit = true;
      report.converged = o.summary.converged;
      report.restarts.push_back(std::move(o.summary));
    }
  }
  if (report.evaluations == report.failed) throw Error("optimize: every objective evaluation failed");
  report.converged = opts.target_fidelity <= 1.0 ? target_hit : report.converged;
  return report;
}

}  // namespace fbgate
