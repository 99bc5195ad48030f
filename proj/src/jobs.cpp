#include "fbgate/jobs.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fbgate/errors.hpp"
#include "fbgate/units.hpp"

namespace fbgate {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

struct Provenance {
  std::string job;
  std::string hash;
  std::uint64_t seed;
  double a_ho_m;
  double omega;
};

Provenance provenance(const RunConfig& cfg) {
  return {job_name(cfg.job), fnv1a_hex(cfg.canonical), cfg.seed, cfg.trap.a_ho(), cfg.trap.omega};
}

void write_header(std::ostream& out, const Provenance& p) {
  out << "# fbgate " << p.job << '\n'
      << "# config_hash fnv1a64:" << p.hash << '\n'
      << "# seed " << p.seed << '\n'
      << "# units energy=hbar*omega length=a_ho time=1/omega omega_rad_s=" << format_double(p.omega)
      << " a_ho_m=" << format_double(p.a_ho_m) << '\n';
}

json provenance_json(const RunConfig& cfg) {
  const Provenance p = provenance(cfg);
  return {{"job", p.job},
          {"config_hash", "fnv1a64:" + p.hash},
          {"seed", p.seed},
          {"resolved",
           {{"omega_rad_s", cfg.trap.omega},
            {"a_ho_m", p.a_ho_m},
            {"b", cfg.trap.b},
            {"d", cfg.trap.d},
            {"n_basis", cfg.trap.n_basis},
            {"alpha", cfg.feshbach.alpha},
            {"s_hbar_omega_per_G", cfg.feshbach.s},
            {"B0_G", cfg.feshbach.B0},
            {"polarizability_ratio", cfg.feshbach.polarizability_ratio},
            {"n_pair", cfg.feshbach.n_pair},
            {"n_mol", cfg.feshbach.n_mol},
            {"k_per_aho", cfg.gate.k},
            {"tau_inv_omega", cfg.pulse.tau}}}};
}

void write_file(const fs::path& path, const std::string& text, JobOutcome& outcome) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  outcome.files.push_back(path);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json pulse_json(const PulseSpec& p) {
  return {{"omega0", p.omega0}, {"tau", p.tau}, {"omega_max", p.omega_max},
          {"freqs", p.freqs},   {"a", p.a},     {"b", p.b}};
}

std::string spectrum_csv(const RunConfig& cfg, const std::vector<SpectrumPoint>& scan) {
  std::ostringstream out;
  write_header(out, provenance(cfg));
  out << "B_gauss,level_index,energy_hbar_omega,closed_channel_weight\n";
  for (const auto& p : scan)
    for (const auto& l : p.levels)
      out << format_double(p.B) << ',' << l.branch << ',' << format_double(l.energy) << ','
          << format_double(l.closed_weight) << '\n';
  return out.str();
}

void trajectory_rows(std::ostream& out, const SectorHamiltonian& h, const TwoParticleState& init,
                     const std::vector<Sample>& samples) {
  const Eigen::VectorXcd i0 = init.flat();
  for (const auto& s : samples) {
    const std::complex<double> overlap = i0.dot(s.amplitudes);
    const std::string t = format_double(s.t);
    out << t << ',' << sector_name(h.symmetry) << ",initial," << format_double(overlap.real()) << ','
        << format_double(overlap.imag()) << '\n';
    for (int q = 0; q < h.dim(); ++q)
      out << t << ',' << sector_name(h.symmetry) << ',' << h.label(q) << ','
          << format_double(s.amplitudes(q).real()) << ',' << format_double(s.amplitudes(q).imag()) << '\n';
  }
}

PulseSpec starting_pulse(const RunConfig& cfg) {
  PulseSpec p = cfg.pulse;
  p.freqs.clear();
  p.a.clear();
  p.b.clear();
  return p;
}

JobOutcome spectrum_job(const RunConfig& cfg, const fs::path& dir) {
  JobOutcome outcome;
  const FeshbachModel model = build_model(cfg.trap, cfg.feshbach);
  const auto scan = spectrum_scan(model, cfg.B_grid, cfg.window);
  write_file(dir / "spectrum.csv", spectrum_csv(cfg, scan), outcome);
  std::size_t rows = 0;
  for (const auto& p : scan) rows += p.levels.size();
  outcome.summary = "spectrum: " + std::to_string(scan.size()) + " fields, " + std::to_string(rows) + " levels";
  return outcome;
}

JobOutcome gate_job(const RunConfig& cfg, const fs::path& dir) {
  JobOutcome outcome;
  const FeshbachModel model = build_model(cfg.trap, cfg.feshbach);
  const GateProblem problem = build_gate_problem(model, cfg.gate);
  PulseSpec pulse = starting_pulse(cfg);
  double recorded = std::nan("");
  if (!cfg.replay_path.empty()) pulse = load_pulse_record(cfg.replay_path, &recorded);
  if (std::abs(pulse.tau - cfg.gate.tau) > 1e-12 * cfg.gate.tau)
    throw ConfigError({"replayed pulse tau differs from pulse.tau"});
  const GateResult r = run_gate(problem, [&](double t) { return pulse(t); }, cfg.sample_stride);

  std::ostringstream csv;
  write_header(csv, provenance(cfg));
  csv << "t_over_omega_inv,sector,state_label,re_amp,im_amp\n";
  trajectory_rows(csv, problem.sym, problem.init_s, r.trajectory_s);
  trajectory_rows(csv, problem.anti, problem.init_a, r.trajectory_a);
  write_file(dir / "trajectory.csv", csv.str(), outcome);

  json j = provenance_json(cfg);
  const auto& f = r.fidelity;
  j["result"] = {{"fidelity", f.fidelity},
                 {"phi_s", f.phi_s},
                 {"phi_a", f.phi_a},
                 {"phase_difference", std::remainder(f.phi_s - f.phi_a, 2.0 * units::kPi)},
                 {"phases_defined", f.phases_defined},
                 {"return_population_s", f.return_population_s},
                 {"return_population_a", f.return_population_a},
                 {"max_leakage", r.max_leakage},
                 {"leakage_cutoff", cfg.gate.leakage_cutoff},
                 {"norm_drift", r.norm_drift}};
  j["drive"] = {{"excited_state", problem.excited_state}, {"delta", problem.drive.delta}, {"k", cfg.gate.k}};
  j["pulse"] = pulse_json(pulse);
  if (!cfg.replay_path.empty()) {
    j["replay"] = {{"recorded_fidelity", recorded}, {"fidelity_difference", std::abs(f.fidelity - recorded)}};
  }
  write_file(dir / "gate_result.json", dump(j), outcome);
  outcome.summary = "gate: f=" + format_double(f.fidelity) + " leakage=" + format_double(r.max_leakage);
  return outcome;
}

JobOutcome optimize_job(const RunConfig& cfg, const fs::path& dir) {
  JobOutcome outcome;
  const FeshbachModel model = build_model(cfg.trap, cfg.feshbach);
  const GateProblem problem = build_gate_problem(model, cfg.gate);
  PulseSpec start = starting_pulse(cfg);
  if (!cfg.replay_path.empty()) start = load_pulse_record(cfg.replay_path);
  const OptimizationReport rep = optimize(problem, start, cfg.optimizer);

  // Re-propagate the stored best pulse so the written fidelity is a true evaluation of it.
  const GateResult check = run_gate(problem, [&](double t) { return rep.best(t); });

  json j = provenance_json(cfg);
  json restarts = json::array();
  for (const auto& r : rep.restarts)
    restarts.push_back({{"freq_seed", r.freq_seed},
                        {"best_fidelity", r.best_fidelity},
                        {"best_objective", r.best_objective},
                        {"evaluations", r.evaluations},
                        {"failed", r.failed},
                        {"simplex_converged", r.converged}});
  j["report"] = {{"best_fidelity", rep.best_fidelity},
                 {"replayed_fidelity", check.fidelity.fidelity},
                 {"best_leakage", rep.best_leakage},
                 {"phase_difference", rep.best_phase_difference},
                 {"return_population_s", check.fidelity.return_population_s},
                 {"return_population_a", check.fidelity.return_population_a},
                 {"evaluations", rep.evaluations},
                 {"failed", rep.failed},
                 {"converged", rep.converged},
                 {"seed", rep.seed},
                 {"options",
                  {{"n_modes", cfg.optimizer.n_modes},
                   {"restarts", cfg.optimizer.restarts},
                   {"max_evals", cfg.optimizer.max_evals},
                   {"leak_weight", cfg.optimizer.leak_weight},
                   {"target_fidelity", cfg.optimizer.target_fidelity},
                   {"phase_tolerance", cfg.optimizer.phase_tolerance},
                   {"initial_step", cfg.optimizer.initial_step}}},
                 {"restarts", restarts},
                 {"fidelity_history", rep.fidelity_history},
                 {"best_history", rep.best_history}};
  j["best_pulse"] = pulse_json(rep.best);
  write_file(dir / "optimization_report.json", dump(j), outcome);

  json record = pulse_json(rep.best);
  record["seed"] = cfg.seed;
  record["fidelity"] = check.fidelity.fidelity;
  record["config_hash"] = "fnv1a64:" + fnv1a_hex(cfg.canonical);
  write_file(dir / "pulse.json", dump(record), outcome);

  std::ostringstream csv;
  write_header(csv, provenance(cfg));
  csv << "t_over_omega_inv,omega_over_omega\n";
  const int samples = 4000;
  for (int i = 0; i <= samples; ++i) {
    const double t = rep.best.tau * i / samples;
    csv << format_double(t) << ',' << format_double(rep.best(t)) << '\n';
  }
  write_file(dir / "pulse.csv", csv.str(), outcome);
  outcome.summary = "optimize: f=" + format_double(check.fidelity.fidelity) + " after " +
                    std::to_string(rep.evaluations) + " evaluations";
  return outcome;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

}  // namespace

PulseSpec load_pulse_record(const fs::path& path, double* recorded_fidelity) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read pulse record " + path.string()});
  json j;
  try {
    in >> j;
    PulseSpec p;
    p.omega0 = j.at("omega0").get<double>();
    p.tau = j.at("tau").get<double>();
    p.omega_max = j.at("omega_max").get<double>();
    p.freqs = j.at("freqs").get<std::vector<double>>();
    p.a = j.at("a").get<std::vector<double>>();
    p.b = j.at("b").get<std::vector<double>>();
    p.validate();
    if (recorded_fidelity) *recorded_fidelity = j.value("fidelity", std::nan(""));
    return p;
  } catch (const json::exception& e) {
    throw ConfigError({"malformed pulse record " + path.string() + ": " + e.what()});
  }
}

JobOutcome run_job(const RunConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto start = std::chrono::steady_clock::now();
  const std::string started = timestamp();
  JobOutcome outcome;
  switch (cfg.job) {
    case Job::Spectrum: outcome = spectrum_job(cfg, out_dir); break;
    case Job::Gate: outcome = gate_job(cfg, out_dir); break;
    case Job::Optimize: outcome = optimize_job(cfg, out_dir); break;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream log(out_dir / "run.log", std::ios::app);
  log << "started " << started << " finished " << timestamp() << " wall_s " << seconds << " job "
      << job_name(cfg.job) << " seed " << cfg.seed << " config_hash fnv1a64:" << fnv1a_hex(cfg.canonical) << '\n';
  if (cfg.trap.omega_perp_ratio < 5.0)
    log << "warning: omega_perp/omega = " << cfg.trap.omega_perp_ratio
        << " < 5; transverse excitations are not modelled\n";
  log << outcome.summary << '\n';
  return outcome;
}

}  // namespace fbgate
