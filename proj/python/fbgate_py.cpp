#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fbgate/config.hpp"
#include "fbgate/crab.hpp"
#include "fbgate/dynamics.hpp"
#include "fbgate/errors.hpp"
#include "fbgate/feshbach.hpp"
#include "fbgate/jobs.hpp"
#include "fbgate/spbasis.hpp"

namespace py = pybind11;
using namespace fbgate;

namespace {

py::dict fidelity_dict(const GateResult& r) {
  py::dict d;
  d["fidelity"] = r.fidelity.fidelity;
  d["phi_s"] = r.fidelity.phi_s;
  d["phi_a"] = r.fidelity.phi_a;
  d["return_population_s"] = r.fidelity.return_population_s;
  d["return_population_a"] = r.fidelity.return_population_a;
  d["max_leakage"] = r.max_leakage;
  d["norm_drift"] = r.norm_drift;
  return d;
}

}  // namespace

PYBIND11_MODULE(_fbgate, m) {
  m.doc() = "Two-fermion Feshbach gate: double-well states, two-channel spectra, gate dynamics, CRAB";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<PropagationError>(m, "PropagationError", base.ptr());

  py::class_<TrapConfig>(m, "TrapConfig")
      .def(py::init<>())
      .def_readwrite("omega", &TrapConfig::omega)
      .def_readwrite("b", &TrapConfig::b)
      .def_readwrite("d", &TrapConfig::d)
      .def_readwrite("n_basis", &TrapConfig::n_basis)
      .def_readwrite("omega_perp_ratio", &TrapConfig::omega_perp_ratio)
      .def_readwrite("mass", &TrapConfig::mass)
      .def("a_ho", &TrapConfig::a_ho)
      .def("validate", &TrapConfig::validate);

  py::class_<SingleParticleBasis>(m, "SingleParticleBasis")
      .def_readonly("energies", &SingleParticleBasis::energies)
      .def_readonly("coeffs", &SingleParticleBasis::coeffs)
      .def_readonly("parity", &SingleParticleBasis::parity)
      .def_readonly("converged", &SingleParticleBasis::converged)
      .def_readonly("drift", &SingleParticleBasis::drift)
      .def("__len__", &SingleParticleBasis::size);

  m.def("solve_single_particle", &solve_single_particle, py::arg("trap"));
  m.def("barrier_matrix_element", &barrier_matrix_element, py::arg("m"), py::arg("n"), py::arg("b"), py::arg("d"));
  m.def("franck_condon_matrix", &franck_condon_matrix, py::arg("basis"), py::arg("k"), py::arg("n_states"));

  py::class_<FeshbachConfig>(m, "FeshbachConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &FeshbachConfig::alpha)
      .def_readwrite("s", &FeshbachConfig::s)
      .def_readwrite("B0", &FeshbachConfig::B0)
      .def_readwrite("polarizability_ratio", &FeshbachConfig::polarizability_ratio)
      .def_readwrite("n_mol", &FeshbachConfig::n_mol)
      .def_readwrite("n_pair", &FeshbachConfig::n_pair)
      .def_readwrite("n_mol_basis", &FeshbachConfig::n_mol_basis)
      .def("detuning", &FeshbachConfig::detuning);

  py::class_<FeshbachModel>(m, "FeshbachModel")
      .def_readonly("basis", &FeshbachModel::basis)
      .def_property_readonly("molecular_energies", [](const FeshbachModel& f) { return f.mol.energies; })
      .def_readonly("config", &FeshbachModel::cfg);
  m.def("build_model", &build_model, py::arg("trap"), py::arg("feshbach"));

  py::enum_<LevelKind>(m, "LevelKind")
      .value("Coupled", LevelKind::Coupled)
      .value("Pinned", LevelKind::Pinned)
      .value("UncoupledPair", LevelKind::UncoupledPair)
      .value("OddPair", LevelKind::OddPair);
  py::class_<SpectrumLevel>(m, "SpectrumLevel")
      .def_readonly("energy", &SpectrumLevel::energy)
      .def_readonly("closed_weight", &SpectrumLevel::closed_weight)
      .def_readonly("kind", &SpectrumLevel::kind)
      .def_readonly("branch", &SpectrumLevel::branch)
      .def("__repr__", [](const SpectrumLevel& l) {
        return "SpectrumLevel(energy=" + format_double(l.energy) + ", closed_weight=" + format_double(l.closed_weight) + ")";
      });
  py::class_<SpectrumPoint>(m, "SpectrumPoint")
      .def_readonly("B", &SpectrumPoint::B)
      .def_readonly("levels", &SpectrumPoint::levels);
  m.def("spectrum_at", [](const FeshbachModel& f, double B, double lo, double hi) {
    return spectrum_at(f, B, {lo, hi});
  }, py::arg("model"), py::arg("B"), py::arg("lo"), py::arg("hi"));
  m.def("spectrum_scan", [](const FeshbachModel& f, const std::vector<double>& grid, double lo, double hi) {
    py::gil_scoped_release release;
    return spectrum_scan(f, grid, {lo, hi});
  }, py::arg("model"), py::arg("B_grid"), py::arg("lo"), py::arg("hi"));

  py::class_<PulseSpec>(m, "PulseSpec")
      .def(py::init<>())
      .def_readwrite("omega0", &PulseSpec::omega0)
      .def_readwrite("tau", &PulseSpec::tau)
      .def_readwrite("omega_max", &PulseSpec::omega_max)
      .def_readwrite("freqs", &PulseSpec::freqs)
      .def_readwrite("a", &PulseSpec::a)
      .def_readwrite("b", &PulseSpec::b)
      .def("__call__", &PulseSpec::operator());
  m.def("base_pulse", &base_pulse, py::arg("t"), py::arg("omega0"), py::arg("tau"));
  m.def("crab_pulse", &crab_pulse, py::arg("t"), py::arg("spec"));
  m.def("randomize_frequencies", &randomize_frequencies, py::arg("n_modes"), py::arg("tau"), py::arg("seed"));
  m.def("load_pulse_record", [](const std::filesystem::path& p) { return load_pulse_record(p); }, py::arg("path"));

  py::class_<GateSettings>(m, "GateSettings")
      .def(py::init<>())
      .def_readwrite("B", &GateSettings::B)
      .def_readwrite("k", &GateSettings::k)
      .def_readwrite("delta", &GateSettings::delta)
      .def_readwrite("auto_delta", &GateSettings::auto_delta)
      .def_readwrite("excited_state", &GateSettings::excited_state)
      .def_readwrite("min_gap", &GateSettings::min_gap)
      .def_readwrite("tau", &GateSettings::tau)
      .def_readwrite("n_steps", &GateSettings::n_steps)
      .def_readwrite("target_phase", &GateSettings::target_phase)
      .def_readwrite("leakage_cutoff", &GateSettings::leakage_cutoff);
  py::class_<GateProblem>(m, "GateProblem")
      .def_readonly("settings", &GateProblem::settings)
      .def_readonly("excited_state", &GateProblem::excited_state)
      .def_property_readonly("delta", [](const GateProblem& p) { return p.drive.delta; })
      .def_property_readonly("dims", [](const GateProblem& p) { return py::make_tuple(p.sym.dim(), p.anti.dim()); });
  m.def("build_gate_problem", &build_gate_problem, py::arg("model"), py::arg("settings"));
  m.def("run_gate", [](const GateProblem& p, const PulseSpec& pulse) {
    py::gil_scoped_release release;
    const GateResult r = run_gate(p, [&](double t) { return pulse(t); });
    py::gil_scoped_acquire acquire;
    return fidelity_dict(r);
  }, py::arg("problem"), py::arg("pulse"));

  py::class_<CrabOptions>(m, "CrabOptions")
      .def(py::init<>())
      .def_readwrite("n_modes", &CrabOptions::n_modes)
      .def_readwrite("restarts", &CrabOptions::restarts)
      .def_readwrite("max_evals", &CrabOptions::max_evals)
      .def_readwrite("initial_step", &CrabOptions::initial_step)
      .def_readwrite("leak_weight", &CrabOptions::leak_weight)
      .def_readwrite("target_fidelity", &CrabOptions::target_fidelity)
      .def_readwrite("phase_tolerance", &CrabOptions::phase_tolerance)
      .def_readwrite("seed", &CrabOptions::seed);
  py::class_<OptimizationReport>(m, "OptimizationReport")
      .def_readonly("best", &OptimizationReport::best)
      .def_readonly("best_fidelity", &OptimizationReport::best_fidelity)
      .def_readonly("best_leakage", &OptimizationReport::best_leakage)
      .def_readonly("best_phase_difference", &OptimizationReport::best_phase_difference)
      .def_readonly("fidelity_history", &OptimizationReport::fidelity_history)
      .def_readonly("best_history", &OptimizationReport::best_history)
      .def_readonly("evaluations", &OptimizationReport::evaluations)
      .def_readonly("seed", &OptimizationReport::seed)
      .def_readonly("converged", &OptimizationReport::converged);
  m.def("optimize", [](const GateProblem& p, const PulseSpec& start, const CrabOptions& o) {
    py::gil_scoped_release release;
    return optimize(p, start, o);
  }, py::arg("problem"), py::arg("start"), py::arg("options"));

  py::class_<RunConfig>(m, "RunConfig")
      .def_readonly("seed", &RunConfig::seed)
      .def_readonly("trap", &RunConfig::trap)
      .def_readonly("feshbach", &RunConfig::feshbach)
      .def_readonly("gate", &RunConfig::gate)
      .def_readonly("B_grid", &RunConfig::B_grid)
      .def_property_readonly("job", [](const RunConfig& c) { return std::string(job_name(c.job)); })
      .def_property_readonly("config_hash", [](const RunConfig& c) { return fnv1a_hex(c.canonical); });
  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("run_job", [](const RunConfig& c, const std::filesystem::path& out) {
    py::gil_scoped_release release;
    return run_job(c, out).files;
  }, py::arg("config"), py::arg("out_dir"));
}
