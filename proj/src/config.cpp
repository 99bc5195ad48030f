#include "fbgate/config.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "fbgate/errors.hpp"
#include "fbgate/units.hpp"

namespace fbgate {

using json = nlohmann::json;

const char* job_name(Job job) {
  switch (job) {
    case Job::Spectrum: return "spectrum";
    case Job::Gate: return "gate";
    case Job::Optimize: return "optimize";
  }
  return "?";
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

// Walks one JSON object, records which keys were read and reports the rest as unknown.
class Section {
 public:
  Section(const json* node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (node_ && !node_->is_object()) {
      errors_.push_back(path_ + " must be an object");
      node_ = nullptr;
    }
  }

  ~Section() {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it)
      if (!seen_.count(it.key())) errors_.push_back("unknown key " + where(it.key()));
  }

  bool present() const { return node_ != nullptr; }
  bool has(const std::string& key) const { return node_ && node_->contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return nullptr;
    return &(*node_)[key];
  }

  Section child(const std::string& key, bool required) {
    const json* n = raw(key);
    if (!n && required && node_) errors_.push_back("missing key " + where(key));
    return Section(n, where(key), errors_);
  }

  double number(const std::string& key, std::optional<double> fallback) {
    const json* n = raw(key);
    if (!n) {
      if (!fallback) errors_.push_back("missing key " + where(key));
      return fallback.value_or(0.0);
    }
    if (!n->is_number()) {
      errors_.push_back(where(key) + " must be a number");
      return fallback.value_or(0.0);
    }
    return n->get<double>();
  }

  long long integer(const std::string& key, std::optional<long long> fallback) {
    const json* n = raw(key);
    if (!n) {
      if (!fallback) errors_.push_back("missing key " + where(key));
      return fallback.value_or(0);
    }
    if (!n->is_number_integer()) {
      errors_.push_back(where(key) + " must be an integer");
      return fallback.value_or(0);
    }
    return n->get<long long>();
  }

  std::string text(const std::string& key, std::optional<std::string> fallback) {
    const json* n = raw(key);
    if (!n) {
      if (!fallback) errors_.push_back("missing key " + where(key));
      return fallback.value_or("");
    }
    if (!n->is_string()) {
      errors_.push_back(where(key) + " must be a string");
      return fallback.value_or("");
    }
    return n->get<std::string>();
  }

  // {"value": x, "unit": "..."}; returns the value and the unit string
  std::pair<double, std::string> quantity(const std::string& key, const std::string& default_unit,
                                          std::optional<double> fallback) {
    const json* n = raw(key);
    if (!n) {
      if (!fallback) errors_.push_back("missing key " + where(key));
      return {fallback.value_or(0.0), default_unit};
    }
    if (n->is_number()) return {n->get<double>(), default_unit};
    Section q(n, where(key), errors_);
    if (!q.present()) return {0.0, default_unit};
    const double v = q.number("value", std::nullopt);
    const std::string u = q.text("unit", std::nullopt);
    return {v, u};
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::vector<std::string>& errors() { return errors_; }

 private:
  const json* node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

double omega_from(const std::pair<double, std::string>& q, std::vector<std::string>& errors) {
  const auto& [v, u] = q;
  if (u == "2pi_MHz") return 2.0 * units::kPi * v * 1e6;
  if (u == "2pi_kHz") return 2.0 * units::kPi * v * 1e3;
  if (u == "2pi_Hz") return 2.0 * units::kPi * v;
  if (u == "rad_per_s") return v;
  errors.push_back("trap.omega: unknown unit '" + u + "' (2pi_MHz, 2pi_kHz, 2pi_Hz, rad_per_s)");
  return 1.0;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("malformed JSON: ") + e.what()});
  }
  std::vector<std::string> errors;
  RunConfig cfg;
  cfg.canonical = root.dump();
  {
    Section top(&root, "", errors);

    const std::string job = top.text("job", std::nullopt);
    if (job == "spectrum")
      cfg.job = Job::Spectrum;
    else if (job == "gate")
      cfg.job = Job::Gate;
    else if (job == "optimize")
      cfg.job = Job::Optimize;
    else if (!job.empty())
      errors.push_back("job must be one of spectrum, gate, optimize");

    const long long seed = top.integer("seed", 0);
    if (seed < 0) errors.push_back("seed must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(seed);

    const std::string species = top.text("species", "K40");
    const bool has_mass = top.has("mass_amu");
    const double mass_amu = top.number("mass_amu", units::kPotassium40Mass / units::kAtomicMassUnit);
    if (species != "K40" && !has_mass) errors.push_back("species '" + species + "' needs mass_amu");
    if (!(mass_amu > 0.0)) errors.push_back("mass_amu must be positive");
    cfg.trap.mass = mass_amu * units::kAtomicMassUnit;

    {
      Section trap = top.child("trap", true);
      if (trap.present()) {
        cfg.trap.omega = omega_from(trap.quantity("omega", "rad_per_s", std::nullopt), errors);
        cfg.trap.b = trap.number("b", std::nullopt);
        cfg.trap.d = trap.number("d", std::nullopt);
        cfg.trap.n_basis = static_cast<int>(trap.integer("n_basis", 60));
        cfg.trap.omega_perp_ratio = trap.number("omega_perp_ratio", 5.0);
      }
    }

    {
      Section f = top.child("feshbach", true);
      if (f.present()) {
        cfg.feshbach.alpha = f.number("alpha", std::nullopt);
        const auto [s, unit] = f.quantity("s", "hbar_omega_per_G", std::nullopt);
        if (unit == "hbar_omega_per_G")
          cfg.feshbach.s = s;
        else if (unit == "MHz_per_G")
          cfg.feshbach.s = units::frequency_to_hbar_omega(s * 1e6, cfg.trap.omega);
        else if (unit == "kHz_per_G")
          cfg.feshbach.s = units::frequency_to_hbar_omega(s * 1e3, cfg.trap.omega);
        else
          errors.push_back("feshbach.s: unknown unit '" + unit + "' (hbar_omega_per_G, MHz_per_G, kHz_per_G)");
        cfg.feshbach.B0 = f.number("B0", std::nullopt);
        cfg.feshbach.polarizability_ratio = f.number("polarizability_ratio", 1.0);
        cfg.feshbach.n_mol = static_cast<int>(f.integer("n_mol", 12));
        cfg.feshbach.n_pair = static_cast<int>(f.integer("n_pair", 60));
        cfg.feshbach.n_mol_basis = static_cast<int>(f.integer("n_mol_basis", 80));
      }
    }

    const bool has_b = top.has("B"), has_grid = top.has("B_grid");
    if (has_b && has_grid) errors.push_back("B and B_grid are mutually exclusive");
    if (has_b) cfg.B = top.number("B", std::nullopt);
    if (has_grid) {
      const json* g = top.raw("B_grid");
      if (g->is_array()) {
        for (const auto& v : *g) {
          if (!v.is_number()) {
            errors.push_back("B_grid entries must be numbers");
            break;
          }
          cfg.B_grid.push_back(v.get<double>());
        }
      } else {
        Section grid(g, "B_grid", errors);
        const double start = grid.number("start", std::nullopt);
        const double stop = grid.number("stop", std::nullopt);
        const long long points = grid.integer("points", std::nullopt);
        if (points < 2 || !(stop > start)) {
          errors.push_back("B_grid needs points >= 2 and stop > start");
        } else {
          for (long long i = 0; i < points; ++i)
            cfg.B_grid.push_back(start + (stop - start) * double(i) / double(points - 1));
        }
      }
    }

    if (top.has("window")) {
      Section w = top.child("window", false);
      cfg.window.lo = w.number("lo", std::nullopt);
      cfg.window.hi = w.number("hi", std::nullopt);
      if (!(cfg.window.lo < cfg.window.hi)) errors.push_back("window.lo must be below window.hi");
    }

    const double a_ho_nm = cfg.trap.omega > 0.0 && cfg.trap.mass > 0.0 ? cfg.trap.a_ho() * 1e9 : 1.0;
    if (top.has("drive")) {
      Section d = top.child("drive", false);
      const auto [k, unit] = d.quantity("k", "per_aho", std::nullopt);
      if (unit == "per_aho")
        cfg.gate.k = k;
      else if (unit == "per_nm")
        cfg.gate.k = k * a_ho_nm;
      else
        errors.push_back("drive.k: unknown unit '" + unit + "' (per_aho, per_nm)");
      const json* delta = d.raw("delta");
      if (!delta || (delta->is_string() && delta->get<std::string>() == "auto")) {
        cfg.gate.auto_delta = true;
      } else if (delta->is_number()) {
        cfg.gate.auto_delta = false;
        cfg.gate.delta = delta->get<double>();
      } else {
        errors.push_back("drive.delta must be \"auto\" or a number");
      }
      const json* ex = d.raw("excited_state");
      if (!ex || (ex->is_string() && ex->get<std::string>() == "auto"))
        cfg.gate.excited_state = -1;
      else if (ex->is_number_integer() && ex->get<int>() >= 2)
        cfg.gate.excited_state = ex->get<int>();
      else
        errors.push_back("drive.excited_state must be \"auto\" or an integer >= 2");
      cfg.gate.min_gap = d.number("min_gap", 0.2);
    } else if (cfg.job != Job::Spectrum) {
      errors.push_back("missing key drive");
    }

    if (top.has("pulse")) {
      Section p = top.child("pulse", false);
      cfg.pulse.omega0 = p.number("omega0", 2.0);
      const auto [tau, unit] = p.quantity("tau", "inv_omega", 1300.0);
      if (unit == "inv_omega")
        cfg.pulse.tau = tau;
      else if (unit == "us")
        cfg.pulse.tau = tau * 1e-6 * cfg.trap.omega;
      else
        errors.push_back("pulse.tau: unknown unit '" + unit + "' (inv_omega, us)");
      cfg.optimizer.n_modes = static_cast<int>(p.integer("n_modes", 6));
      cfg.pulse.omega_max = p.number("omega_max", 1.8);
      cfg.replay_path = p.text("replay", "");
    } else if (cfg.job != Job::Spectrum) {
      errors.push_back("missing key pulse");
    }
    cfg.gate.tau = cfg.pulse.tau;

    if (top.has("propagation")) {
      Section p = top.child("propagation", false);
      cfg.gate.n_steps = static_cast<int>(p.integer("n_steps", 48000));
      const std::string stepper = p.text("stepper", "cf4");
      if (stepper == "cf4")
        cfg.gate.stepper = Stepper::CommutatorFree4;
      else if (stepper == "midpoint_richardson")
        cfg.gate.stepper = Stepper::MidpointRichardson;
      else
        errors.push_back("propagation.stepper must be cf4 or midpoint_richardson");
      cfg.sample_stride = static_cast<int>(p.integer("sample_stride", 100));
      if (cfg.gate.n_steps < 1) errors.push_back("propagation.n_steps must be >= 1");
      if (cfg.sample_stride < 1) errors.push_back("propagation.sample_stride must be >= 1");
    } else {
      cfg.gate.n_steps = 48000;
    }

    if (top.has("optimizer")) {
      Section o = top.child("optimizer", false);
      cfg.optimizer.max_evals = static_cast<int>(o.integer("max_evals", 4000));
      cfg.optimizer.restarts = static_cast<int>(o.integer("restarts", 8));
      cfg.optimizer.leak_weight = o.number("leak_weight", 0.0);
      cfg.optimizer.target_fidelity = o.number("target_fidelity", 1.1);
      cfg.optimizer.initial_step = o.number("initial_step", 0.3);
      cfg.optimizer.phase_tolerance = o.number("phase_tolerance", 1e300);
      if (!(cfg.optimizer.phase_tolerance > 0.0)) errors.push_back("optimizer.phase_tolerance must be positive");
      cfg.optimizer.parallel_restarts = static_cast<int>(o.integer("parallel_restarts", 1));
      if (cfg.optimizer.max_evals < 1) errors.push_back("optimizer.max_evals must be >= 1");
      if (cfg.optimizer.restarts < 1) errors.push_back("optimizer.restarts must be >= 1");
      if (cfg.optimizer.leak_weight < 0.0) errors.push_back("optimizer.leak_weight must be >= 0");
    } else if (cfg.job == Job::Optimize) {
      errors.push_back("missing key optimizer");
    }

    cfg.gate.leakage_cutoff = top.number("leakage_cutoff", 20.0);
    cfg.gate.target_phase = top.number("target_phase", units::kPi);

    switch (cfg.job) {
      case Job::Spectrum:
        if (cfg.B_grid.empty() && !cfg.B) errors.push_back("spectrum job needs B or B_grid");
        if (!top.has("window")) errors.push_back("spectrum job needs window");
        if (cfg.B) cfg.B_grid = {*cfg.B};
        for (std::size_t i = 1; i < cfg.B_grid.size(); ++i)
          if (!(cfg.B_grid[i] > cfg.B_grid[i - 1])) {
            errors.push_back("B_grid must be strictly increasing");
            break;
          }
        break;
      case Job::Gate:
      case Job::Optimize:
        if (!cfg.B) errors.push_back(std::string(job_name(cfg.job)) + " job needs a scalar B");
        break;
    }
    if (cfg.B) cfg.gate.B = *cfg.B;
  }

  cfg.pulse.freqs.clear();
  cfg.optimizer.seed = cfg.seed;
  for (auto validate : {+[](const RunConfig& c) { c.trap.validate(); }, +[](const RunConfig& c) { c.feshbach.validate(); }}) {
    try {
      validate(cfg);
    } catch (const ConfigError& e) {
      errors.insert(errors.end(), e.violations().begin(), e.violations().end());
    }
  }
  if (cfg.job != Job::Spectrum) {
    if (cfg.pulse.omega_max <= 0.0) errors.push_back("pulse.omega_max must be positive");
    if (!(cfg.pulse.tau > 0.0)) errors.push_back("pulse.tau must be positive");
    if (cfg.optimizer.n_modes < 1) errors.push_back("pulse.n_modes must be >= 1");
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

}  // namespace fbgate
