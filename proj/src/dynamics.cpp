#include "fbgate/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <future>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "fbgate/errors.hpp"

namespace fbgate {

const char* sector_name(Sector s) { return s == Sector::Symmetric ? "symmetric" : "antisymmetric"; }

std::string SectorHamiltonian::label(int index) const {
  std::ostringstream out;
  if (index < dim_open)
    out << "pair_" << pairs[index].i << '_' << pairs[index].j;
  else
    out << "mol_" << index - dim_open;
  return out.str();
}

Eigen::MatrixXcd SectorHamiltonian::drive() const {
  Eigen::MatrixXcd d(dim(), dim());
  d.real() = drive_re;
  d.imag() = drive_im;
  return d;
}

Eigen::VectorXcd TwoParticleState::flat() const {
  Eigen::VectorXcd v(open.size() + closed.size());
  v << open, closed;
  return v;
}

TwoParticleState TwoParticleState::from_flat(const SectorHamiltonian& h, const Eigen::VectorXcd& v) {
  if (v.size() != h.dim()) throw Error("state dimension does not match the sector");
  return {v.head(h.dim_open), v.tail(h.dim_closed)};
}

double TwoParticleState::norm() const {
  return std::sqrt(open.squaredNorm() + closed.squaredNorm());
}

SectorHamiltonian assemble_sector(Sector symmetry, const FeshbachModel& model, double B, double k) {
  const int np = model.tensor.n_pair();
  const int nm = symmetry == Sector::Symmetric ? model.tensor.n_mol() : 0;
  if (np < 2 || np > model.basis.size()) throw Error("assemble_sector: inconsistent pair truncation");
  if (nm > model.mol.size()) throw Error("assemble_sector: inconsistent molecular truncation");

  SectorHamiltonian h;
  h.symmetry = symmetry;
  for (int i = 0; i < np; ++i)
    for (int j = symmetry == Sector::Symmetric ? i : i + 1; j < np; ++j) h.pairs.push_back({i, j});
  h.dim_open = static_cast<int>(h.pairs.size());
  h.dim_closed = nm;
  const int n = h.dim();

  const auto& eps = model.basis.energies;
  h.h0 = Eigen::MatrixXd::Zero(n, n);
  h.pair_energy.resize(h.dim_open);
  for (int a = 0; a < h.dim_open; ++a) {
    const auto [i, j] = h.pairs[a];
    h.pair_energy(a) = eps(i) + eps(j);
    h.h0(a, a) = h.pair_energy(a);
    for (int q = 0; q < nm; ++q) {
      const double c = (i == j ? 1.0 : std::sqrt(2.0)) * model.tensor(q, i, j);
      h.h0(a, h.dim_open + q) = h.h0(h.dim_open + q, a) = c;
    }
  }
  for (int q = 0; q < nm; ++q) h.h0(h.dim_open + q, h.dim_open + q) = model.mol.energies(q) + model.cfg.detuning(B);

  // <S_ij| d(x) 1 + 1 d(x) |S_kl> = 2 c_ij c_kl (<ij|D|kl> +/- <ij|D|lk>), with
  // <ij|D|kl> = d_ik delta_jl + delta_ik d_jl and c = 1/sqrt(2) (1/2 on the diagonal).
  const Eigen::MatrixXcd d = franck_condon_matrix(model.basis, k, np);
  const double sign = symmetry == Sector::Symmetric ? 1.0 : -1.0;
  auto product = [&](int i, int j, int k2, int l) {
    std::complex<double> v = 0.0;
    if (j == l) v += d(i, k2);
    if (i == k2) v += d(j, l);
    return v;
  };
  Eigen::MatrixXcd drive = Eigen::MatrixXcd::Zero(n, n);
  for (int a = 0; a < h.dim_open; ++a)
    for (int b = 0; b < h.dim_open; ++b) {
      const auto [i, j] = h.pairs[a];
      const auto [k2, l] = h.pairs[b];
      const double ca = i == j ? 0.5 : std::sqrt(0.5);
      const double cb = k2 == l ? 0.5 : std::sqrt(0.5);
      drive(a, b) = 2.0 * ca * cb * (product(i, j, k2, l) + sign * product(i, j, l, k2));
    }
  h.drive_re = drive.real();
  h.drive_im = drive.imag();
  h.drive_norm = h.dim_open > 0 ? Eigen::JacobiSVD<Eigen::MatrixXcd>(drive).singularValues()(0) : 0.0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.h0, Eigen::EigenvaluesOnly);
  h.spectrum = es.eigenvalues();
  return h;
}

TwoParticleState symmetrized_state(const SectorHamiltonian& h, const Eigen::VectorXd& a,
                                   const Eigen::VectorXd& b) {
  const int np = h.symmetry == Sector::Symmetric ? h.pairs.back().i + 1 : h.pairs.back().j + 1;
  if (a.size() < np || b.size() < np) throw Error("symmetrized_state: vectors shorter than the pair basis");
  const double sign = h.symmetry == Sector::Symmetric ? 1.0 : -1.0;
  TwoParticleState s{Eigen::VectorXcd::Zero(h.dim_open), Eigen::VectorXcd::Zero(h.dim_closed)};
  for (int q = 0; q < h.dim_open; ++q) {
    const auto [i, j] = h.pairs[q];
    // product amplitude C_ij = a_i b_j + sign a_j b_i; |ij_S> carries sqrt(2) C_ij for i < j
    const double c = a(i) * b(j) + sign * a(j) * b(i);
    s.open(q) = i == j ? 0.5 * c : std::sqrt(0.5) * c;
  }
  const double norm = s.norm();
  if (!(norm > 1e-12)) throw Error("symmetrized_state: state vanishes in this sector");
  s.open /= norm;
  return s;
}

TwoParticleState localized_pair_state(const SectorHamiltonian& h, const SingleParticleBasis& basis) {
  const LocalizedPair lr = localized_states(basis);
  const Eigen::VectorXd left = basis.coeffs.transpose() * lr.left;
  const Eigen::VectorXd right = basis.coeffs.transpose() * lr.right;
  return symmetrized_state(h, left, right);
}

namespace {

// Complex vector held as separate real and imaginary parts so that the real generator acts
// through two plain matrix-vector products.
struct Block {
  Eigen::VectorXd re;
  Eigen::VectorXd im;

  explicit Block(int n = 0) : re(n), im(n) {}
  double squared_norm() const { return re.squaredNorm() + im.squaredNorm(); }
};

// v <- exp(-i X) v for real symmetric X, Taylor series truncated once terms drop below 1e-17.
void apply_exponential(const Eigen::MatrixXd& X, Block& v, Block& term, Block& next) {
  term.re = v.re;
  term.im = v.im;
  for (int m = 1; m <= 60; ++m) {
    next.re.noalias() = X * term.re;
    next.im.noalias() = X * term.im;
    // multiply by -i / m: (re, im) -> (im, -re) / m
    const double inv = 1.0 / m;
    term.re = inv * next.im;
    term.im = -inv * next.re;
    v.re += term.re;
    v.im += term.im;
    if (std::max(term.re.cwiseAbs().maxCoeff(), term.im.cwiseAbs().maxCoeff()) < 1e-17) return;
  }
  throw PropagationError("Taylor exponential did not converge; step too large");
}

struct Stepping {
  const SectorHamiltonian& h;
  const PulseFn& pulse;
  const DriveConfig& drive;
  double shift;
  Eigen::MatrixXd h0s;  // h0 - shift
  Eigen::MatrixXd X;
  Block term, next;

  Stepping(const SectorHamiltonian& ham, const PulseFn& p, const DriveConfig& d)
      : h(ham), pulse(p), drive(d) {
    shift = 0.5 * (h.spectrum(0) + h.spectrum(h.spectrum.size() - 1));
    h0s = h.h0;
    h0s.diagonal().array() -= shift;
    X.resize(h.dim(), h.dim());
    term = Block(h.dim());
    next = Block(h.dim());
  }

  // X = h * [w0 (h0 - shift) + cA Re D - cB Im D]
  void build(double dt, double w0, double cA, double cB) {
    X.noalias() = (dt * w0) * h0s;
    X.noalias() += (dt * cA) * h.drive_re;
    X.noalias() -= (dt * cB) * h.drive_im;
  }

  void cf4(double t, double dt, Block& v) {
    static const double s3 = std::sqrt(3.0) / 6.0;
    const double a1 = 0.25 + s3, a2 = 0.25 - s3;
    const double t1 = t + (0.5 - s3) * dt, t2 = t + (0.5 + s3) * dt;
    const double o1 = pulse(t1), o2 = pulse(t2);
    const double th1 = drive.delta * t1 + drive.phase0, th2 = drive.delta * t2 + drive.phase0;
    const double c1 = o1 * std::cos(th1), c2 = o2 * std::cos(th2);
    const double s1 = o1 * std::sin(th1), s2 = o2 * std::sin(th2);
    build(dt, 0.5, a1 * c1 + a2 * c2, a1 * s1 + a2 * s2);
    apply_exponential(X, v, term, next);
    build(dt, 0.5, a2 * c1 + a1 * c2, a2 * s1 + a1 * s2);
    apply_exponential(X, v, term, next);
  }

  void midpoint(double t, double dt, Block& v) {
    const double tm = t + 0.5 * dt;
    const double o = pulse(tm);
    const double th = drive.delta * tm + drive.phase0;
    build(dt, 1.0, o * std::cos(th), o * std::sin(th));
    apply_exponential(X, v, term, next);
  }
};

Eigen::VectorXcd to_complex(const Block& v, double shift, double t) {
  const std::complex<double> phase = std::polar(1.0, -shift * t);
  Eigen::VectorXcd out(v.re.size());
  for (Eigen::Index i = 0; i < v.re.size(); ++i) out(i) = phase * std::complex<double>(v.re(i), v.im(i));
  return out;
}

double leaked(const SectorHamiltonian& h, const Block& v, double cutoff) {
  double sum = 0.0;
  for (int a = 0; a < h.dim_open; ++a)
    if (h.pair_energy(a) > cutoff) sum += v.re(a) * v.re(a) + v.im(a) * v.im(a);
  return sum;
}

Propagation run(const SectorHamiltonian& h, const PulseFn& pulse, const DriveConfig& drive,
                const TwoParticleState& init, const PropagationOptions& opts, int n_steps,
                Stepper stepper, bool record) {
  Stepping s(h, pulse, drive);
  const double dt = opts.tau / n_steps;
  Block v(h.dim());
  const Eigen::VectorXcd start = init.flat();
  v.re = start.real();
  v.im = start.imag();
  const double n0 = std::sqrt(v.squared_norm());

  Propagation out;
  out.max_leakage = leaked(h, v, opts.leakage_cutoff);
  if (record && opts.sample_stride > 0) out.trajectory.push_back({0.0, to_complex(v, s.shift, 0.0)});
  for (int step = 0; step < n_steps; ++step) {
    const double t = step * dt;
    if (stepper == Stepper::CommutatorFree4)
      s.cf4(t, dt, v);
    else
      s.midpoint(t, dt, v);
    out.max_leakage = std::max(out.max_leakage, leaked(h, v, opts.leakage_cutoff));
    const bool last = step + 1 == n_steps;
    if (record && opts.sample_stride > 0 && ((step + 1) % opts.sample_stride == 0 || last)) {
      const double tn = last ? opts.tau : (step + 1) * dt;
      out.trajectory.push_back({tn, to_complex(v, s.shift, tn)});
    }
  }
  out.norm_drift = std::abs(std::sqrt(v.squared_norm()) - n0);
  if (out.norm_drift > 1e-8) {
    std::ostringstream msg;
    msg << "norm drifted by " << out.norm_drift << " over " << n_steps << " steps";
    throw PropagationError(msg.str());
  }
  out.final = TwoParticleState::from_flat(h, to_complex(v, s.shift, opts.tau));
  return out;
}

}  // namespace

Propagation propagate(const SectorHamiltonian& h, const PulseFn& pulse, const DriveConfig& drive,
                      const TwoParticleState& init, const PropagationOptions& opts) {
  if (!(opts.tau > 0.0) || opts.n_steps < 1) throw PropagationError("propagate: need tau > 0 and n_steps >= 1");
  if (init.open.size() != h.dim_open || init.closed.size() != h.dim_closed)
    throw PropagationError("propagate: initial state does not match the sector");
  if (std::abs(init.norm() - 1.0) > 1e-10) throw PropagationError("propagate: initial state not normalized");

  // Step-size guard on the drive term, sampled at the quadrature nodes of the coarsest grid.
  const double dt = opts.tau / opts.n_steps;
  double peak = 0.0;
  static const double s3 = std::sqrt(3.0) / 6.0;
  for (int step = 0; step < opts.n_steps; ++step)
    for (double f : {0.5 - s3, 0.5, 0.5 + s3}) peak = std::max(peak, std::abs(pulse((step + f) * dt)));
  if (dt * peak * h.drive_norm >= 0.1) {
    std::ostringstream msg;
    msg << "step too large: dt*max|Omega|*||D|| = " << dt * peak * h.drive_norm << " >= 0.1";
    throw PropagationError(msg.str());
  }

  if (opts.stepper == Stepper::CommutatorFree4) return run(h, pulse, drive, init, opts, opts.n_steps, opts.stepper, true);

  Propagation coarse = run(h, pulse, drive, init, opts, opts.n_steps, opts.stepper, false);
  Propagation fine = run(h, pulse, drive, init, opts, 2 * opts.n_steps, opts.stepper, true);
  // The extrapolated state is not exactly unitary; renormalize so overlaps stay comparable.
  Eigen::VectorXcd combined = (4.0 * fine.final.flat() - coarse.final.flat()) / 3.0;
  combined.normalize();
  fine.final = TwoParticleState::from_flat(h, combined);
  fine.norm_drift = std::max(fine.norm_drift, coarse.norm_drift);
  fine.max_leakage = std::max(fine.max_leakage, coarse.max_leakage);
  return fine;
}

FidelityResult gate_fidelity(const TwoParticleState& final_s, const TwoParticleState& final_a,
                             const TwoParticleState& init_s, const TwoParticleState& init_a,
                             double target_phase) {
  for (const auto* s : {&final_s, &final_a, &init_s, &init_a})
    if (std::abs(s->norm() - 1.0) > 1e-6) throw Error("gate_fidelity: states must be normalized");
  const std::complex<double> os = init_s.flat().dot(final_s.flat());
  const std::complex<double> oa = init_a.flat().dot(final_a.flat());
  FidelityResult r;
  r.return_population_s = std::norm(os);
  r.return_population_a = std::norm(oa);
  r.fidelity = std::clamp(std::norm(0.5 * (os * std::polar(1.0, -target_phase) + oa)), 0.0, 1.0);
  r.phases_defined = std::abs(os) > 1e-12 && std::abs(oa) > 1e-12;
  if (r.phases_defined) {
    r.phi_s = std::arg(os);
    r.phi_a = std::arg(oa);
  }
  return r;
}

double leakage(const SectorHamiltonian& h, const std::vector<Sample>& trajectory, double cutoff) {
  if (trajectory.empty()) throw Error("leakage: empty trajectory");
  double peak = 0.0;
  for (const auto& s : trajectory) {
    double sum = 0.0;
    for (int a = 0; a < h.dim_open; ++a)
      if (h.pair_energy(a) > cutoff) sum += std::norm(s.amplitudes(a));
    peak = std::max(peak, sum);
  }
  return peak;
}

int select_excited_state(const SingleParticleBasis& basis, double k, double min_gap, int search_limit) {
  const int limit = std::min(search_limit, basis.size() - 1);
  const Eigen::MatrixXcd f = franck_condon_matrix(basis, k, limit + 1);
  const LocalizedPair lr = localized_states(basis);
  const Eigen::VectorXd left = basis.coeffs.leftCols(limit + 1).transpose() * lr.left;
  const Eigen::VectorXcd eta = f * left;
  int best = -1;
  double best_value = -1.0;
  for (int e = 2; e < limit; ++e) {
    const double gap = std::min(basis.energies(e) - basis.energies(e - 1),
                                basis.energies(e + 1) - basis.energies(e));
    if (gap > min_gap && std::abs(eta(e)) > best_value) {
      best = e;
      best_value = std::abs(eta(e));
    }
  }
  if (best < 0) throw Error("select_excited_state: no state satisfies the gap condition");
  return best;
}

GateProblem build_gate_problem(const FeshbachModel& model, const GateSettings& settings) {
  GateProblem p;
  p.settings = settings;
  p.sym = assemble_sector(Sector::Symmetric, model, settings.B, settings.k);
  p.anti = assemble_sector(Sector::Antisymmetric, model, settings.B, settings.k);
  p.init_s = localized_pair_state(p.sym, model.basis);
  p.init_a = localized_pair_state(p.anti, model.basis);
  const int np = model.tensor.n_pair();
  p.excited_state = settings.excited_state >= 0
                        ? settings.excited_state
                        : select_excited_state(model.basis, settings.k, settings.min_gap, np);
  if (p.excited_state >= np) throw Error("build_gate_problem: excited state outside the pair basis");
  const auto& eps = model.basis.energies;
  p.drive.delta = settings.auto_delta ? eps(p.excited_state) - 0.5 * (eps(0) + eps(1)) : settings.delta;
  p.drive.phase0 = 0.0;
  return p;
}

GateResult run_gate(const GateProblem& problem, const PulseFn& pulse, int sample_stride) {
  PropagationOptions opts;
  opts.tau = problem.settings.tau;
  opts.n_steps = problem.settings.n_steps;
  opts.stepper = problem.settings.stepper;
  opts.sample_stride = sample_stride;
  opts.leakage_cutoff = problem.settings.leakage_cutoff;
  auto sym = std::async(std::launch::async, [&] {
    return propagate(problem.sym, pulse, problem.drive, problem.init_s, opts);
  });
  Propagation anti = propagate(problem.anti, pulse, problem.drive, problem.init_a, opts);
  Propagation s = sym.get();
  GateResult r;
  r.fidelity = gate_fidelity(s.final, anti.final, problem.init_s, problem.init_a, problem.settings.target_phase);
  r.max_leakage = std::max(s.max_leakage, anti.max_leakage);
  r.norm_drift = std::max(s.norm_drift, anti.norm_drift);
  r.trajectory_s = std::move(s.trajectory);
  r.trajectory_a = std::move(anti.trajectory);
  return r;
}

}  // namespace fbgate
