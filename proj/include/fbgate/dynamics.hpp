#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fbgate/feshbach.hpp"

namespace fbgate {

enum class Sector { Symmetric, Antisymmetric };

const char* sector_name(Sector s);

struct PairIndex {
  int i;
  int j;
};

/// Driven two-particle problem restricted to one exchange-symmetry sector. Open-channel states
/// are symmetrized pairs (i <= j) or antisymmetrized pairs (i < j) of single-particle
/// eigenstates; the symmetric sector appends the molecular states.
struct SectorHamiltonian {
  Sector symmetry = Sector::Symmetric;
  std::vector<PairIndex> pairs;
  int dim_open = 0;
  int dim_closed = 0;
  Eigen::MatrixXd h0;
  Eigen::MatrixXd drive_re;  // Re D, zero on the closed block
  Eigen::MatrixXd drive_im;  // Im D
  Eigen::VectorXd pair_energy;
  Eigen::VectorXd spectrum;  // eigenvalues of h0, ascending
  double drive_norm = 0.0;   // spectral norm of D

  int dim() const { return dim_open + dim_closed; }
  std::string label(int index) const;
  Eigen::MatrixXcd drive() const;
};

struct TwoParticleState {
  Eigen::VectorXcd open;
  Eigen::VectorXcd closed;

  Eigen::VectorXcd flat() const;
  static TwoParticleState from_flat(const SectorHamiltonian& h, const Eigen::VectorXcd& v);
  double norm() const;
};

/// Builds one sector from a model: open pairs from the lowest cfg.n_pair single-particle states,
/// molecular block from the lowest cfg.n_mol molecular states. k in 1/a_ho.
SectorHamiltonian assemble_sector(Sector symmetry, const FeshbachModel& model, double B, double k);

/// Two-particle state (a (x) b +/- b (x) a), normalized, with a and b given in the single-particle
/// eigenbasis (length >= n_pair; extra components must vanish).
TwoParticleState symmetrized_state(const SectorHamiltonian& h, const Eigen::VectorXd& a,
                                   const Eigen::VectorXd& b);

/// (|LR> + |RL>)/sqrt(2) for the symmetric sector, (|LR> - |RL>)/sqrt(2) for the antisymmetric.
TwoParticleState localized_pair_state(const SectorHamiltonian& h, const SingleParticleBasis& basis);

using PulseFn = std::function<double(double)>;

struct DriveConfig {
  double delta = 0.0;   // two-photon detuning, hbar*omega
  double phase0 = 0.0;  // drive phase at t = 0
};

enum class Stepper {
  CommutatorFree4,      // fourth-order commutator-free Magnus, two exponentials per step
  MidpointRichardson,   // exponential midpoint at n and 2n steps, combined to cancel h^2
};

struct PropagationOptions {
  double tau = 0.0;
  int n_steps = 0;
  Stepper stepper = Stepper::CommutatorFree4;
  int sample_stride = 0;         // 0 keeps no trajectory
  double leakage_cutoff = 1e300;  // pair energy above which population counts as leaked
};

struct Sample {
  double t;
  Eigen::VectorXcd amplitudes;  // sector basis, open then closed
};

struct Propagation {
  TwoParticleState final;
  std::vector<Sample> trajectory;
  double norm_drift = 0.0;
  double max_leakage = 0.0;
};

/// Solves i d/dt psi = [h0 + Omega(t) (Re D cos(delta t + phase0) - Im D sin(delta t + phase0))] psi
/// on [0, tau]. Throws PropagationError when dt * max|Omega| * ||D|| >= 0.1 or the norm drifts by
/// more than 1e-8; pulse evaluation errors propagate.
Propagation propagate(const SectorHamiltonian& h, const PulseFn& pulse, const DriveConfig& drive,
                      const TwoParticleState& init, const PropagationOptions& opts);

struct FidelityResult {
  double fidelity = 0.0;
  double phi_s = 0.0;
  double phi_a = 0.0;
  double return_population_s = 0.0;
  double return_population_a = 0.0;
  bool phases_defined = false;
};

/// f = |(<init_s|final_s> exp(-i target) + <init_a|final_a>) / 2|^2.
FidelityResult gate_fidelity(const TwoParticleState& final_s, const TwoParticleState& final_a,
                             const TwoParticleState& init_s, const TwoParticleState& init_a,
                             double target_phase);

/// Peak over samples of the population in open pairs with e_i + e_j > cutoff.
double leakage(const SectorHamiltonian& h, const std::vector<Sample>& trajectory, double cutoff);

/// Excited state with the largest |<E|exp(ikx)|L>| among states 2 .. search_limit-1 whose
/// distance to both neighbours exceeds min_gap.
int select_excited_state(const SingleParticleBasis& basis, double k, double min_gap, int search_limit);

struct GateSettings {
  double B = 201.0;
  double k = 0.0;               // 1/a_ho
  double delta = 0.0;           // used when auto_delta is false
  bool auto_delta = true;       // resonant with the ground doublet centre -> excited state
  int excited_state = -1;       // -1 selects automatically
  double min_gap = 0.2;
  double tau = 1300.0;
  int n_steps = 13000;
  Stepper stepper = Stepper::CommutatorFree4;
  double target_phase = 3.141592653589793;
  double leakage_cutoff = 20.0;
};

struct GateProblem {
  SectorHamiltonian sym;
  SectorHamiltonian anti;
  TwoParticleState init_s;
  TwoParticleState init_a;
  DriveConfig drive;
  GateSettings settings;
  int excited_state = -1;
};

struct GateResult {
  FidelityResult fidelity;
  double max_leakage = 0.0;
  double norm_drift = 0.0;
  std::vector<Sample> trajectory_s;
  std::vector<Sample> trajectory_a;
};

GateProblem build_gate_problem(const FeshbachModel& model, const GateSettings& settings);

/// Propagates both sectors (in parallel) and evaluates the combined fidelity and leakage.
GateResult run_gate(const GateProblem& problem, const PulseFn& pulse, int sample_stride = 0);

}  // namespace fbgate
