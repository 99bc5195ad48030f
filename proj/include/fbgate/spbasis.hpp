#pragma once

#include <complex>

#include <Eigen/Dense>

#include "fbgate/units.hpp"

namespace fbgate {

/// Double-well trap: harmonic confinement of frequency omega plus a Gaussian barrier
/// (b / (sqrt(2 pi) d)) exp(-x^2 / 2 d^2). All quantities except omega and mass are in
/// oscillator units (energy hbar*omega, length a_ho).
struct TrapConfig {
  double omega = 2.0 * units::kPi * 5.0e6;  // rad/s
  double b = 36.0;
  double d = 1.5;
  int n_basis = 60;
  double omega_perp_ratio = 5.0;
  double mass = units::kPotassium40Mass;  // kg

  double a_ho() const { return units::oscillator_length(mass, omega); }
  void validate() const;
};

struct SingleParticleBasis {
  Eigen::VectorXd energies;  // ascending, hbar*omega
  Eigen::MatrixXd coeffs;    // column i = oscillator coefficients of psi_i
  Eigen::VectorXi parity;    // +1 even, -1 odd
  bool converged = false;
  double drift = 0.0;        // max |eps_n(N) - eps_n(N + 16)| over the lowest four levels

  int size() const { return static_cast<int>(energies.size()); }
};

struct LocalizedPair {
  Eigen::VectorXd left;
  Eigen::VectorXd right;
  double splitting = 0.0;
};

/// <m| (b / sqrt(2 pi) d) exp(-x^2 / 2 d^2) |n> in oscillator units.
double barrier_matrix_element(int m, int n, double b, double d);

/// Full matrix of a Gaussian barrier amplitude * exp(-u^2 / 2 w^2) in the oscillator basis of
/// size n_basis (u measured in the basis length). Gauss-Hermite order is doubled until the
/// matrix is stable to 1e-12.
Eigen::MatrixXd gaussian_barrier_matrix(int n_basis, double amplitude, double width);

/// Matrix of x in the oscillator basis (units of the basis length).
Eigen::MatrixXd position_matrix(int n_basis);

/// Matrix of exp(i k x) in the oscillator basis, k in inverse basis lengths.
Eigen::MatrixXcd plane_wave_matrix(int n_basis, double k);

/// Eigenstates of hw * (n + 1/2) + amplitude * exp(-u^2 / 2 width^2) in an oscillator basis,
/// solved per parity block. Each eigenvector has a positive largest-magnitude coefficient.
SingleParticleBasis diagonalize_barrier_oscillator(int n_basis, double hw, double amplitude,
                                                   double width);

/// Parity-blocked dense eigensolve of h = diag(n + 1/2) + barrier, without truncation check.
SingleParticleBasis diagonalize_double_well(int n_basis, double b, double d);

/// Eigenstates of the double well, with a truncation check against n_basis + 16.
/// Throws ConvergenceError when the lowest four energies drift by 1e-8 or more.
SingleParticleBasis solve_single_particle(const TrapConfig& cfg);

LocalizedPair localized_states(const SingleParticleBasis& basis);

double position_expectation(const Eigen::VectorXd& coeffs);

/// <psi_i| exp(i k x) |psi_j>, k in 1/a_ho.
std::complex<double> franck_condon(const SingleParticleBasis& basis, double k, int i, int j);

/// Franck-Condon matrix restricted to the lowest n_states eigenstates.
Eigen::MatrixXcd franck_condon_matrix(const SingleParticleBasis& basis, double k, int n_states);

}  // namespace fbgate
