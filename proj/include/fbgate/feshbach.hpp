#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fbgate/spbasis.hpp"

namespace fbgate {

/// Two-channel model parameters. Energies in hbar*omega, fields in Gauss.
struct FeshbachConfig {
  double alpha = 7.0;
  double s = 0.47;      // hbar*omega per Gauss
  double B0 = 202.1;    // Gauss
  double polarizability_ratio = 1.0;
  int n_mol = 12;
  int n_pair = 60;
  int n_mol_basis = 80;  // oscillator functions used to expand the molecular states

  double detuning(double B) const { return s * (B - B0); }
  void validate() const;
};

/// Eigenstates of the pointlike molecule: mass 2, potential 2 * ratio * V_DW(R). The oscillator
/// basis has frequency sqrt(ratio) and length 1 / sqrt(2 sqrt(ratio)) in a_ho.
struct MolecularSpectrum {
  Eigen::VectorXd energies;
  Eigen::MatrixXd coeffs;
  Eigen::VectorXi parity;
  double length = 1.0 / std::sqrt(2.0);
  bool converged = false;
  double drift = 0.0;

  int size() const { return static_cast<int>(energies.size()); }
};

/// V^k_ij = alpha * int phi_i phi_j Phi_k. All functions are real, so the tensor is real.
struct CouplingTensor {
  std::vector<Eigen::MatrixXd> v;  // v[k](i, j)

  int n_mol() const { return static_cast<int>(v.size()); }
  int n_pair() const { return v.empty() ? 0 : static_cast<int>(v.front().rows()); }
  double operator()(int k, int i, int j) const { return v[k](i, j); }
};

struct LevelWindow {
  double lo = -1e300;
  double hi = 1e300;
};

enum class LevelKind {
  Coupled,        // root of the closed-channel determinant
  Pinned,         // root lying within the merge tolerance of a pair energy
  UncoupledPair,  // symmetric pair combination orthogonal to every molecular state
  OddPair,        // antisymmetric pair combination, blind to the s-wave coupling
};

struct BoundLevels {
  std::vector<double> energies;       // coupled roots, ascending
  std::vector<double> closed_weight;  // sum_k |A_k|^2 for each coupled root
  std::vector<double> pinned;         // energies of roots hidden inside a pole
};

/// Everything the interacting problem needs, built once per trap and coupling.
struct FeshbachModel {
  FeshbachConfig cfg;
  SingleParticleBasis basis;
  MolecularSpectrum mol;
  CouplingTensor tensor;
};

struct SpectrumLevel {
  double energy;
  double closed_weight;
  LevelKind kind;
  int branch;  // continuation id across the B grid
};

struct SpectrumPoint {
  double B;
  std::vector<SpectrumLevel> levels;  // ascending in energy
};

MolecularSpectrum diagonalize_molecule(int n_basis, double b, double d, double ratio);

/// Throws ConvergenceError when the lowest four energies drift by 1e-8 or more against
/// n_mol_basis + 16.
MolecularSpectrum molecular_spectrum(const TrapConfig& trap, const FeshbachConfig& cfg);

/// Throws ConvergenceError if the quadrature does not stabilize.
CouplingTensor coupling_tensor(const SingleParticleBasis& basis, const MolecularSpectrum& mol,
                               double alpha, int n_pair, int n_mol);

FeshbachModel build_model(const TrapConfig& trap, const FeshbachConfig& cfg);

/// Closed-channel matrix M(E) = diag(E - E_k - nu) - sum_ij V_ij V_ij^T / (E - e_i - e_j).
Eigen::MatrixXd closed_channel_matrix(const FeshbachModel& model, double B, double E);

/// Roots of det M(E) = 0 in the window, by counting negative eigenvalues of M(E) and bisecting
/// to 1e-10 hbar*omega. Throws if a window endpoint sits on a pair energy.
BoundLevels bound_levels(const FeshbachModel& model, double B, const LevelWindow& window);

/// All levels of the interacting problem in the window at one field, unsorted branch ids.
SpectrumPoint spectrum_at(const FeshbachModel& model, double B, const LevelWindow& window);

/// Spectrum over a strictly increasing B grid. Points are solved in parallel and linked into
/// branches by nearest-energy continuation with closed-channel weight as the tie-break.
std::vector<SpectrumPoint> spectrum_scan(const FeshbachModel& model, const std::vector<double>& B_grid,
                                         const LevelWindow& window);

}  // namespace fbgate
