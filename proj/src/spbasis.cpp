#include "fbgate/spbasis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fbgate/errors.hpp"
#include "fbgate/quadrature.hpp"

namespace fbgate {

void TrapConfig::validate() const {
  std::vector<std::string> bad;
  if (!(omega > 0.0) || !std::isfinite(omega)) bad.push_back("trap.omega must be positive");
  if (!(b >= 0.0) || !std::isfinite(b)) bad.push_back("trap.b must be finite and >= 0");
  if (!(d > 0.0) || !std::isfinite(d)) bad.push_back("trap.d must be finite and > 0");
  if (n_basis < 4) bad.push_back("trap.n_basis must be >= 4");
  if (!(mass > 0.0)) bad.push_back("trap.mass must be positive");
  if (!(omega_perp_ratio > 0.0)) bad.push_back("trap.omega_perp_ratio must be positive");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

namespace {

constexpr double kQuadratureTolerance = 1e-12;
constexpr int kMaxDoublings = 5;

void require_finite(double b, double d) {
  if (!std::isfinite(b) || !std::isfinite(d)) throw Error("barrier parameters must be finite");
  if (!(d > 0.0)) throw Error("barrier width must be positive");
}

// Integral of psi_m psi_n * amplitude * exp(-u^2 / 2 w^2) for all m, n < n_basis at one order.
Eigen::MatrixXd barrier_at_order(int n_basis, double amplitude, double width, int order) {
  const double c = 1.0 + 1.0 / (2.0 * width * width);
  const auto rule = scaled_gauss_hermite(order, c);
  const Eigen::MatrixXd psi = hermite_functions(n_basis, rule.nodes);
  Eigen::VectorXd w(order);
  for (int q = 0; q < order; ++q) {
    const double u = rule.nodes(q);
    w(q) = rule.weights(q) * amplitude * std::exp(-u * u / (2.0 * width * width));
  }
  Eigen::MatrixXd v = psi * w.asDiagonal() * psi.transpose();
  for (int m = 0; m < n_basis; ++m)
    for (int n = 0; n < n_basis; ++n)
      if ((m + n) % 2 == 1) v(m, n) = 0.0;
  return 0.5 * (v + v.transpose());
}

template <typename Matrix, typename Builder>
Matrix doubled_until_stable(int start_order, double tolerance, Builder&& build) {
  int order = start_order;
  Matrix current = build(order);
  double change = 0.0;
  for (int i = 0; i < kMaxDoublings; ++i) {
    order *= 2;
    Matrix next = build(order);
    const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
    change = (next - current).cwiseAbs().maxCoeff();
    if (change <= tolerance * scale) return next;
    current = std::move(next);
  }
  throw ConvergenceError("Gauss-Hermite quadrature did not stabilize", change);
}

}  // namespace

Eigen::MatrixXd gaussian_barrier_matrix(int n_basis, double amplitude, double width) {
  require_finite(amplitude, width);
  if (amplitude == 0.0) return Eigen::MatrixXd::Zero(n_basis, n_basis);
  return doubled_until_stable<Eigen::MatrixXd>(n_basis + 8, kQuadratureTolerance, [&](int order) {
    return barrier_at_order(n_basis, amplitude, width, order);
  });
}

double barrier_matrix_element(int m, int n, double b, double d) {
  require_finite(b, d);
  if (m < 0 || n < 0) throw Error("oscillator indices must be non-negative");
  if ((m + n) % 2 == 1 || b == 0.0) return 0.0;
  const int size = std::max(m, n) + 1;
  const double amplitude = b / (std::sqrt(2.0 * units::kPi) * d);
  const Eigen::MatrixXd v = doubled_until_stable<Eigen::MatrixXd>(
      (m + n) / 2 + 8, kQuadratureTolerance,
      [&](int order) { return barrier_at_order(size, amplitude, d, order); });
  return v(m, n);
}

Eigen::MatrixXd position_matrix(int n_basis) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n_basis, n_basis);
  for (int n = 0; n + 1 < n_basis; ++n) x(n, n + 1) = x(n + 1, n) = std::sqrt((n + 1) / 2.0);
  return x;
}

Eigen::MatrixXcd plane_wave_matrix(int n_basis, double k) {
  if (!std::isfinite(k)) throw Error("wavenumber must be finite");
  auto build = [&](int order) {
    const auto& rule = gauss_hermite(order);
    const Eigen::MatrixXd psi = hermite_functions(n_basis, rule.nodes);
    Eigen::VectorXd wc(order), ws(order);
    for (int q = 0; q < order; ++q) {
      wc(q) = rule.weights(q) * std::cos(k * rule.nodes(q));
      ws(q) = rule.weights(q) * std::sin(k * rule.nodes(q));
    }
    Eigen::MatrixXd re = psi * wc.asDiagonal() * psi.transpose();
    Eigen::MatrixXd im = psi * ws.asDiagonal() * psi.transpose();
    for (int m = 0; m < n_basis; ++m)
      for (int n = 0; n < n_basis; ++n) ((m + n) % 2 == 1 ? re : im)(m, n) = 0.0;
    Eigen::MatrixXcd out(n_basis, n_basis);
    out.real() = 0.5 * (re + re.transpose());
    out.imag() = 0.5 * (im + im.transpose());
    return out;
  };
  return doubled_until_stable<Eigen::MatrixXcd>(n_basis + 16, kQuadratureTolerance, build);
}

SingleParticleBasis diagonalize_barrier_oscillator(int n_basis, double hw, double amplitude,
                                                   double width) {
  Eigen::MatrixXd h = gaussian_barrier_matrix(n_basis, amplitude, width);
  for (int n = 0; n < n_basis; ++n) h(n, n) += hw * (n + 0.5);

  struct Level {
    double energy;
    int parity;
    Eigen::VectorXd coeffs;
  };
  std::vector<Level> levels;
  for (int p = 0; p < 2; ++p) {
    std::vector<int> idx;
    for (int n = p; n < n_basis; n += 2) idx.push_back(n);
    const int m = static_cast<int>(idx.size());
    Eigen::MatrixXd block(m, m);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) block(r, c) = h(idx[r], idx[c]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(block);
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd full = Eigen::VectorXd::Zero(n_basis);
      for (int r = 0; r < m; ++r) full(idx[r]) = solver.eigenvectors()(r, j);
      Eigen::Index arg;
      full.cwiseAbs().maxCoeff(&arg);
      if (full(arg) < 0.0) full = -full;
      levels.push_back({solver.eigenvalues()(j), p == 0 ? 1 : -1, std::move(full)});
    }
  }
  std::stable_sort(levels.begin(), levels.end(),
                   [](const Level& a, const Level& b) { return a.energy < b.energy; });

  SingleParticleBasis basis;
  basis.energies.resize(n_basis);
  basis.coeffs.resize(n_basis, n_basis);
  basis.parity.resize(n_basis);
  for (int i = 0; i < n_basis; ++i) {
    basis.energies(i) = levels[i].energy;
    basis.coeffs.col(i) = levels[i].coeffs;
    basis.parity(i) = levels[i].parity;
  }
  return basis;
}

SingleParticleBasis diagonalize_double_well(int n_basis, double b, double d) {
  return diagonalize_barrier_oscillator(n_basis, 1.0, b / (std::sqrt(2.0 * units::kPi) * d), d);
}

SingleParticleBasis solve_single_particle(const TrapConfig& cfg) {
  cfg.validate();
  SingleParticleBasis basis = diagonalize_double_well(cfg.n_basis, cfg.b, cfg.d);
  const SingleParticleBasis check = diagonalize_double_well(cfg.n_basis + 16, cfg.b, cfg.d);
  const int n = std::min(4, cfg.n_basis);
  basis.drift = (basis.energies.head(n) - check.energies.head(n)).cwiseAbs().maxCoeff();
  if (!(basis.drift < 1e-8)) {
    std::ostringstream msg;
    msg << "single-particle truncation not converged at n_basis=" << cfg.n_basis
        << " (drift " << basis.drift << " hbar*omega)";
    throw ConvergenceError(msg.str(), basis.drift);
  }
  basis.converged = true;
  return basis;
}

double position_expectation(const Eigen::VectorXd& coeffs) {
  double sum = 0.0;
  for (Eigen::Index n = 0; n + 1 < coeffs.size(); ++n)
    sum += 2.0 * std::sqrt((n + 1) / 2.0) * coeffs(n) * coeffs(n + 1);
  return sum;
}

LocalizedPair localized_states(const SingleParticleBasis& basis) {
  if (basis.size() < 2 || basis.parity(0) != 1 || basis.parity(1) != -1)
    throw Error("ground doublet must be even (lower) and odd (upper)");
  const Eigen::VectorXd even = basis.coeffs.col(0);
  const Eigen::VectorXd odd = basis.coeffs.col(1);
  LocalizedPair pair;
  pair.left = (even - odd) / std::sqrt(2.0);
  pair.right = (even + odd) / std::sqrt(2.0);
  if (position_expectation(pair.left) > 0.0) std::swap(pair.left, pair.right);
  pair.splitting = basis.energies(1) - basis.energies(0);
  return pair;
}

Eigen::MatrixXcd franck_condon_matrix(const SingleParticleBasis& basis, double k, int n_states) {
  if (n_states < 0 || n_states > basis.size()) throw Error("franck_condon: state count out of range");
  const Eigen::MatrixXcd plane = plane_wave_matrix(basis.size(), k);
  const Eigen::MatrixXd c = basis.coeffs.leftCols(n_states);
  Eigen::MatrixXcd out(n_states, n_states);
  out.real() = c.transpose() * plane.real() * c;
  out.imag() = c.transpose() * plane.imag() * c;
  return out;
}

std::complex<double> franck_condon(const SingleParticleBasis& basis, double k, int i, int j) {
  if (i < 0 || j < 0 || i >= basis.size() || j >= basis.size())
    throw Error("franck_condon: state index out of range");
  const Eigen::MatrixXcd plane = plane_wave_matrix(basis.size(), k);
  const Eigen::VectorXd ci = basis.coeffs.col(i);
  const Eigen::VectorXd cj = basis.coeffs.col(j);
  return {ci.dot(plane.real() * cj), ci.dot(plane.imag() * cj)};
}

}  // namespace fbgate
