#include "fbgate/feshbach.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>

#include <Eigen/Eigenvalues>

#include "fbgate/errors.hpp"
#include "fbgate/quadrature.hpp"

namespace fbgate {

void FeshbachConfig::validate() const {
  std::vector<std::string> bad;
  if (!std::isfinite(alpha)) bad.push_back("feshbach.alpha must be finite");
  if (!std::isfinite(s)) bad.push_back("feshbach.s must be finite");
  if (!std::isfinite(B0)) bad.push_back("feshbach.B0 must be finite");
  if (!(polarizability_ratio > 0.0) || !std::isfinite(polarizability_ratio))
    bad.push_back("feshbach.polarizability_ratio must be > 0");
  if (n_mol < 2) bad.push_back("feshbach.n_mol must be >= 2");
  if (n_pair < 2) bad.push_back("feshbach.n_pair must be >= 2");
  if (n_mol_basis < n_mol) bad.push_back("feshbach.n_mol_basis must be >= n_mol");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

MolecularSpectrum diagonalize_molecule(int n_basis, double b, double d, double ratio) {
  const double freq = std::sqrt(ratio);
  const double length = 1.0 / std::sqrt(2.0 * freq);
  const double amplitude = 2.0 * ratio * b / (std::sqrt(2.0 * units::kPi) * d);
  SingleParticleBasis solved = diagonalize_barrier_oscillator(n_basis, freq, amplitude, d / length);
  MolecularSpectrum mol;
  mol.energies = std::move(solved.energies);
  mol.coeffs = std::move(solved.coeffs);
  mol.parity = std::move(solved.parity);
  mol.length = length;
  return mol;
}

MolecularSpectrum molecular_spectrum(const TrapConfig& trap, const FeshbachConfig& cfg) {
  trap.validate();
  cfg.validate();
  const double r = cfg.polarizability_ratio;
  MolecularSpectrum mol = diagonalize_molecule(cfg.n_mol_basis, trap.b, trap.d, r);
  const MolecularSpectrum check = diagonalize_molecule(cfg.n_mol_basis + 16, trap.b, trap.d, r);
  const int n = std::min(4, cfg.n_mol_basis);
  mol.drift = (mol.energies.head(n) - check.energies.head(n)).cwiseAbs().maxCoeff();
  if (!(mol.drift < 1e-8)) {
    std::ostringstream msg;
    msg << "molecular truncation not converged at n_mol_basis=" << cfg.n_mol_basis << " (drift "
        << mol.drift << " hbar*omega)";
    throw ConvergenceError(msg.str(), mol.drift);
  }
  if (cfg.n_mol > mol.size()) throw ConfigError({"feshbach.n_mol exceeds the molecular basis"});
  mol.converged = true;
  return mol;
}

CouplingTensor coupling_tensor(const SingleParticleBasis& basis, const MolecularSpectrum& mol,
                               double alpha, int n_pair, int n_mol) {
  if (n_pair > basis.size() || n_mol > mol.size() || n_pair < 1 || n_mol < 1)
    throw Error("coupling_tensor: truncation exceeds the available states");
  if (!std::isfinite(alpha)) throw Error("coupling_tensor: alpha must be finite");
  const double ell = mol.length;
  const double c = 1.0 + 1.0 / (2.0 * ell * ell);
  const int n_at = basis.size();
  const int n_mb = mol.size();
  const Eigen::MatrixXd at = basis.coeffs.leftCols(n_pair);
  const Eigen::MatrixXd mc = mol.coeffs.leftCols(n_mol);

  auto build = [&](int order) {
    const auto rule = scaled_gauss_hermite(order, c);
    const Eigen::MatrixXd phi = at.transpose() * hermite_functions(n_at, rule.nodes);
    const Eigen::MatrixXd big =
        mc.transpose() * hermite_functions(n_mb, rule.nodes / ell) / std::sqrt(ell);
    Eigen::MatrixXd stacked(n_mol * n_pair, n_pair);
    for (int k = 0; k < n_mol; ++k) {
      const Eigen::VectorXd w = alpha * rule.weights.cwiseProduct(big.row(k).transpose());
      stacked.middleRows(k * n_pair, n_pair) = phi * w.asDiagonal() * phi.transpose();
    }
    return stacked;
  };

  int order = n_at + n_mb / 2 + 8;
  Eigen::MatrixXd current = build(order);
  double change = 0.0;
  bool stable = false;
  for (int i = 0; i < 4 && !stable; ++i) {
    order *= 2;
    Eigen::MatrixXd next = build(order);
    change = (next - current).cwiseAbs().maxCoeff();
    stable = change <= 1e-12 * std::max(1.0, next.cwiseAbs().maxCoeff());
    current = std::move(next);
  }
  if (!stable) throw ConvergenceError("coupling tensor quadrature did not stabilize", change);

  CouplingTensor t;
  t.v.reserve(n_mol);
  for (int k = 0; k < n_mol; ++k) {
    Eigen::MatrixXd block = current.middleRows(k * n_pair, n_pair);
    t.v.push_back(0.5 * (block + block.transpose()));
  }
  return t;
}

FeshbachModel build_model(const TrapConfig& trap, const FeshbachConfig& cfg) {
  cfg.validate();
  FeshbachModel model;
  model.cfg = cfg;
  model.basis = solve_single_particle(trap);
  if (cfg.n_pair > model.basis.size())
    throw ConfigError({"feshbach.n_pair exceeds trap.n_basis"});
  model.mol = molecular_spectrum(trap, cfg);
  model.tensor = coupling_tensor(model.basis, model.mol, cfg.alpha, cfg.n_pair, cfg.n_mol);
  return model;
}

namespace {

// Pair energies e_i + e_j (i <= j) merged within a relative tolerance, each carrying
// G = sum over merged ordered pairs of V_ij V_ij^T.
struct Pole {
  double energy;
  Eigen::MatrixXd G;
  int multiplicity;  // number of unordered pairs i <= j merged here
  int rank;
};

double merge_tolerance(double p) { return 1e-9 * std::max(1.0, std::abs(p)); }

std::vector<Pole> build_poles(const FeshbachModel& model) {
  const auto& t = model.tensor;
  const int np = t.n_pair();
  const int nm = t.n_mol();
  struct Pair {
    double energy;
    int i, j;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < np; ++i)
    for (int j = i; j < np; ++j) pairs.push_back({model.basis.energies(i) + model.basis.energies(j), i, j});
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.energy < b.energy; });

  std::vector<Pole> poles;
  std::size_t start = 0;
  while (start < pairs.size()) {
    std::size_t end = start + 1;
    while (end < pairs.size() &&
           pairs[end].energy - pairs[end - 1].energy <= merge_tolerance(pairs[end].energy))
      ++end;
    Eigen::MatrixXd U(nm, static_cast<Eigen::Index>(end - start));
    double sum = 0.0;
    for (std::size_t q = start; q < end; ++q) {
      const double weight = pairs[q].i == pairs[q].j ? 1.0 : std::sqrt(2.0);
      for (int k = 0; k < nm; ++k) U(k, q - start) = weight * t(k, pairs[q].i, pairs[q].j);
      sum += pairs[q].energy;
    }
    Pole pole{sum / double(end - start), U * U.transpose(), int(end - start), 0};
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pole.G, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    for (int k = 0; k < nm; ++k)
      if (es.eigenvalues()(k) > std::max(1e-10 * top, 1e-28)) ++pole.rank;
    poles.push_back(std::move(pole));
    start = end;
  }
  return poles;
}

class ClosedChannel {
 public:
  ClosedChannel(const FeshbachModel& model, double B) : poles_(build_poles(model)) {
    const int nm = model.tensor.n_mol();
    diag_ = model.mol.energies.head(nm).array() + model.cfg.detuning(B);
    positions_.reserve(poles_.size());
    for (const auto& p : poles_) positions_.push_back(p.energy);
  }

  const std::vector<Pole>& poles() const { return poles_; }

  // M(E) multiplied by a positive factor, chosen as the distance to the nearest pole.
  Eigen::MatrixXd scaled(double E, double factor) const {
    const int nm = static_cast<int>(diag_.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nm, nm);
    for (int k = 0; k < nm; ++k) m(k, k) = factor * (E - diag_(k));
    for (const auto& p : poles_) m.noalias() -= (factor / (E - p.energy)) * p.G;
    return m;
  }

  Eigen::MatrixXd matrix(double E) const { return scaled(E, 1.0); }

  Eigen::MatrixXd derivative(double E) const {
    const int nm = static_cast<int>(diag_.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(nm, nm);
    for (const auto& p : poles_) {
      const double x = E - p.energy;
      m.noalias() += p.G / (x * x);
    }
    return m;
  }

  double nearest_pole_distance(double E) const {
    if (positions_.empty()) return 1.0;
    auto it = std::lower_bound(positions_.begin(), positions_.end(), E);
    double best = std::numeric_limits<double>::infinity();
    if (it != positions_.end()) best = std::min(best, std::abs(*it - E));
    if (it != positions_.begin()) best = std::min(best, std::abs(*std::prev(it) - E));
    return std::max(best, 1e-300);
  }

  int negative_count(double E) const {
    const double f = std::min(1.0, nearest_pole_distance(E));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scaled(E, f), Eigen::EigenvaluesOnly);
    return static_cast<int>((es.eigenvalues().array() < 0.0).count());
  }

 private:
  std::vector<Pole> poles_;
  std::vector<double> positions_;
  Eigen::VectorXd diag_;
};

constexpr double kRootTolerance = 1e-10;

// Newton steps on the eigenvalue of M closest to zero, kept inside the bracket. Near a pole the
// slope of that eigenvalue is large, so the bisection midpoint alone leaves a visible residual.
double polish(const ClosedChannel& cc, double a, double b) {
  double E = 0.5 * (a + b);
  for (int it = 0; it < 3; ++it) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cc.matrix(E));
    Eigen::Index idx;
    es.eigenvalues().cwiseAbs().minCoeff(&idx);
    const Eigen::VectorXd v = es.eigenvectors().col(idx);
    const double next = E - es.eigenvalues()(idx) / v.dot(cc.derivative(E) * v);
    if (!(next >= a && next <= b)) break;
    E = next;
  }
  return E;
}

void bisect(const ClosedChannel& cc, double a, int na, double b, int nb, std::vector<double>& roots) {
  if (na <= nb) return;
  if (b - a <= kRootTolerance) {
    if (na - nb == 1) {
      roots.push_back(polish(cc, a, b));
    } else {
      for (int r = 0; r < na - nb; ++r) roots.push_back(0.5 * (a + b));
    }
    return;
  }
  const double mid = 0.5 * (a + b);
  const int nmid = cc.negative_count(mid);
  if (nmid > na || nmid < nb)
    throw ConvergenceError("negative-eigenvalue count is not monotone between poles", b - a);
  bisect(cc, a, na, mid, nmid, roots);
  bisect(cc, mid, nmid, b, nb, roots);
}

std::vector<double> closed_weights(const ClosedChannel& cc, double E, int multiplicity) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cc.matrix(E));
  std::vector<int> order(es.eigenvalues().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(es.eigenvalues()(a)) < std::abs(es.eigenvalues()(b));
  });
  const Eigen::MatrixXd dm = cc.derivative(E);
  std::vector<double> out;
  for (int m = 0; m < multiplicity && m < int(order.size()); ++m) {
    const Eigen::VectorXd a = es.eigenvectors().col(order[m]);
    out.push_back(std::clamp(1.0 / a.dot(dm * a), 0.0, 1.0));
  }
  while (int(out.size()) < multiplicity) out.push_back(0.0);
  return out;
}

struct RootSearch {
  BoundLevels levels;
  std::vector<std::pair<double, int>> uncoupled;  // pole energy, multiplicity - rank
};

RootSearch search(const FeshbachModel& model, double B, const LevelWindow& window) {
  if (!(window.lo < window.hi)) throw Error("bound_levels: empty energy window");
  if (model.tensor.n_mol() == 0) throw Error("bound_levels: empty coupling tensor");
  const ClosedChannel cc(model, B);
  for (const auto& p : cc.poles())
    for (double edge : {window.lo, window.hi})
      if (std::abs(edge - p.energy) <= 2.0 * merge_tolerance(p.energy)) {
        std::ostringstream msg;
        msg << "bound_levels: window edge " << edge << " sits on the pair energy " << p.energy;
        throw Error(msg.str());
      }

  RootSearch out;
  std::vector<double> roots;
  double a = window.lo;
  int na = cc.negative_count(a);
  for (const auto& p : cc.poles()) {
    if (p.energy <= window.lo || p.energy >= window.hi) continue;
    const double eta = 2.0 * merge_tolerance(p.energy);
    const double below = p.energy - eta;
    const double above = p.energy + eta;
    const int nb = cc.negative_count(below);
    bisect(cc, a, na, below, nb, roots);
    const int nabove = cc.negative_count(above);
    const int hidden = p.rank - (nabove - nb);
    if (hidden < 0) throw ConvergenceError("inertia jump across a pole exceeds its rank", p.energy);
    for (int h = 0; h < hidden; ++h) out.levels.pinned.push_back(p.energy);
    if (p.multiplicity > p.rank) out.uncoupled.emplace_back(p.energy, p.multiplicity - p.rank);
    a = above;
    na = nabove;
  }
  bisect(cc, a, na, window.hi, cc.negative_count(window.hi), roots);

  std::sort(roots.begin(), roots.end());
  for (std::size_t r = 0; r < roots.size();) {
    std::size_t e = r + 1;
    while (e < roots.size() && roots[e] == roots[r]) ++e;
    const auto w = closed_weights(cc, roots[r], int(e - r));
    for (std::size_t q = r; q < e; ++q) {
      out.levels.energies.push_back(roots[q]);
      out.levels.closed_weight.push_back(w[q - r]);
    }
    r = e;
  }
  return out;
}

}  // namespace

Eigen::MatrixXd closed_channel_matrix(const FeshbachModel& model, double B, double E) {
  return ClosedChannel(model, B).matrix(E);
}

BoundLevels bound_levels(const FeshbachModel& model, double B, const LevelWindow& window) {
  return search(model, B, window).levels;
}

SpectrumPoint spectrum_at(const FeshbachModel& model, double B, const LevelWindow& window) {
  RootSearch found = search(model, B, window);
  SpectrumPoint point{B, {}};
  const auto& lv = found.levels;
  for (std::size_t i = 0; i < lv.energies.size(); ++i)
    point.levels.push_back({lv.energies[i], lv.closed_weight[i], LevelKind::Coupled, -1});
  for (double e : lv.pinned) point.levels.push_back({e, 0.0, LevelKind::Pinned, -1});
  for (auto [e, m] : found.uncoupled)
    for (int q = 0; q < m; ++q) point.levels.push_back({e, 0.0, LevelKind::UncoupledPair, -1});
  const auto& eps = model.basis.energies;
  const int np = model.tensor.n_pair();
  for (int i = 0; i < np; ++i)
    for (int j = i + 1; j < np; ++j) {
      const double e = eps(i) + eps(j);
      if (e > window.lo && e < window.hi) point.levels.push_back({e, 0.0, LevelKind::OddPair, -1});
    }
  std::stable_sort(point.levels.begin(), point.levels.end(),
                   [](const SpectrumLevel& a, const SpectrumLevel& b) { return a.energy < b.energy; });
  return point;
}

namespace {

void link_branches(std::vector<SpectrumPoint>& points) {
  int next_id = 0;
  if (points.empty()) return;
  for (auto& l : points.front().levels) l.branch = next_id++;
  constexpr int kNeighbours = 6;
  for (std::size_t s = 1; s < points.size(); ++s) {
    const auto& prev = points[s - 1].levels;
    auto& cur = points[s].levels;
    std::vector<std::tuple<double, double, int, int>> candidates;
    for (int c = 0; c < int(cur.size()); ++c) {
      const auto it = std::lower_bound(prev.begin(), prev.end(), cur[c].energy,
                                       [](const SpectrumLevel& l, double e) { return l.energy < e; });
      const int centre = int(it - prev.begin());
      for (int p = std::max(0, centre - kNeighbours);
           p < std::min(int(prev.size()), centre + kNeighbours); ++p)
        candidates.emplace_back(std::abs(cur[c].energy - prev[p].energy),
                                std::abs(cur[c].closed_weight - prev[p].closed_weight), c, p);
    }
    std::sort(candidates.begin(), candidates.end());
    std::vector<char> used_prev(prev.size(), 0);
    for (const auto& [de, dw, c, p] : candidates) {
      if (cur[c].branch >= 0 || used_prev[p]) continue;
      cur[c].branch = prev[p].branch;
      used_prev[p] = 1;
    }
    for (auto& l : cur)
      if (l.branch < 0) l.branch = next_id++;
  }
}

}  // namespace

std::vector<SpectrumPoint> spectrum_scan(const FeshbachModel& model, const std::vector<double>& B_grid,
                                         const LevelWindow& window) {
  for (std::size_t i = 1; i < B_grid.size(); ++i)
    if (!(B_grid[i] > B_grid[i - 1])) throw Error("spectrum_scan: B grid must be strictly increasing");
  std::vector<SpectrumPoint> points(B_grid.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), B_grid.size()));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w)
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < B_grid.size(); i += workers)
        points[i] = spectrum_at(model, B_grid[i], window);
    }));
  for (auto& j : jobs) j.get();
  link_branches(points);
  return points;
}

}  // namespace fbgate
