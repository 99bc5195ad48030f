#include "fbgate/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace fbgate {

Eigen::MatrixXd hermite_functions(int n, const Eigen::VectorXd& x) {
  Eigen::MatrixXd out(n, x.size());
  if (n == 0) return out;
  const double norm0 = std::pow(std::numbers::pi, -0.25);
  for (Eigen::Index q = 0; q < x.size(); ++q) {
    const double xq = x(q);
    // Run the recurrence on an unscaled seed and carry the Gaussian as a log factor so that
    // far nodes do not underflow before the polynomial growth catches up.
    double log_scale = -0.5 * xq * xq;
    double prev = 0.0;
    double cur = norm0;
    out(0, q) = cur * std::exp(log_scale);
    for (int j = 0; j + 1 < n; ++j) {
      const double next = std::sqrt(2.0 / (j + 1)) * xq * cur - std::sqrt(double(j) / (j + 1)) * prev;
      prev = cur;
      cur = next;
      if (std::abs(cur) > 1e150) {
        cur *= 1e-150;
        prev *= 1e-150;
        log_scale += 150.0 * std::log(10.0);
      }
      out(j + 1, q) = cur * std::exp(log_scale);
    }
  }
  return out;
}

namespace {

// psi_{n-1}(x) and psi_n(x) by upward recurrence, both divided by exp(scale).
struct TopTwo {
  double pm1;
  double pn;
  double log_scale;
};

TopTwo top_two(int n, double x) {
  double log_scale = -0.5 * x * x;
  double prev = 0.0;
  double cur = std::pow(std::numbers::pi, -0.25);
  for (int j = 0; j < n - 1; ++j) {
    const double next = std::sqrt(2.0 / (j + 1)) * x * cur - std::sqrt(double(j) / (j + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > 1e150) {
      cur *= 1e-150;
      prev *= 1e-150;
      log_scale += 150.0 * std::log(10.0);
    }
  }
  const double psi_n = std::sqrt(2.0 / n) * x * cur - std::sqrt(double(n - 1) / n) * prev;
  return {cur, psi_n, log_scale};
}

GaussHermiteRule build_rule(int order) {
  if (order < 1) throw std::invalid_argument("gauss_hermite: order must be positive");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(std::max(order - 1, 0));
  for (int j = 1; j < order; ++j) sub(j - 1) = std::sqrt(j / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  Eigen::VectorXd x = solver.eigenvalues();

  GaussHermiteRule rule{Eigen::VectorXd(order), Eigen::VectorXd(order)};
  for (int q = 0; q < order; ++q) {
    double xq = x(q);
    for (int it = 0; it < 3; ++it) {
      const auto t = top_two(order, xq);
      const double deriv = std::sqrt(2.0 * order) * t.pm1 - xq * t.pn;
      xq -= t.pn / deriv;
    }
    const auto t = top_two(order, xq);
    rule.nodes(q) = xq;
    rule.weights(q) = std::exp(-2.0 * t.log_scale) / (order * t.pm1 * t.pm1);
  }
  for (int q = 0; q < order / 2; ++q) {
    const int r = order - 1 - q;
    const double node = 0.5 * (rule.nodes(r) - rule.nodes(q));
    const double weight = 0.5 * (rule.weights(r) + rule.weights(q));
    rule.nodes(q) = -node;
    rule.nodes(r) = node;
    rule.weights(q) = rule.weights(r) = weight;
  }
  if (order % 2 == 1) rule.nodes(order / 2) = 0.0;
  return rule;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(int order) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussHermiteRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussHermiteRule>(build_rule(order));
  return *slot;
}

GaussHermiteRule scaled_gauss_hermite(int order, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("scaled_gauss_hermite: exponent must be positive");
  const auto& base = gauss_hermite(order);
  const double scale = 1.0 / std::sqrt(c);
  return {base.nodes * scale, base.weights * scale};
}

}  // namespace fbgate
