#pragma once

#include <Eigen/Dense>

namespace fbgate {

/// Normalized Hermite functions psi_0 .. psi_{n-1} at the points x.
/// Row index is the oscillator quantum number, column index the point.
Eigen::MatrixXd hermite_functions(int n, const Eigen::VectorXd& x);

/// Gauss-Hermite rule whose weights already include exp(+x^2): sum_q weights[q] * f(nodes[q])
/// integrates an f that carries its own Gaussian decay. Nodes are exactly mirror symmetric.
struct GaussHermiteRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Rule of the given order; results are cached per order and safe to share between threads.
const GaussHermiteRule& gauss_hermite(int order);

/// Rule for integrands of the form polynomial(x) * exp(-c x^2), exact for polynomial
/// degree up to 2*order - 1.
GaussHermiteRule scaled_gauss_hermite(int order, double c);

}  // namespace fbgate
