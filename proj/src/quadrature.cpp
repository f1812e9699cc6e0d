#include "ascertain/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "ascertain/error.hpp"

namespace ascertain {

GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw ValidationError("gauss_hermite: need at least one node");
  // Jacobi matrix of the Hermite recurrence: off-diagonal sqrt(k/2).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  if (solver.info() != Eigen::Success) throw NumericalError("gauss_hermite: eigen decomposition failed");

  GaussHermiteRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const double mu0 = std::sqrt(std::numbers::pi);
  for (int i = 0; i < n; ++i) {
    const double v0 = solver.eigenvectors()(0, i);
    rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  // Symmetrize: the eigensolver leaves ~1e-15 asymmetry.
  for (int i = 0, j = n - 1; i < j; ++i, --j) {
    const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
    const double x = 0.5 * (rule.nodes[uj] - rule.nodes[ui]);
    rule.nodes[ui] = -x;
    rule.nodes[uj] = x;
    const double w = 0.5 * (rule.weights[ui] + rule.weights[uj]);
    rule.weights[ui] = rule.weights[uj] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

const GaussHermiteRule& gauss_hermite_cached(int n) {
  static std::mutex mutex;
  static std::map<int, GaussHermiteRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_hermite(n)).first;
  return it->second;
}

}  // namespace ascertain
