#pragma once

#include <vector>

namespace ascertain {

/// Gauss-Hermite rule for the weight exp(-x^2).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point rule via the Golub-Welsch eigenvalue method.
GaussHermiteRule gauss_hermite(int n);

/// Shared rules, built once.
const GaussHermiteRule& gauss_hermite_cached(int n);

}  // namespace ascertain
