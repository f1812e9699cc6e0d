#pragma once

// Three-sided test for the differential shift theta:
//   H0: -delta <= theta <= delta,  H+: theta > delta,  H-: theta < -delta,
// calibrated by the parametric-bootstrap distribution of theta-hat under
// theta = 0.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ascertain/estimation.hpp"
#include "ascertain/parallel.hpp"
#include "ascertain/tables.hpp"

namespace ascertain {

enum class Regime {
  incomplete,  ///< Poisson totals, all-zero cell deleted from each replicate
  complete,    ///< fixed totals, multinomial replicates
};

const char* to_string(Regime r) noexcept;
Regime parse_regime(std::string_view s);

/// Type-7 (linear interpolation) empirical quantile of sorted data:
/// h = (n - 1) p, interpolate between order statistics floor(h) and ceil(h).
double empirical_quantile(const std::vector<double>& sorted, double p);

struct NullDistribution {
  std::vector<double> draws;  ///< theta-hat per successful replicate, replicate order
  std::vector<double> sorted;
  std::uint64_t seed = 0;
  Regime regime = Regime::incomplete;
  FitResult null_fit;  ///< generating parameters (theta = 0)
  int requested = 0;
  int retried = 0;
  int excluded = 0;

  double quantile(double p) const { return empirical_quantile(sorted, p); }
};

struct BootstrapOptions {
  int replicates = 1500;
  std::uint64_t seed = 0;
  FitSpec fit;  ///< variant is set from the regime
  ExecutionPolicy execution;
};

/// Fits the null model, simulates replicates from it, refits the free-shift
/// model on each and collects theta-hat. A failed replicate is retried once
/// on a fresh substream, then excluded; exclusions must stay below 1%.
NullDistribution bootstrap_null(const ContingencyTable& exposed, const ContingencyTable& unexposed, Regime regime,
                                const BootstrapOptions& options);

/// Serial reference with the same substreams; output is identical.
NullDistribution bootstrap_null_serial(const ContingencyTable& exposed, const ContingencyTable& unexposed,
                                       Regime regime, BootstrapOptions options);

/// Simulated tables for replicate b, attempt a (exposed, unexposed).
std::pair<ContingencyTable, ContingencyTable> simulate_null_replicate(const FitResult& null_fit,
                                                                      const ContingencyTable& exposed,
                                                                      const ContingencyTable& unexposed,
                                                                      Regime regime, std::uint64_t seed,
                                                                      std::uint64_t replicate, std::uint64_t attempt);

struct NullQuantiles {
  double lower_half = 0.0;  ///< q_{alpha/2}
  double lower = 0.0;       ///< q_alpha
  double upper = 0.0;       ///< q_{1-alpha}
  double upper_half = 0.0;  ///< q_{1-alpha/2}
};

NullQuantiles null_quantiles(const NullDistribution& dist, double alpha);

struct DeltaThresholds {
  double delta1 = 0.0;  ///< theta-hat - q_alpha
  double delta2 = 0.0;  ///< q_{1-alpha} - theta-hat
};

DeltaThresholds delta_thresholds(double theta_hat, const NullQuantiles& q);
DeltaThresholds delta_thresholds(double theta_hat, const NullDistribution& dist, double alpha);

struct ThreeSidedOutcome {
  double theta_hat = 0.0;
  double alpha = 0.05;
  double delta = 0.0;
  NullQuantiles quantiles;
  DeltaThresholds thresholds;
  bool reject_null = false;   ///< H0
  bool reject_plus = false;   ///< H+
  bool reject_minus = false;  ///< H-
};

/// Decision rules:
///   reject H+ if theta-hat - delta < q_alpha
///   reject H- if theta-hat + delta > q_{1-alpha}
///   reject H0 if theta-hat - delta > q_{1-alpha/2} or theta-hat + delta < q_{alpha/2}
ThreeSidedOutcome decide(double theta_hat, const NullQuantiles& q, double alpha, double delta);
ThreeSidedOutcome decide(double theta_hat, const NullDistribution& dist, double alpha, double delta);

/// Plain-language reading of the outcome and of the delta ranges in which
/// the decisions change.
std::vector<std::string> interpret(const ThreeSidedOutcome& outcome);

/// One-column file of the draws, for external histogramming.
void write_draws(std::ostream& out, const NullDistribution& dist);

}  // namespace ascertain
