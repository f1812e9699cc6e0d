#pragma once

// Monte Carlo studies of differential ascertainment: bias of the observed
// exposed/unexposed ratio, recovery of the model parameters, and the effect
// on odds ratios.
//
// Populations are never materialized. Cell counts are drawn as independent
// Poisson(gamma * p_c), which has the same law as drawing N ~ Poisson(gamma)
// and ascertaining each individual.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ascertain/estimation.hpp"
#include "ascertain/parallel.hpp"
#include "ascertain/random.hpp"
#include "ascertain/tables.hpp"

namespace ascertain {

enum class ShiftTarget { exposed, unexposed };

const char* to_string(ShiftTarget t) noexcept;
ShiftTarget parse_shift_target(std::string_view s);

enum class Study { bias, estimators, odds_ratio };

const char* to_string(Study s) noexcept;
Study parse_study(std::string_view s);

struct SimConfig {
  double gamma_exposed = 500.0;
  double gamma_unexposed = 1000.0;
  double alpha_main = 0.5;
  double alpha_pair = -0.2;
  std::vector<int> lists{3};
  std::vector<double> thetas{-1.0, -0.5, 0.0, 0.5, 1.0};
  int replicates = 1000;
  std::uint64_t seed = 0;
  ShiftTarget theta_applies_to = ShiftTarget::exposed;
  /// Group totals for the odds-ratio study.
  double total_exposed = 0.0;
  double total_unexposed = 0.0;
  bool rare = false;
  FitSpec fit;
  ExecutionPolicy execution;

  void validate() const;
  /// Capture parameters with the configured constants, theta = 0.
  RaschParams params(int lists) const;
  /// (exposed, unexposed) shifts for a grid value.
  std::pair<double, double> shifts(double theta) const;
};

/// Reads a JSON object. Keys starting with '_' are ignored; other unknown
/// keys are rejected.
SimConfig parse_sim_config(std::string_view json);
std::string sim_config_json(const SimConfig& config);

/// Complete table of Poisson(gamma * p_c) cell counts.
ContingencyTable generate_population(double gamma, const RaschParams& params, double exposure_shift, Rng& rng,
                                     const std::string& label = {});

struct Summary {
  double mean = 0.0;
  double lower = 0.0;  ///< empirical 2.5% point
  double upper = 0.0;  ///< empirical 97.5% point
  int used = 0;
  int excluded = 0;
};

/// Mean and empirical 95% interval; NaN entries are excluded and counted.
Summary summarize(std::vector<double> values);

struct BiasRow {
  int lists = 0;
  double theta = 0.0;
  Summary ratio;    ///< observed exposed / observed unexposed
  double expected;  ///< gamma_E (1 - p0_E) / (gamma_U (1 - p0_U))
};

/// Expected observed ratio under the configured convention.
double expected_observed_ratio(const SimConfig& config, int lists, double theta);

std::vector<BiasRow> bias_study(const SimConfig& config);
std::vector<BiasRow> bias_study_serial(SimConfig config);

struct EstimatorRow {
  int lists = 0;
  double theta = 0.0;
  std::string parameter;  ///< a1.., a12.., gamma_E, gamma_U, theta
  double truth = 0.0;
  Summary estimate;
};

/// Incomplete free-theta fits on the observed parts of simulated
/// populations. A failed fit is retried once on a fresh stream, then
/// excluded.
std::vector<EstimatorRow> estimator_study(const SimConfig& config);
std::vector<EstimatorRow> estimator_study_serial(SimConfig config);

struct OddsRatioRow {
  int lists = 0;
  double theta = 0.0;
  double true_or = 0.0;  ///< from the generating gamma ratio
  Summary naive;         ///< from the observed counts
  Summary corrected;     ///< from the fitted gamma ratio
  double naive_bias = 0.0;
  double corrected_bias = 0.0;
  /// Replicates where |corrected - true| < |naive - true|.
  int corrected_closer = 0;
};

std::vector<OddsRatioRow> or_bias(const SimConfig& config);
std::vector<OddsRatioRow> or_bias_serial(SimConfig config);

void write_bias_csv(std::ostream& out, const std::vector<BiasRow>& rows);
void write_estimator_csv(std::ostream& out, const std::vector<EstimatorRow>& rows);
void write_odds_ratio_csv(std::ostream& out, const std::vector<OddsRatioRow>& rows);

}  // namespace ascertain
