#pragma once

// Maximum-likelihood fits of the capture model variants.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ascertain/error.hpp"
#include "ascertain/likelihood.hpp"
#include "ascertain/optimize.hpp"
#include "ascertain/rasch.hpp"
#include "ascertain/tables.hpp"

namespace ascertain {

enum class FitVariant {
  incomplete_free_theta,
  incomplete_null_theta,
  complete_free_theta,
  complete_null_theta,
  re_complete,
  re_incomplete,
};

const char* to_string(FitVariant v) noexcept;
FitVariant parse_fit_variant(std::string_view s);
bool is_incomplete(FitVariant v) noexcept;
bool is_random_effects(FitVariant v) noexcept;
bool has_free_shift(FitVariant v) noexcept;

struct FitSpec {
  FitVariant variant = FitVariant::incomplete_free_theta;
  CaptureModel model = CaptureModel::dynamic;
  OptimizerControls optimizer;
  int multistart = 5;
  double jitter_sd = 0.25;
  std::uint64_t seed = 0;
  QuadratureOptions quadrature;
};

struct DerivedQuantities {
  double miss_probability_exposed = 0.0;
  double miss_probability_unexposed = 0.0;
  double expected_missing_exposed = 0.0;
  double expected_missing_unexposed = 0.0;
  /// gamma_E / gamma_U for incomplete variants, N_E / N_U for complete ones.
  double ratio = 0.0;
};

struct FitResult {
  FitVariant variant = FitVariant::incomplete_free_theta;
  RaschParams params;
  std::optional<RandomEffectsParams> random_effects;
  std::optional<PoissonRates> rates;
  double loglik = 0.0;
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
  int starts_run = 0;
  int best_start = 0;
  /// false for lists that captured nobody; their alpha is pinned.
  std::vector<bool> estimable;
  std::vector<std::string> warnings;
  DerivedQuantities derived;
};

/// Carries the best result when no start converged.
class FitError : public NumericalError {
 public:
  FitError(const std::string& what, FitResult best) : NumericalError(what), best_(std::move(best)) {}
  const FitResult& best() const noexcept { return best_; }

 private:
  FitResult best_;
};

FitResult fit(const ContingencyTable& exposed, const ContingencyTable& unexposed, const FitSpec& spec);

/// Same contract on real-valued counts (pseudo-data such as expected counts).
FitResult fit_counts(const CellCounts& exposed, const CellCounts& unexposed, const FitSpec& spec);

/// Log-likelihood of a fitted model re-evaluated from its reported
/// parameters; equals FitResult::loglik.
double evaluate_loglik(const ContingencyTable& exposed, const ContingencyTable& unexposed, const FitResult& result,
                       const QuadratureOptions& quad = {});

/// gamma maximizing the observed likelihood for fixed capture parameters:
/// N_obs / (1 - p_0...0).
double profile_gamma(const ContingencyTable& observed, const RaschParams& params, double exposure_shift);
double profile_gamma(double observed_total, double miss_probability);

/// Odds ratio from case counts N and group totals T; `rare` uses the
/// approximation (N_E / N_U) * (T_U / T_E).
double odds_ratio(double n_exposed, double n_unexposed, double t_exposed, double t_unexposed, bool rare);

}  // namespace ascertain
