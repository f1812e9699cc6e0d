#pragma once

// Log-likelihoods of complete and observed (all-zero cell missing) tables.
//
// The observed-table likelihood sums the complete multinomial likelihood
// over the unseen count m weighted by Poisson(gamma) on N_obs + m. A Poisson
// total split multinomially gives independent Poisson cells, so the sum
// collapses to the product of Poisson(gamma * p_c) terms over the observed
// cells. That closed form is what is evaluated here.

#include <span>
#include <vector>

#include "ascertain/error.hpp"
#include "ascertain/rasch.hpp"
#include "ascertain/tables.hpp"

namespace ascertain {

/// Dense cell counts as reals, so expected counts can be fit as
/// pseudo-data. counts[0] is ignored unless complete.
struct CellCounts {
  int lists = 0;
  bool complete = false;
  std::vector<double> counts;

  static CellCounts from(const ContingencyTable& table);
  double total() const noexcept;
};

struct RandomEffectsParams {
  static constexpr double kSigmaFloor = 1e-6;
  double mu = 0.0;
  double sigma = kSigmaFloor;
};

/// Thrown when the 40- and 80-node rules disagree.
class QuadratureError : public NumericalError {
 public:
  QuadratureError(double delta);
  double delta() const noexcept { return delta_; }

 private:
  double delta_;
};

struct QuadratureOptions {
  int nodes = 40;
  double tolerance = 1e-8;  ///< accepted |loglik(nodes) - loglik(2 nodes)|
};

// ---- fixed effects ---------------------------------------------------------

double complete_loglik(const ContingencyTable& table, const RaschParams& params, double exposure_shift);
double complete_loglik(const CellCounts& counts, const RaschParams& params, double exposure_shift);

double observed_loglik(const ContingencyTable& table, double gamma, const RaschParams& params,
                       double exposure_shift);
double observed_loglik(const CellCounts& counts, double gamma, const RaschParams& params, double exposure_shift);

/// Exposed table evaluated at shift params.theta, unexposed at 0.
double joint_loglik(const ContingencyTable& exposed, const ContingencyTable& unexposed, const PoissonRates& rates,
                    const RaschParams& params);

/// Value plus gradient. d_params follows GradientLayout; d_log_gamma is the
/// derivative with respect to log(gamma) (zero for complete tables).
struct LoglikGradient {
  double value = 0.0;
  std::vector<double> d_params;
  double d_log_gamma = 0.0;
};

LoglikGradient complete_loglik_gradient(const CellCounts& counts, const RaschParams& params, double exposure_shift);
LoglikGradient observed_loglik_gradient(const CellCounts& counts, double gamma, const RaschParams& params,
                                        double exposure_shift);

// ---- random effects --------------------------------------------------------
//
// One normal draw of the shift per table, centred at mu for the exposed
// table and 0 for the unexposed one, integrated by Gauss-Hermite. params.theta
// is not used.

double re_complete_loglik(const ContingencyTable& table, const RaschParams& params, const RandomEffectsParams& re,
                          bool exposed, const QuadratureOptions& quad = {});
double re_observed_loglik(const ContingencyTable& table, double gamma, const RaschParams& params,
                          const RandomEffectsParams& re, bool exposed, const QuadratureOptions& quad = {});

/// Shift slot of d_params holds d/dmu (zero for the unexposed table).
struct ReLoglikGradient {
  double value = 0.0;
  std::vector<double> d_params;
  double d_sigma = 0.0;
  double d_log_gamma = 0.0;
};

ReLoglikGradient re_complete_loglik_gradient(const CellCounts& counts, const RaschParams& params,
                                             const RandomEffectsParams& re, bool exposed,
                                             const QuadratureOptions& quad = {});
ReLoglikGradient re_observed_loglik_gradient(const CellCounts& counts, double gamma, const RaschParams& params,
                                             const RandomEffectsParams& re, bool exposed,
                                             const QuadratureOptions& quad = {});

}  // namespace ascertain
