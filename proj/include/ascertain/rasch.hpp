#pragma once

// Capture probabilities for the Rasch model with a differential shift.
//
// List k (zero-based) captures with probability
//   logistic(shift + alpha[k] + sum_{j<k} alpha_{jk} * x_j)
// where the interaction sum is present only in the dynamic model. The
// exposed group is evaluated with shift = theta, the unexposed with 0.

#include <cstdint>
#include <span>
#include <vector>

#include "ascertain/tables.hpp"

namespace ascertain {

enum class CaptureModel { independent, dynamic };

const char* to_string(CaptureModel m) noexcept;
CaptureModel parse_capture_model(std::string_view s);

/// Number of two-list interactions for J lists.
constexpr int pair_count(int lists) noexcept { return lists * (lists - 1) / 2; }

/// Position of alpha_{jk} (zero-based j < k) in the packed interaction
/// vector ordered (1,2),(1,3),...,(1,J),(2,3),...
constexpr int pair_index(int lists, int j, int k) noexcept {
  return j * lists - j * (j + 1) / 2 + (k - j - 1);
}

struct RaschParams {
  CaptureModel model = CaptureModel::dynamic;
  std::vector<double> alpha;   ///< list strengths, log-odds
  std::vector<double> alpha2;  ///< two-list interactions, packed by pair_index
  double theta = 0.0;          ///< differential shift of the exposed group

  static RaschParams independent(std::vector<double> alpha, double theta = 0.0);
  static RaschParams dynamic(std::vector<double> alpha, std::vector<double> alpha2, double theta = 0.0);
  /// Every alpha_j equal to `main`, every alpha_jk equal to `pair`.
  static RaschParams constant(int lists, double main, double pair, double theta = 0.0);

  int lists() const noexcept { return static_cast<int>(alpha.size()); }
  double interaction(int j, int k) const noexcept {
    return model == CaptureModel::dynamic ? alpha2[static_cast<std::size_t>(pair_index(lists(), j, k))] : 0.0;
  }

  /// Throws ValidationError unless the invariants hold.
  void validate() const;
};

struct PoissonRates {
  double exposed = 0.0;
  double unexposed = 0.0;
};

double logistic(double x) noexcept;
/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

/// Probability that list k (zero-based) captures, given memberships
/// history[0..k-1] on the earlier lists.
double capture_prob(const RaschParams& params, double theta_effective, int k, std::span<const int> history);

double cell_log_probability(const RaschParams& params, double exposure_shift, const CapturePattern& pattern);
double cell_probability(const RaschParams& params, double exposure_shift, const CapturePattern& pattern);

/// All 2^J cell probabilities, indexed by pattern index.
std::vector<double> cell_probabilities(const RaschParams& params, double exposure_shift);

/// Probability of being missed by every list. Interactions never enter
/// because the history is all zeros.
double miss_probability(const RaschParams& params, double exposure_shift);

double expected_missing(double n, const RaschParams& params, double exposure_shift);

/// Gradient layout shared by the likelihood code:
///   [alpha_1..alpha_J, alpha_12..alpha_{J-1,J}, shift]
struct GradientLayout {
  int lists;
  int alpha(int k) const noexcept { return k; }
  int pair(int p) const noexcept { return lists + p; }
  int shift() const noexcept { return lists + pair_count(lists); }
  int size() const noexcept { return lists + pair_count(lists) + 1; }
};

/// Adds weight * d log p_pattern / d(params) into grad (GradientLayout).
/// The interaction block is filled for either model; callers fitting the
/// independent model ignore it.
void add_cell_log_prob_gradient(const RaschParams& params, double exposure_shift, std::uint32_t pattern_index,
                                double weight, std::span<double> grad);

}  // namespace ascertain
