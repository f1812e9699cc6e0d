#include "ascertain/rasch.hpp"

#include <cmath>
#include <string>

#include "ascertain/error.hpp"

namespace ascertain {

const char* to_string(CaptureModel m) noexcept {
  return m == CaptureModel::independent ? "independent" : "dynamic";
}

CaptureModel parse_capture_model(std::string_view s) {
  if (s == "independent") return CaptureModel::independent;
  if (s == "dynamic") return CaptureModel::dynamic;
  throw ValidationError("unknown capture model '" + std::string(s) + "'");
}

RaschParams RaschParams::independent(std::vector<double> alpha, double theta) {
  RaschParams p;
  p.model = CaptureModel::independent;
  p.alpha2.assign(static_cast<std::size_t>(pair_count(static_cast<int>(alpha.size()))), 0.0);
  p.alpha = std::move(alpha);
  p.theta = theta;
  p.validate();
  return p;
}

RaschParams RaschParams::dynamic(std::vector<double> alpha, std::vector<double> alpha2, double theta) {
  RaschParams p;
  p.model = CaptureModel::dynamic;
  p.alpha = std::move(alpha);
  p.alpha2 = std::move(alpha2);
  p.theta = theta;
  p.validate();
  return p;
}

RaschParams RaschParams::constant(int lists, double main, double pair, double theta) {
  return dynamic(std::vector<double>(static_cast<std::size_t>(lists), main),
                 std::vector<double>(static_cast<std::size_t>(pair_count(lists)), pair), theta);
}

void RaschParams::validate() const {
  const int j = lists();
  if (j < 1 || j > kMaxLists) throw ValidationError("RaschParams: number of lists out of range");
  if (static_cast<int>(alpha2.size()) != pair_count(j)) {
    throw ValidationError("RaschParams: expected " + std::to_string(pair_count(j)) +
                          " two-list interactions, got " + std::to_string(alpha2.size()) +
                          " (higher-order interactions are not supported)");
  }
  for (double a : alpha)
    if (!std::isfinite(a)) throw ValidationError("RaschParams: non-finite list strength");
  for (double a : alpha2) {
    if (!std::isfinite(a)) throw ValidationError("RaschParams: non-finite interaction");
    if (model == CaptureModel::independent && a != 0.0) {
      throw ValidationError("RaschParams: independent model requires zero interactions");
    }
  }
  if (!std::isfinite(theta)) throw ValidationError("RaschParams: non-finite theta");
}

double logistic(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  if (x > 30) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

namespace {

// Linear predictor of list k for the cell with the given index.
double list_logit(const RaschParams& p, double shift, int k, std::uint32_t index) {
  const int lists = p.lists();
  double eta = shift + p.alpha[static_cast<std::size_t>(k)];
  if (p.model == CaptureModel::dynamic) {
    for (int j = 0; j < k; ++j) {
      if ((index >> (lists - 1 - j)) & 1u) eta += p.alpha2[static_cast<std::size_t>(pair_index(lists, j, k))];
    }
  }
  return eta;
}

double log_prob_of_index(const RaschParams& p, double shift, std::uint32_t index) {
  const int lists = p.lists();
  double lp = 0.0;
  for (int k = 0; k < lists; ++k) {
    const double eta = list_logit(p, shift, k, index);
    const bool captured = (index >> (lists - 1 - k)) & 1u;
    // log logistic(eta) = -softplus(-eta); log(1 - logistic(eta)) = -softplus(eta)
    lp -= captured ? softplus(-eta) : softplus(eta);
  }
  return lp;
}

}  // namespace

double capture_prob(const RaschParams& params, double theta_effective, int k, std::span<const int> history) {
  if (k < 0 || k >= params.lists()) throw ValidationError("capture_prob: list index out of range");
  if (static_cast<int>(history.size()) != k) throw ValidationError("capture_prob: history must cover lists before k");
  double eta = theta_effective + params.alpha[static_cast<std::size_t>(k)];
  for (int j = 0; j < k; ++j) {
    if (history[static_cast<std::size_t>(j)]) eta += params.interaction(j, k);
  }
  return logistic(eta);
}

double cell_log_probability(const RaschParams& params, double exposure_shift, const CapturePattern& pattern) {
  if (pattern.lists() != params.lists()) throw ValidationError("pattern length does not match parameters");
  return log_prob_of_index(params, exposure_shift, pattern.index());
}

double cell_probability(const RaschParams& params, double exposure_shift, const CapturePattern& pattern) {
  return std::exp(cell_log_probability(params, exposure_shift, pattern));
}

std::vector<double> cell_probabilities(const RaschParams& params, double exposure_shift) {
  const std::uint32_t cells = 1u << params.lists();
  std::vector<double> p(cells);
  for (std::uint32_t i = 0; i < cells; ++i) p[i] = std::exp(log_prob_of_index(params, exposure_shift, i));
  return p;
}

double miss_probability(const RaschParams& params, double exposure_shift) {
  double lp = 0.0;
  for (double a : params.alpha) lp -= softplus(exposure_shift + a);
  return std::exp(lp);
}

double expected_missing(double n, const RaschParams& params, double exposure_shift) {
  if (!(n > 0)) throw ValidationError("expected_missing: N must be positive");
  return n * miss_probability(params, exposure_shift);
}

void add_cell_log_prob_gradient(const RaschParams& params, double exposure_shift, std::uint32_t index,
                                double weight, std::span<double> grad) {
  const int lists = params.lists();
  const GradientLayout layout{lists};
  for (int k = 0; k < lists; ++k) {
    const double eta = list_logit(params, exposure_shift, k, index);
    const double xk = static_cast<double>((index >> (lists - 1 - k)) & 1u);
    const double r = weight * (xk - logistic(eta));
    grad[static_cast<std::size_t>(layout.alpha(k))] += r;
    grad[static_cast<std::size_t>(layout.shift())] += r;
    for (int j = 0; j < k; ++j) {
      if ((index >> (lists - 1 - j)) & 1u) grad[static_cast<std::size_t>(layout.pair(pair_index(lists, j, k)))] += r;
    }
  }
}

}  // namespace ascertain
