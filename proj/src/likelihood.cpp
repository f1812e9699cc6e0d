#include "ascertain/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include <boost/math/tools/toms748_solve.hpp>

#include "ascertain/quadrature.hpp"

namespace ascertain {

CellCounts CellCounts::from(const ContingencyTable& table) {
  CellCounts c;
  c.lists = table.lists();
  c.complete = table.complete();
  c.counts.assign(table.dense().begin(), table.dense().end());
  return c;
}

double CellCounts::total() const noexcept {
  double s = 0.0;
  for (std::size_t i = complete ? 0 : 1; i < counts.size(); ++i) s += counts[i];
  return s;
}

QuadratureError::QuadratureError(double delta)
    : NumericalError("Gauss-Hermite quadrature not converged: |loglik(n) - loglik(2n)| = " + std::to_string(delta)),
      delta_(delta) {}

namespace {

void check_counts(const CellCounts& counts, const RaschParams& params) {
  if (counts.lists != params.lists()) throw ValidationError("table and parameters disagree on the number of lists");
  if (counts.counts.size() != (std::size_t{1} << counts.lists)) throw ValidationError("malformed cell counts");
}

void check_gamma(double gamma) {
  if (!(gamma > 0) || !std::isfinite(gamma)) throw ValidationError("Poisson rate gamma must be positive");
}

double log_factorial(double n) { return std::lgamma(n + 1.0); }

double multinomial_kernel(const CellCounts& counts, const std::vector<double>& p) {
  double ll = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double m = counts.counts[c];
    if (m == 0.0) continue;
    ll += m * std::log(p[c]) - log_factorial(m);
  }
  return ll + log_factorial(counts.total());
}

double poisson_kernel(const CellCounts& counts, double gamma, const std::vector<double>& p) {
  double ll = 0.0;
  const double log_gamma = std::log(gamma);
  for (std::size_t c = 1; c < p.size(); ++c) {
    const double m = counts.counts[c];
    ll -= gamma * p[c];
    if (m == 0.0) continue;
    ll += m * (log_gamma + std::log(p[c])) - log_factorial(m);
  }
  return ll;
}

}  // namespace

double complete_loglik(const CellCounts& counts, const RaschParams& params, double exposure_shift) {
  check_counts(counts, params);
  if (!counts.complete) throw ValidationError("complete table required");
  return multinomial_kernel(counts, cell_probabilities(params, exposure_shift));
}

double complete_loglik(const ContingencyTable& table, const RaschParams& params, double exposure_shift) {
  return complete_loglik(CellCounts::from(table), params, exposure_shift);
}

double observed_loglik(const CellCounts& counts, double gamma, const RaschParams& params, double exposure_shift) {
  check_counts(counts, params);
  check_gamma(gamma);
  return poisson_kernel(counts, gamma, cell_probabilities(params, exposure_shift));
}

double observed_loglik(const ContingencyTable& table, double gamma, const RaschParams& params,
                       double exposure_shift) {
  return observed_loglik(CellCounts::from(table), gamma, params, exposure_shift);
}

double joint_loglik(const ContingencyTable& exposed, const ContingencyTable& unexposed, const PoissonRates& rates,
                    const RaschParams& params) {
  return observed_loglik(exposed, rates.exposed, params, params.theta) +
         observed_loglik(unexposed, rates.unexposed, params, 0.0);
}

LoglikGradient complete_loglik_gradient(const CellCounts& counts, const RaschParams& params, double exposure_shift) {
  check_counts(counts, params);
  if (!counts.complete) throw ValidationError("complete table required");
  const auto p = cell_probabilities(params, exposure_shift);
  LoglikGradient g;
  g.value = multinomial_kernel(counts, p);
  g.d_params.assign(static_cast<std::size_t>(GradientLayout{params.lists()}.size()), 0.0);
  for (std::uint32_t c = 0; c < p.size(); ++c) {
    if (counts.counts[c] != 0.0) add_cell_log_prob_gradient(params, exposure_shift, c, counts.counts[c], g.d_params);
  }
  return g;
}

LoglikGradient observed_loglik_gradient(const CellCounts& counts, double gamma, const RaschParams& params,
                                        double exposure_shift) {
  check_counts(counts, params);
  check_gamma(gamma);
  const auto p = cell_probabilities(params, exposure_shift);
  LoglikGradient g;
  g.value = poisson_kernel(counts, gamma, p);
  g.d_params.assign(static_cast<std::size_t>(GradientLayout{params.lists()}.size()), 0.0);
  for (std::uint32_t c = 1; c < p.size(); ++c) {
    if (counts.counts[c] != 0.0) add_cell_log_prob_gradient(params, exposure_shift, c, counts.counts[c], g.d_params);
  }
  // The observed-cell rate terms sum to gamma * (1 - p0).
  add_cell_log_prob_gradient(params, exposure_shift, 0, gamma * p[0], g.d_params);
  g.d_log_gamma = counts.total() - gamma * (1.0 - p[0]);
  return g;
}

// ---- random effects --------------------------------------------------------

namespace {

double log_sum_exp(const std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

void check_re(const RandomEffectsParams& re) {
  if (!std::isfinite(re.mu)) throw ValidationError("random effects: non-finite mu");
  if (!(re.sigma >= 0) || !std::isfinite(re.sigma)) throw ValidationError("random effects: sigma must be >= 0");
}

double effective_sigma(const RandomEffectsParams& re) {
  return std::max(re.sigma, RandomEffectsParams::kSigmaFloor);
}

using NodeFn = std::function<LoglikGradient(double)>;

// Adaptive Gauss-Hermite: the rule is centred at the mode of
// l(t) + log phi(t; centre, sigma) and scaled by its curvature there, so
// a likelihood much narrower than the normal is still resolved.
struct AdaptiveRule {
  double mode = 0.0;
  double scale = 0.0;
};

AdaptiveRule adapt(const NodeFn& f, double centre, double sigma) {
  const std::size_t shift = f(centre).d_params.size() - 1;
  auto slope = [&](double t) { return f(t).d_params[shift] - (t - centre) / (sigma * sigma); };
  double a = centre, b = centre;
  const double s0 = slope(centre);
  double step = sigma;
  if (s0 > 0) {
    for (int i = 0; i < 200 && slope(b) > 0; ++i, step *= 2) b = centre + step;
  } else if (s0 < 0) {
    for (int i = 0; i < 200 && slope(a) < 0; ++i, step *= 2) a = centre - step;
  }
  double mode = centre;
  if (s0 != 0) {
    std::uintmax_t iters = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(
        slope, a, b, boost::math::tools::eps_tolerance<double>(48), iters);
    mode = 0.5 * (lo + hi);
  }
  constexpr double h = 1e-4;
  const double curvature = (f(mode + h).d_params[shift] - f(mode - h).d_params[shift]) / (2 * h);
  const double precision = std::max(1.0 / (sigma * sigma) - curvature, 1e-12);
  return {mode, 1.0 / std::sqrt(precision)};
}

struct NodeTerms {
  std::vector<double> t;
  std::vector<double> log_terms;
  double log_norm = 0.0;
};

// log of integral exp(l(t)) phi(t; centre, sigma) dt on an adapted rule.
double integrate_log(const GaussHermiteRule& rule, const AdaptiveRule& ad, double centre, double sigma,
                     const std::function<double(double)>& value, NodeTerms* keep = nullptr) {
  const std::size_t n = rule.nodes.size();
  NodeTerms nt;
  nt.t.resize(n);
  nt.log_terms.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rule.nodes[i];
    const double t = ad.mode + std::numbers::sqrt2 * ad.scale * x;
    const double z = (t - centre) / sigma;
    nt.t[i] = t;
    nt.log_terms[i] = std::log(rule.weights[i]) + x * x + value(t) - 0.5 * z * z;
  }
  nt.log_norm = log_sum_exp(nt.log_terms);
  const double out = nt.log_norm + std::log(std::numbers::sqrt2 * ad.scale) - std::log(sigma) -
                     0.5 * std::log(2 * std::numbers::pi);
  if (keep) *keep = std::move(nt);
  return out;
}

double checked_integral(const QuadratureOptions& quad, double centre, double sigma, const NodeFn& f) {
  const auto ad = adapt(f, centre, sigma);
  auto value = [&](double t) { return f(t).value; };
  const double coarse = integrate_log(gauss_hermite_cached(quad.nodes), ad, centre, sigma, value);
  const double fine = integrate_log(gauss_hermite_cached(2 * quad.nodes), ad, centre, sigma, value);
  const double delta = std::abs(fine - coarse);
  if (!(delta < quad.tolerance)) throw QuadratureError(delta);
  return fine;
}

// Value and gradient over the fine rule, after checking the coarse one.
// Viewing the adapted nodes as a fixed rule for z = (t - centre) / sigma,
// d/dcentre is the weighted mean of l'(t) and d/dsigma that of l'(t) z.
ReLoglikGradient checked_integral_gradient(const QuadratureOptions& quad, double centre, double sigma, bool exposed,
                                           const NodeFn& f) {
  const auto ad = adapt(f, centre, sigma);
  const auto& fine = gauss_hermite_cached(2 * quad.nodes);
  const std::size_t n = fine.nodes.size();
  std::vector<LoglikGradient> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i] = f(ad.mode + std::numbers::sqrt2 * ad.scale * fine.nodes[i]);
  std::size_t next = 0;
  NodeTerms nt;
  ReLoglikGradient g;
  g.value = integrate_log(fine, ad, centre, sigma, [&](double) { return nodes[next++].value; }, &nt);
  const double coarse = integrate_log(gauss_hermite_cached(quad.nodes), ad, centre, sigma,
                                      [&](double t) { return f(t).value; });
  const double delta = std::abs(g.value - coarse);
  if (!(delta < quad.tolerance)) throw QuadratureError(delta);

  g.d_params.assign(nodes.front().d_params.size(), 0.0);
  const std::size_t shift = g.d_params.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::exp(nt.log_terms[i] - nt.log_norm);
    if (w == 0.0) continue;
    for (std::size_t k = 0; k < shift; ++k) g.d_params[k] += w * nodes[i].d_params[k];
    const double d_theta = nodes[i].d_params[shift];
    if (exposed) g.d_params[shift] += w * d_theta;
    g.d_sigma += w * d_theta * (nt.t[i] - centre) / sigma;
    g.d_log_gamma += w * nodes[i].d_log_gamma;
  }
  return g;
}

}  // namespace

double re_complete_loglik(const ContingencyTable& table, const RaschParams& params, const RandomEffectsParams& re,
                          bool exposed, const QuadratureOptions& quad) {
  check_re(re);
  const auto counts = CellCounts::from(table);
  check_counts(counts, params);
  if (!counts.complete) throw ValidationError("complete table required");
  return checked_integral(quad, exposed ? re.mu : 0.0, effective_sigma(re),
                          [&](double theta) { return complete_loglik_gradient(counts, params, theta); });
}

double re_observed_loglik(const ContingencyTable& table, double gamma, const RaschParams& params,
                          const RandomEffectsParams& re, bool exposed, const QuadratureOptions& quad) {
  check_re(re);
  check_gamma(gamma);
  const auto counts = CellCounts::from(table);
  check_counts(counts, params);
  return checked_integral(quad, exposed ? re.mu : 0.0, effective_sigma(re),
                          [&](double theta) { return observed_loglik_gradient(counts, gamma, params, theta); });
}

ReLoglikGradient re_complete_loglik_gradient(const CellCounts& counts, const RaschParams& params,
                                             const RandomEffectsParams& re, bool exposed,
                                             const QuadratureOptions& quad) {
  check_re(re);
  return checked_integral_gradient(quad, exposed ? re.mu : 0.0, effective_sigma(re), exposed,
                                   [&](double theta) { return complete_loglik_gradient(counts, params, theta); });
}

ReLoglikGradient re_observed_loglik_gradient(const CellCounts& counts, double gamma, const RaschParams& params,
                                             const RandomEffectsParams& re, bool exposed,
                                             const QuadratureOptions& quad) {
  check_re(re);
  return checked_integral_gradient(quad, exposed ? re.mu : 0.0, effective_sigma(re), exposed, [&](double theta) {
    return observed_loglik_gradient(counts, gamma, params, theta);
  });
}

}  // namespace ascertain
