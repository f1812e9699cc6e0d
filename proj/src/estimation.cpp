#include "ascertain/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ascertain/random.hpp"

namespace ascertain {

const char* to_string(FitVariant v) noexcept {
  switch (v) {
    case FitVariant::incomplete_free_theta: return "incomplete-free-theta";
    case FitVariant::incomplete_null_theta: return "incomplete-null-theta";
    case FitVariant::complete_free_theta: return "complete-free-theta";
    case FitVariant::complete_null_theta: return "complete-null-theta";
    case FitVariant::re_complete: return "re-complete";
    case FitVariant::re_incomplete: return "re-incomplete";
  }
  return "?";
}

FitVariant parse_fit_variant(std::string_view s) {
  for (auto v : {FitVariant::incomplete_free_theta, FitVariant::incomplete_null_theta,
                 FitVariant::complete_free_theta, FitVariant::complete_null_theta, FitVariant::re_complete,
                 FitVariant::re_incomplete}) {
    if (s == to_string(v)) return v;
  }
  throw ValidationError("unknown fit variant '" + std::string(s) + "'");
}

bool is_incomplete(FitVariant v) noexcept {
  return v == FitVariant::incomplete_free_theta || v == FitVariant::incomplete_null_theta ||
         v == FitVariant::re_incomplete;
}

bool is_random_effects(FitVariant v) noexcept {
  return v == FitVariant::re_complete || v == FitVariant::re_incomplete;
}

bool has_free_shift(FitVariant v) noexcept {
  return v != FitVariant::incomplete_null_theta && v != FitVariant::complete_null_theta;
}

double profile_gamma(double observed_total, double miss_probability) {
  if (!(miss_probability < 1.0)) throw NumericalError("profile_gamma: miss probability is 1");
  return observed_total / (1.0 - miss_probability);
}

double profile_gamma(const ContingencyTable& observed, const RaschParams& params, double exposure_shift) {
  return profile_gamma(static_cast<double>(observed.observed_part().total()), miss_probability(params, exposure_shift));
}

double odds_ratio(double n_exposed, double n_unexposed, double t_exposed, double t_unexposed, bool rare) {
  if (rare) {
    if (n_unexposed == 0 || t_exposed == 0) throw ValidationError("odds_ratio: zero denominator");
    return (n_exposed / n_unexposed) * (t_unexposed / t_exposed);
  }
  if (!(n_exposed < t_exposed) || !(n_unexposed < t_unexposed)) {
    throw ValidationError("odds_ratio: case counts must be below group totals");
  }
  if (n_unexposed == 0) throw ValidationError("odds_ratio: zero denominator");
  return n_exposed * (t_unexposed - n_unexposed) / (n_unexposed * (t_exposed - n_exposed));
}

namespace {

constexpr double kPinnedAlpha = -40.0;

// Maps the working vector to model parameters. Unidentified coordinates are
// pinned rather than optimized.
struct Packing {
  int lists = 0;
  CaptureModel model = CaptureModel::dynamic;
  FitVariant variant = FitVariant::incomplete_free_theta;
  std::vector<bool> estimable;
  std::vector<int> alpha_pos, pair_pos;
  int shift_pos = -1, log_sigma_pos = -1;
  int log_gamma_pos[2] = {-1, -1};
  int size = 0;

  Packing(int j, CaptureModel m, FitVariant v, std::vector<bool> est)
      : lists(j), model(m), variant(v), estimable(std::move(est)) {
    for (int k = 0; k < lists; ++k) alpha_pos.push_back(estimable[static_cast<std::size_t>(k)] ? size++ : -1);
    pair_pos.assign(static_cast<std::size_t>(pair_count(lists)), -1);
    if (model == CaptureModel::dynamic) {
      for (int a = 0; a < lists; ++a)
        for (int b = a + 1; b < lists; ++b)
          if (estimable[static_cast<std::size_t>(a)] && estimable[static_cast<std::size_t>(b)])
            pair_pos[static_cast<std::size_t>(pair_index(lists, a, b))] = size++;
    }
    if (has_free_shift(variant)) shift_pos = size++;
    if (is_random_effects(variant)) log_sigma_pos = size++;
    if (variant == FitVariant::re_incomplete) {
      log_gamma_pos[0] = size++;
      log_gamma_pos[1] = size++;
    }
  }

  RaschParams params(const Eigen::VectorXd& x) const {
    RaschParams p;
    p.model = model;
    p.alpha.assign(static_cast<std::size_t>(lists), kPinnedAlpha);
    p.alpha2.assign(static_cast<std::size_t>(pair_count(lists)), 0.0);
    for (int k = 0; k < lists; ++k)
      if (alpha_pos[static_cast<std::size_t>(k)] >= 0) p.alpha[static_cast<std::size_t>(k)] = x(alpha_pos[static_cast<std::size_t>(k)]);
    for (std::size_t q = 0; q < pair_pos.size(); ++q)
      if (pair_pos[q] >= 0) p.alpha2[q] = x(pair_pos[q]);
    if (shift_pos >= 0 && !is_random_effects(variant)) p.theta = x(shift_pos);
    return p;
  }

  RandomEffectsParams random_effects(const Eigen::VectorXd& x) const {
    return {x(shift_pos), RandomEffectsParams::kSigmaFloor + std::exp(x(log_sigma_pos))};
  }

  // Scatters a GradientLayout vector into the working gradient.
  void add_params_gradient(const std::vector<double>& d, bool use_shift, Eigen::VectorXd& grad) const {
    const GradientLayout layout{lists};
    for (int k = 0; k < lists; ++k)
      if (alpha_pos[static_cast<std::size_t>(k)] >= 0) grad(alpha_pos[static_cast<std::size_t>(k)]) += d[static_cast<std::size_t>(layout.alpha(k))];
    for (std::size_t q = 0; q < pair_pos.size(); ++q)
      if (pair_pos[q] >= 0) grad(pair_pos[q]) += d[static_cast<std::size_t>(layout.pair(static_cast<int>(q)))];
    if (use_shift && shift_pos >= 0) grad(shift_pos) += d[static_cast<std::size_t>(layout.shift())];
  }
};

struct Problem {
  const CellCounts* groups[2];  // exposed, unexposed
  Packing packing;
  QuadratureOptions quad;

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    grad.setZero(x.size());
    const RaschParams params = packing.params(x);
    double value = 0.0;
    for (int g = 0; g < 2; ++g) {
      const bool exposed = g == 0;
      const CellCounts& counts = *groups[g];
      switch (packing.variant) {
        case FitVariant::incomplete_free_theta:
        case FitVariant::incomplete_null_theta: {
          const double shift = exposed ? params.theta : 0.0;
          // Profiled gamma: the log-gamma derivative vanishes there, so the
          // remaining gradient is that of the profile likelihood.
          const double gamma = profile_gamma(counts.total(), miss_probability(params, shift));
          const auto lg = observed_loglik_gradient(counts, gamma, params, shift);
          value += lg.value;
          packing.add_params_gradient(lg.d_params, exposed, grad);
          break;
        }
        case FitVariant::complete_free_theta:
        case FitVariant::complete_null_theta: {
          const auto lg = complete_loglik_gradient(counts, params, exposed ? params.theta : 0.0);
          value += lg.value;
          packing.add_params_gradient(lg.d_params, exposed, grad);
          break;
        }
        case FitVariant::re_complete:
        case FitVariant::re_incomplete: {
          const auto re = packing.random_effects(x);
          const auto lg = packing.variant == FitVariant::re_complete
                              ? re_complete_loglik_gradient(counts, params, re, exposed, quad)
                              : re_observed_loglik_gradient(counts, std::exp(x(packing.log_gamma_pos[g])), params,
                                                            re, exposed, quad);
          value += lg.value;
          packing.add_params_gradient(lg.d_params, exposed, grad);
          grad(packing.log_sigma_pos) += lg.d_sigma * (re.sigma - RandomEffectsParams::kSigmaFloor);
          if (packing.log_gamma_pos[g] >= 0) grad(packing.log_gamma_pos[g]) += lg.d_log_gamma;
          break;
        }
      }
    }
    return value;
  }
};

void validate_inputs(const CellCounts& e, const CellCounts& u, const FitSpec& spec) {
  if (e.lists != u.lists) throw ValidationError("exposed and unexposed tables have different numbers of lists");
  if (e.lists < 1) throw ValidationError("tables must have at least one list");
  const bool want_complete = !is_incomplete(spec.variant);
  for (const CellCounts* c : {&e, &u}) {
    if (c->complete != want_complete) {
      throw ValidationError(std::string("variant ") + to_string(spec.variant) + " requires " +
                            (want_complete ? "complete tables" : "tables with the all-zero cell missing"));
    }
    if (c->counts.size() != (std::size_t{1} << c->lists)) throw ValidationError("malformed cell counts");
    for (double m : c->counts)
      if (!(m >= 0) || !std::isfinite(m)) throw ValidationError("cell counts must be finite and non-negative");
    if (!(c->total() > 0)) throw ValidationError("each group needs at least one positive count");
  }
  if (spec.multistart < 1) throw ValidationError("multistart must be at least 1");
}

std::vector<bool> estimable_lists(const CellCounts& e, const CellCounts& u) {
  std::vector<bool> out(static_cast<std::size_t>(e.lists), false);
  for (const CellCounts* c : {&e, &u}) {
    for (std::uint32_t i = 1; i < c->counts.size(); ++i) {
      if (c->counts[i] <= 0) continue;
      for (int k = 0; k < c->lists; ++k)
        if ((i >> (c->lists - 1 - k)) & 1u) out[static_cast<std::size_t>(k)] = true;
    }
  }
  return out;
}

Eigen::VectorXd moment_start(const Packing& packing, const CellCounts& e, const CellCounts& u) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(packing.size);
  for (int k = 0; k < packing.lists; ++k) {
    const int pos = packing.alpha_pos[static_cast<std::size_t>(k)];
    if (pos < 0) continue;
    double captured = 0.0, total = 0.0;
    for (const CellCounts* c : {&e, &u}) {
      for (std::uint32_t i = c->complete ? 0 : 1; i < c->counts.size(); ++i) {
        total += c->counts[i];
        if ((i >> (c->lists - 1 - k)) & 1u) captured += c->counts[i];
      }
    }
    const double f = (captured + 0.5) / (total + 1.0);
    x(pos) = std::log(f / (1.0 - f));
  }
  return x;
}

FitResult make_result(const Problem& problem, const OptimizeResult& opt) {
  const Packing& pk = problem.packing;
  const CellCounts& e = *problem.groups[0];
  const CellCounts& u = *problem.groups[1];
  FitResult r;
  r.variant = pk.variant;
  r.params = pk.params(opt.x);
  r.loglik = opt.value;
  r.converged = opt.converged;
  r.gradient_norm = opt.gradient_norm;
  r.iterations = opt.iterations;
  r.estimable = pk.estimable;

  double shift_e = r.params.theta;
  if (is_random_effects(pk.variant)) {
    r.random_effects = pk.random_effects(opt.x);
    shift_e = r.random_effects->mu;
  }
  auto& d = r.derived;
  d.miss_probability_exposed = miss_probability(r.params, shift_e);
  d.miss_probability_unexposed = miss_probability(r.params, 0.0);
  if (is_incomplete(pk.variant)) {
    PoissonRates rates;
    if (pk.variant == FitVariant::re_incomplete) {
      rates = {std::exp(opt.x(pk.log_gamma_pos[0])), std::exp(opt.x(pk.log_gamma_pos[1]))};
    } else {
      rates = {profile_gamma(e.total(), d.miss_probability_exposed), profile_gamma(u.total(), d.miss_probability_unexposed)};
    }
    r.rates = rates;
    d.expected_missing_exposed = rates.exposed * d.miss_probability_exposed;
    d.expected_missing_unexposed = rates.unexposed * d.miss_probability_unexposed;
    d.ratio = rates.exposed / rates.unexposed;
  } else {
    d.expected_missing_exposed = e.total() * d.miss_probability_exposed;
    d.expected_missing_unexposed = u.total() * d.miss_probability_unexposed;
    d.ratio = e.total() / u.total();
  }
  for (int k = 0; k < pk.lists; ++k) {
    if (!pk.estimable[static_cast<std::size_t>(k)]) {
      r.warnings.push_back("list " + std::to_string(k + 1) + " captured nobody; its strength is not estimable");
    }
  }
  return r;
}

FitSpec fixed_effects_counterpart(const FitSpec& spec) {
  FitSpec fe = spec;
  fe.variant = spec.variant == FitVariant::re_complete ? FitVariant::complete_free_theta
                                                       : FitVariant::incomplete_free_theta;
  return fe;
}

}  // namespace

FitResult fit_counts(const CellCounts& exposed, const CellCounts& unexposed, const FitSpec& spec) {
  validate_inputs(exposed, unexposed, spec);
  const int lists = exposed.lists;
  Problem problem{{&exposed, &unexposed}, Packing(lists, spec.model, spec.variant, estimable_lists(exposed, unexposed)),
                  spec.quadrature};
  const Packing& pk = problem.packing;

  const int observations = 2 * ((1 << lists) - 1);
  const int parameters = pk.size + (is_incomplete(spec.variant) && !is_random_effects(spec.variant) ? 2 : 0);
  if (parameters > observations) {
    throw ValidationError("model not identified: " + std::to_string(parameters) + " parameters for " +
                          std::to_string(observations) + " free cells");
  }

  Eigen::VectorXd base;
  if (is_random_effects(spec.variant)) {
    // Random-effects fits start from the matching fixed-effects optimum.
    const FitResult fe = fit_counts(exposed, unexposed, fixed_effects_counterpart(spec));
    base = Eigen::VectorXd::Zero(pk.size);
    for (int k = 0; k < lists; ++k)
      if (pk.alpha_pos[static_cast<std::size_t>(k)] >= 0) base(pk.alpha_pos[static_cast<std::size_t>(k)]) = fe.params.alpha[static_cast<std::size_t>(k)];
    for (std::size_t q = 0; q < pk.pair_pos.size(); ++q)
      if (pk.pair_pos[q] >= 0) base(pk.pair_pos[q]) = fe.params.alpha2[q];
    base(pk.shift_pos) = fe.params.theta;
    base(pk.log_sigma_pos) = std::log(0.05);
    if (fe.rates) {
      base(pk.log_gamma_pos[0]) = std::log(fe.rates->exposed);
      base(pk.log_gamma_pos[1]) = std::log(fe.rates->unexposed);
    }
  } else {
    base = moment_start(pk, exposed, unexposed);
  }

  std::optional<OptimizeResult> best;
  int best_start = 0;
  std::optional<OptimizeResult> best_any;
  for (int s = 0; s < spec.multistart; ++s) {
    Eigen::VectorXd start = base;
    if (s > 0) {
      Rng rng = substream(spec.seed, {0x5354415254ULL, static_cast<std::uint64_t>(s)});
      std::normal_distribution<double> jitter(0.0, spec.jitter_sd);
      for (Eigen::Index i = 0; i < start.size(); ++i) start(i) += jitter(rng);
    }
    OptimizeResult opt;
    try {
      opt = maximize_bfgs(std::cref(problem), start, spec.optimizer);
    } catch (const NumericalError&) {
      continue;
    }
    if (!best_any || opt.value > best_any->value) best_any = opt;
    if (opt.converged && (!best || opt.value > best->value)) {
      best = opt;
      best_start = s;
    }
  }
  if (!best) {
    if (!best_any) throw NumericalError("fit failed: objective not finite at any start");
    FitResult r = make_result(problem, *best_any);
    r.starts_run = spec.multistart;
    throw FitError("fit did not converge after " + std::to_string(spec.multistart) +
                       " starts (best gradient sup-norm " + std::to_string(best_any->gradient_norm) + ")",
                   std::move(r));
  }
  FitResult r = make_result(problem, *best);
  r.starts_run = spec.multistart;
  r.best_start = best_start;
  return r;
}

FitResult fit(const ContingencyTable& exposed, const ContingencyTable& unexposed, const FitSpec& spec) {
  return fit_counts(CellCounts::from(exposed), CellCounts::from(unexposed), spec);
}

double evaluate_loglik(const ContingencyTable& exposed, const ContingencyTable& unexposed, const FitResult& r,
                       const QuadratureOptions& quad) {
  switch (r.variant) {
    case FitVariant::incomplete_free_theta:
    case FitVariant::incomplete_null_theta:
      return joint_loglik(exposed, unexposed, r.rates.value(), r.params);
    case FitVariant::complete_free_theta:
    case FitVariant::complete_null_theta:
      return complete_loglik(exposed, r.params, r.params.theta) + complete_loglik(unexposed, r.params, 0.0);
    case FitVariant::re_complete:
      return re_complete_loglik(exposed, r.params, r.random_effects.value(), true, quad) +
             re_complete_loglik(unexposed, r.params, r.random_effects.value(), false, quad);
    case FitVariant::re_incomplete:
      return re_observed_loglik(exposed, r.rates->exposed, r.params, r.random_effects.value(), true, quad) +
             re_observed_loglik(unexposed, r.rates->unexposed, r.params, r.random_effects.value(), false, quad);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace ascertain
