#include "ascertain/threesided.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

#include "ascertain/random.hpp"

namespace ascertain {

const char* to_string(Regime r) noexcept { return r == Regime::incomplete ? "incomplete" : "complete"; }

Regime parse_regime(std::string_view s) {
  if (s == "incomplete") return Regime::incomplete;
  if (s == "complete") return Regime::complete;
  throw ValidationError("unknown regime '" + std::string(s) + "'");
}

double empirical_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile level must be in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

constexpr std::uint64_t kReplicateStream = 0x4e554c4cULL;  // "NULL"

ContingencyTable replicate_table(const ContingencyTable& like, const std::vector<std::int64_t>& cells,
                                 Regime regime) {
  auto t = ContingencyTable::from_counts(like.lists(), Completeness::complete, cells, like.exposure_label());
  return regime == Regime::incomplete ? t.observed_part() : t;
}

FitSpec free_spec(const FitSpec& base, Regime regime) {
  FitSpec s = base;
  s.variant = regime == Regime::incomplete ? FitVariant::incomplete_free_theta : FitVariant::complete_free_theta;
  return s;
}

FitResult fit_null(const ContingencyTable& e, const ContingencyTable& u, Regime regime, const FitSpec& base) {
  FitSpec s = base;
  s.variant = regime == Regime::incomplete ? FitVariant::incomplete_null_theta : FitVariant::complete_null_theta;
  if (regime == Regime::incomplete) return fit(e.observed_part(), u.observed_part(), s);
  if (!e.complete() || !u.complete()) throw ValidationError("complete regime requires complete tables");
  return fit(e, u, s);
}

NullDistribution run_bootstrap(const ContingencyTable& exposed, const ContingencyTable& unexposed, Regime regime,
                               const BootstrapOptions& options, const ExecutionPolicy& policy) {
  if (options.replicates < 1) throw ValidationError("bootstrap needs at least one replicate");
  NullDistribution dist;
  dist.seed = options.seed;
  dist.regime = regime;
  dist.requested = options.replicates;
  dist.null_fit = fit_null(exposed, unexposed, regime, options.fit);

  const FitSpec spec = free_spec(options.fit, regime);
  const auto n = static_cast<std::size_t>(options.replicates);
  std::vector<std::optional<double>> theta(n);
  std::vector<int> attempts(n, 0);

  for_each_index(policy, n, [&](std::size_t b) {
    for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
      attempts[b] = static_cast<int>(attempt) + 1;
      auto [e, u] = simulate_null_replicate(dist.null_fit, exposed, unexposed, regime, options.seed, b, attempt);
      FitSpec s = spec;
      s.seed = options.seed ^ (0x9e3779b97f4a7c15ULL * (b + 1)) ^ attempt;
      try {
        theta[b] = fit(e, u, s).params.theta;
        return;
      } catch (const NumericalError&) {
      } catch (const ValidationError&) {
      }
    }
  });

  for (std::size_t b = 0; b < n; ++b) {
    if (attempts[b] > 1) ++dist.retried;
    if (theta[b]) {
      dist.draws.push_back(*theta[b]);
    } else {
      ++dist.excluded;
    }
  }
  if (dist.excluded > 0 && 100.0 * dist.excluded >= static_cast<double>(n)) {
    throw NumericalError(std::to_string(dist.excluded) + " of " + std::to_string(n) +
                         " bootstrap replicates failed to fit (limit is below 1%)");
  }
  dist.sorted = dist.draws;
  std::sort(dist.sorted.begin(), dist.sorted.end());
  return dist;
}

}  // namespace

std::pair<ContingencyTable, ContingencyTable> simulate_null_replicate(const FitResult& null_fit,
                                                                      const ContingencyTable& exposed,
                                                                      const ContingencyTable& unexposed,
                                                                      Regime regime, std::uint64_t seed,
                                                                      std::uint64_t replicate, std::uint64_t attempt) {
  // Both groups use the unexposed (theta = 0) cell probabilities.
  const auto probs = cell_probabilities(null_fit.params, 0.0);
  Rng rng = substream(seed, {kReplicateStream, replicate, attempt});
  auto draw = [&](const ContingencyTable& observed, double gamma) {
    std::int64_t total;
    if (regime == Regime::incomplete) {
      std::poisson_distribution<std::int64_t> pois(gamma);
      total = pois(rng);
    } else {
      total = observed.total();
    }
    return replicate_table(observed, draw_multinomial(total, probs, rng), regime);
  };
  if (regime == Regime::incomplete) {
    const auto& rates = null_fit.rates.value();
    auto e = draw(exposed, rates.exposed);
    auto u = draw(unexposed, rates.unexposed);
    return {std::move(e), std::move(u)};
  }
  auto e = draw(exposed, 0.0);
  auto u = draw(unexposed, 0.0);
  return {std::move(e), std::move(u)};
}

NullDistribution bootstrap_null(const ContingencyTable& exposed, const ContingencyTable& unexposed, Regime regime,
                                const BootstrapOptions& options) {
  return run_bootstrap(exposed, unexposed, regime, options, options.execution);
}

NullDistribution bootstrap_null_serial(const ContingencyTable& exposed, const ContingencyTable& unexposed,
                                       Regime regime, BootstrapOptions options) {
  return run_bootstrap(exposed, unexposed, regime, options, ExecutionPolicy{Execution::serial, 1});
}

NullQuantiles null_quantiles(const NullDistribution& dist, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw ValidationError("alpha must be in (0, 1)");
  return {dist.quantile(alpha / 2), dist.quantile(alpha), dist.quantile(1 - alpha), dist.quantile(1 - alpha / 2)};
}

DeltaThresholds delta_thresholds(double theta_hat, const NullQuantiles& q) {
  return {theta_hat - q.lower, q.upper - theta_hat};
}

DeltaThresholds delta_thresholds(double theta_hat, const NullDistribution& dist, double alpha) {
  return delta_thresholds(theta_hat, null_quantiles(dist, alpha));
}

ThreeSidedOutcome decide(double theta_hat, const NullQuantiles& q, double alpha, double delta) {
  if (!(alpha > 0 && alpha < 1)) throw ValidationError("alpha must be in (0, 1)");
  if (!(delta >= 0)) throw ValidationError("delta must be non-negative");
  ThreeSidedOutcome o;
  o.theta_hat = theta_hat;
  o.alpha = alpha;
  o.delta = delta;
  o.quantiles = q;
  o.thresholds = delta_thresholds(theta_hat, q);
  o.reject_plus = theta_hat - delta < q.lower;
  o.reject_minus = theta_hat + delta > q.upper;
  o.reject_null = theta_hat - delta > q.upper_half || theta_hat + delta < q.lower_half;
  return o;
}

ThreeSidedOutcome decide(double theta_hat, const NullDistribution& dist, double alpha, double delta) {
  return decide(theta_hat, null_quantiles(dist, alpha), alpha, delta);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::vector<std::string> interpret(const ThreeSidedOutcome& o) {
  std::vector<std::string> lines;
  const auto& q = o.quantiles;
  const double d1 = o.thresholds.delta1, d2 = o.thresholds.delta2;
  const double null_bound = std::max(o.theta_hat - q.upper_half, q.lower_half - o.theta_hat);
  const int pct = static_cast<int>(std::lround(100 * (1 - o.alpha)));

  if (null_bound <= 0) {
    lines.push_back("theta_hat lies in [q_{alpha/2}, q_{1-alpha/2}], so no delta rejects H0");
  } else {
    lines.push_back("H0 is rejected for every delta < " + fmt(null_bound));
  }
  if (d1 > 0 && d2 > 0) {
    const bool plus_first = d1 <= d2;
    const double lo = std::min(d1, d2), hi = std::max(d1, d2);
    lines.push_back("delta <= " + fmt(lo) + ": no hypothesis among H+ and H- is rejected");
    if (lo < hi) {
      lines.push_back("delta in (" + fmt(lo) + ", " + fmt(hi) + "]: reject " + (plus_first ? "H+" : "H-") +
                      " only; " + std::to_string(pct) + "% confident that theta " +
                      (plus_first ? "<= delta" : ">= -delta"));
    }
    lines.push_back("delta > " + fmt(hi) + ": reject both H+ and H-; " + std::to_string(pct) +
                    "% confident that -delta <= theta <= delta");
  } else {
    lines.push_back("H+ is rejected for delta > " + fmt(d1) + "; H- is rejected for delta > " + fmt(d2));
  }
  std::string at = "at delta = " + fmt(o.delta) + ": ";
  std::vector<std::string> rejected;
  if (o.reject_null) rejected.push_back("H0");
  if (o.reject_plus) rejected.push_back("H+");
  if (o.reject_minus) rejected.push_back("H-");
  if (rejected.empty()) {
    at += "no hypothesis rejected";
  } else {
    at += "reject";
    for (const auto& r : rejected) at += " " + r;
    if (!o.reject_null) at += "; H0 retained";
  }
  lines.push_back(at);
  return lines;
}

void write_draws(std::ostream& out, const NullDistribution& dist) {
  out << "theta_hat\n";
  char buf[40];
  for (double d : dist.draws) {
    std::snprintf(buf, sizeof buf, "%.17g\n", d);
    out << buf;
  }
}

}  // namespace ascertain
