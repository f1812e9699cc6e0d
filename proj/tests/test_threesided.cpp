#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ascertain/error.hpp"
#include "ascertain/threesided.hpp"
#include "support.hpp"

using namespace ascertain;

namespace {

// Quantiles and estimate of the observed-data analysis at alpha = 0.05.
const NullQuantiles kReference{-0.2292, -0.1913, 0.1788, 0.2083};
constexpr double kThetaHat = -0.020;

BootstrapOptions small_options(int replicates, std::uint64_t seed, int threads = 0) {
  BootstrapOptions o;
  o.replicates = replicates;
  o.seed = seed;
  o.fit.multistart = 2;
  o.execution = threads == 1 ? ExecutionPolicy{Execution::serial, 1} : ExecutionPolicy{Execution::parallel, threads};
  return o;
}

}  // namespace

TEST_CASE("type-7 empirical quantiles") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(empirical_quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(empirical_quantile(v, 0.1) == doctest::Approx(1.3));
  CHECK(empirical_quantile(v, 0.0) == 1.0);
  CHECK(empirical_quantile(v, 1.0) == 4.0);
  CHECK(empirical_quantile({7.0}, 0.3) == 7.0);
  CHECK_THROWS_AS(empirical_quantile({}, 0.5), ValidationError);
  CHECK_THROWS_AS(empirical_quantile(v, 1.5), ValidationError);
}

TEST_CASE("decisions on the observed-data quantiles") {
  SUBCASE("small delta rejects nothing") {
    const auto o = decide(kThetaHat, kReference, 0.05, 0.1);
    CHECK_FALSE(o.reject_null);
    CHECK_FALSE(o.reject_plus);
    CHECK_FALSE(o.reject_minus);
  }
  SUBCASE("delta between the thresholds rejects H+ only") {
    const auto o = decide(kThetaHat, kReference, 0.05, 0.18);
    CHECK_FALSE(o.reject_null);
    CHECK(o.reject_plus);
    CHECK_FALSE(o.reject_minus);
  }
  SUBCASE("large delta rejects both one-sided hypotheses") {
    const auto o = decide(kThetaHat, kReference, 0.05, 0.25);
    CHECK_FALSE(o.reject_null);
    CHECK(o.reject_plus);
    CHECK(o.reject_minus);
  }
  const auto t = delta_thresholds(kThetaHat, kReference);
  CHECK(t.delta1 == doctest::Approx(0.1713));
  CHECK(t.delta2 == doctest::Approx(0.1988));
}

TEST_CASE("a large estimate rejects H0 and H-") {
  const auto o = decide(0.5, kReference, 0.05, 0.1);
  CHECK(o.reject_null);
  CHECK(o.reject_minus);
  CHECK_FALSE(o.reject_plus);
  const auto neg = decide(-0.5, kReference, 0.05, 0.1);
  CHECK(neg.reject_null);
  CHECK(neg.reject_plus);
  CHECK_FALSE(neg.reject_minus);
  CHECK_THROWS_AS(decide(0.0, kReference, 0.0, 0.1), ValidationError);
  CHECK_THROWS_AS(decide(0.0, kReference, 0.05, -0.1), ValidationError);
}

TEST_CASE("property: decisions partition and move monotonically with delta") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(0.0, 0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100000; ++trial) {
    std::array<double, 4> q{z(rng), z(rng), z(rng), z(rng)};
    std::sort(q.begin(), q.end());
    const NullQuantiles nq{q[0], q[1], q[2], q[3]};
    const double theta = z(rng), d = u(rng), d_more = d + u(rng);
    const auto a = decide(theta, nq, 0.05, d);
    const auto b = decide(theta, nq, 0.05, d_more);
    // H0 rejection excludes rejecting the hypothesis on the same side
    REQUIRE_FALSE((a.reject_null && a.reject_plus && a.reject_minus));
    REQUIRE((!b.reject_null || a.reject_null));
    REQUIRE((!a.reject_plus || b.reject_plus));
    REQUIRE((!a.reject_minus || b.reject_minus));
    REQUIRE(a.reject_plus == (d > a.thresholds.delta1));
    REQUIRE(a.reject_minus == (d > a.thresholds.delta2));
  }
}

TEST_CASE("interpretation of the observed-data outcome") {
  const auto lines = interpret(decide(kThetaHat, kReference, 0.05, 0.18));
  REQUIRE(lines.size() == 5);
  CHECK(lines[0].find("no delta rejects H0") != std::string::npos);
  CHECK(lines[1].rfind("delta <= 0.1713", 0) == 0);
  CHECK(lines[2].find("reject H+ only; 95% confident that theta <= delta") != std::string::npos);
  CHECK(lines[3].rfind("delta > 0.1988", 0) == 0);
  CHECK(lines[4] == "at delta = 0.1800: reject H+; H0 retained");
}

TEST_CASE("null replicates have the regime's structure") {
  const auto e = testing::observed_exposed(), u = testing::observed_unexposed();
  FitSpec spec;
  spec.variant = FitVariant::incomplete_null_theta;
  const auto null_fit = fit(e, u, spec);
  const auto [re, ru] = simulate_null_replicate(null_fit, e, u, Regime::incomplete, 5, 0, 0);
  CHECK_FALSE(re.complete());
  CHECK_FALSE(ru.complete());
  const auto again = simulate_null_replicate(null_fit, e, u, Regime::incomplete, 5, 0, 0);
  CHECK(again.first == re);
  CHECK_FALSE(simulate_null_replicate(null_fit, e, u, Regime::incomplete, 5, 0, 1).first == re);

  const auto ec = e.completed(85), uc = u.completed(63);
  spec.variant = FitVariant::complete_null_theta;
  const auto cfit = fit(ec, uc, spec);
  const auto [ce, cu] = simulate_null_replicate(cfit, ec, uc, Regime::complete, 5, 3, 0);
  CHECK(ce.complete());
  CHECK(ce.total() == 593);
  CHECK(cu.total() == 476);
  CHECK_THROWS_AS(bootstrap_null(e, u, Regime::complete, small_options(5, 1)), ValidationError);
  CHECK_THROWS_AS(bootstrap_null(e, u, Regime::incomplete, small_options(0, 1)), ValidationError);
}

TEST_CASE("bootstrap is reproducible and identical across execution modes") {
  const auto e = testing::observed_exposed(), u = testing::observed_unexposed();
  const auto par = bootstrap_null(e, u, Regime::incomplete, small_options(40, 17, 4));
  const auto ser = bootstrap_null_serial(e, u, Regime::incomplete, small_options(40, 17, 1));
  const auto rep = bootstrap_null(e, u, Regime::incomplete, small_options(40, 17, 3));
  CHECK(par.draws == ser.draws);
  CHECK(par.draws == rep.draws);
  CHECK(par.requested == 40);
  CHECK(par.draws.size() + static_cast<std::size_t>(par.excluded) == 40);
  CHECK(std::is_sorted(par.sorted.begin(), par.sorted.end()));
  const auto other = bootstrap_null(e, u, Regime::incomplete, small_options(40, 18));
  CHECK_FALSE(other.draws == par.draws);

  std::ostringstream out;
  write_draws(out, par);
  CHECK(out.str().rfind("theta_hat\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : out.str()) lines += c == '\n';
  CHECK(lines == par.draws.size() + 1);
}

TEST_CASE("property: H0 at delta = 0 is rejected at about the nominal rate") {
  const auto e = testing::observed_exposed(), u = testing::observed_unexposed();
  FitSpec spec;
  spec.variant = FitVariant::incomplete_null_theta;
  spec.multistart = 2;
  const auto truth = fit(e, u, spec);
  const int pipelines = 40;
  int rejected = 0;
  for (int i = 0; i < pipelines; ++i) {
    const auto [de, du] = simulate_null_replicate(truth, e, u, Regime::incomplete, 1234, static_cast<std::uint64_t>(i), 0);
    FitSpec free = spec;
    free.variant = FitVariant::incomplete_free_theta;
    const double theta_hat = fit(de, du, free).params.theta;
    const auto dist = bootstrap_null(de, du, Regime::incomplete, small_options(60, 500 + static_cast<std::uint64_t>(i)));
    rejected += decide(theta_hat, dist, 0.05, 0.0).reject_null;
  }
  const double rate = static_cast<double>(rejected) / pipelines;
  CHECK(rate <= 0.05 + 2 * std::sqrt(0.05 * 0.95 / pipelines));
}

TEST_CASE("a symmetric null distribution centred at the estimate gives equal thresholds") {
  NullDistribution d;
  for (int i = -500; i <= 500; ++i) d.sorted.push_back(i / 1000.0);
  const auto t = delta_thresholds(0.0, d, 0.05);
  CHECK(t.delta1 == doctest::Approx(t.delta2));
  CHECK(t.delta1 == doctest::Approx(0.45));
}
