#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "ascertain/error.hpp"
#include "ascertain/likelihood.hpp"
#include "ascertain/quadrature.hpp"
#include "support.hpp"

using namespace ascertain;

namespace {

const RaschParams kParams =
    RaschParams::dynamic({-0.0996, 0.0593, -0.9612}, {0.8305, 1.0619, 2.2246}, -0.02);

double log_poisson(double n, double mean) { return n * std::log(mean) - mean - std::lgamma(n + 1); }

// Observed-data likelihood as the sum over the unseen count m of
// P(N = N_obs + m) times the multinomial probability of the full table.
double series_observed_loglik(const ContingencyTable& t, double gamma, const RaschParams& p, double shift) {
  const auto probs = cell_probabilities(p, shift);
  const double n_obs = static_cast<double>(t.total());
  std::vector<double> terms;
  for (int m = 0; m < 20000; ++m) {
    const double n = n_obs + m;
    double lp = log_poisson(n, gamma) + std::lgamma(n + 1) - std::lgamma(m + 1.0) + m * std::log(probs[0]);
    for (std::uint32_t c = 1; c < probs.size(); ++c) {
      const double k = static_cast<double>(t.count(c));
      lp += k * std::log(probs[c]) - std::lgamma(k + 1);
    }
    terms.push_back(lp);
    if (m > 50 && lp < terms.front() - 60 && lp < terms[terms.size() - 2]) break;
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double v : terms) s += std::exp(v - top);
  return top + std::log(s);
}

double multinomial_oracle(const std::vector<std::int64_t>& counts, const std::vector<double>& probs) {
  double n = 0.0, v = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    n += static_cast<double>(counts[c]);
    v += static_cast<double>(counts[c]) * std::log(probs[c]) - std::lgamma(static_cast<double>(counts[c]) + 1);
  }
  return v + std::lgamma(n + 1);
}

// log of the integral of exp(f(t)) against N(centre, sigma^2), by the
// trapezoid rule over +/- 10 sigma.
double grid_log_integral(const std::function<double(double)>& f, double centre, double sigma, int points = 20001) {
  std::vector<double> v(static_cast<std::size_t>(points));
  const double lo = centre - 10 * sigma, h = 20 * sigma / (points - 1);
  for (int i = 0; i < points; ++i) {
    const double t = lo + i * h;
    const double z = (t - centre) / sigma;
    v[static_cast<std::size_t>(i)] = f(t) - 0.5 * z * z - std::log(sigma * std::sqrt(2 * std::numbers::pi));
  }
  const double top = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (int i = 0; i < points; ++i) s += (i == 0 || i == points - 1 ? 0.5 : 1.0) * std::exp(v[static_cast<std::size_t>(i)] - top);
  return top + std::log(s * h);
}

}  // namespace

TEST_CASE("Poisson closed form equals the series over the unseen count") {
  const auto e = testing::observed_exposed();
  for (double gamma : {520.0, 626.3, 800.0}) {
    for (double shift : {-0.5, -0.02, 0.3}) {
      const double closed = observed_loglik(e, gamma, kParams, shift);
      const double series = series_observed_loglik(e, gamma, kParams, shift);
      CHECK(std::abs(closed - series) < 1e-10);
    }
  }
}

TEST_CASE("complete likelihood matches the multinomial formula") {
  const auto t = testing::observed_exposed().completed(85);
  const auto probs = cell_probabilities(kParams, -0.02);
  CHECK(complete_loglik(t, kParams, -0.02) == doctest::Approx(multinomial_oracle(t.dense(), probs)).epsilon(1e-12));
  CHECK_THROWS_AS(complete_loglik(testing::observed_exposed(), kParams, 0.0), ValidationError);
  CHECK_THROWS_AS(observed_loglik(testing::observed_exposed(), 0.0, kParams, 0.0), ValidationError);
}

TEST_CASE("complete likelihood sums to one over all tables of a small size") {
  const auto p = RaschParams::dynamic({0.3, -0.4}, {0.7}, 0.1);
  const int n = 5;
  double total = 0.0;
  for (int a = 0; a <= n; ++a)
    for (int b = 0; a + b <= n; ++b)
      for (int c = 0; a + b + c <= n; ++c) {
        const auto t = ContingencyTable::from_counts(2, Completeness::complete, {a, b, c, n - a - b - c});
        total += std::exp(complete_loglik(t, p, p.theta));
      }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fixed-effect gradients match central differences") {
  const auto e = CellCounts::from(testing::observed_exposed());
  const auto c = CellCounts::from(testing::observed_exposed().completed(85));
  const GradientLayout layout{3};
  const double gamma = 640.0;
  auto bumped = [&](int slot, double h) {
    RaschParams q = kParams;
    if (slot < 3) q.alpha[static_cast<std::size_t>(slot)] += h;
    else if (slot < layout.shift()) q.alpha2[static_cast<std::size_t>(slot - 3)] += h;
    else q.theta += h;
    return q;
  };
  const auto go = observed_loglik_gradient(e, gamma, kParams, kParams.theta);
  const auto gc = complete_loglik_gradient(c, kParams, kParams.theta);
  CHECK(go.value == doctest::Approx(observed_loglik(e, gamma, kParams, kParams.theta)).epsilon(1e-12));
  CHECK(gc.value == doctest::Approx(complete_loglik(c, kParams, kParams.theta)).epsilon(1e-12));
  const double h = 1e-5;
  for (int slot = 0; slot < layout.size(); ++slot) {
    const auto qp = bumped(slot, h), qm = bumped(slot, -h);
    const double fo = (observed_loglik(e, gamma, qp, qp.theta) - observed_loglik(e, gamma, qm, qm.theta)) / (2 * h);
    const double fc = (complete_loglik(c, qp, qp.theta) - complete_loglik(c, qm, qm.theta)) / (2 * h);
    const double ao = go.d_params[static_cast<std::size_t>(slot)], ac = gc.d_params[static_cast<std::size_t>(slot)];
    CHECK(std::abs(fo - ao) <= 1e-5 * std::max(1.0, std::abs(ao)));
    CHECK(std::abs(fc - ac) <= 1e-5 * std::max(1.0, std::abs(ac)));
  }
  const double fg = (observed_loglik(e, gamma * std::exp(h), kParams, kParams.theta) -
                     observed_loglik(e, gamma * std::exp(-h), kParams, kParams.theta)) / (2 * h);
  CHECK(std::abs(fg - go.d_log_gamma) <= 1e-5 * std::max(1.0, std::abs(fg)));
}

TEST_CASE("Gauss-Hermite rules integrate even monomials exactly") {
  for (int n : {5, 20, 40, 80}) {
    const auto& rule = gauss_hermite_cached(n);
    REQUIRE(rule.nodes.size() == static_cast<std::size_t>(n));
    for (int k = 0; 2 * k <= std::min(2 * n - 1, 20); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], 2 * k);
      CHECK(s == doctest::Approx(std::tgamma(k + 0.5)).epsilon(1e-10));
    }
  }
}

TEST_CASE("random-effects complete likelihood matches a fine grid") {
  const auto t = testing::observed_exposed().completed(85);
  for (double sigma : {0.05, 0.3, 0.8}) {
    for (bool exposed : {true, false}) {
      const RandomEffectsParams re{-0.04, sigma};
      const double centre = exposed ? re.mu : 0.0;
      const double quad = re_complete_loglik(t, kParams, re, exposed);
      const double grid = grid_log_integral([&](double s) { return complete_loglik(t, kParams, s); }, centre, sigma);
      CHECK(std::abs(quad - grid) < 1e-8);
    }
  }
}

TEST_CASE("random-effects observed likelihood matches the double sum and integral") {
  const auto t = testing::observed_exposed();
  const double gamma = 630.0;
  for (double sigma : {0.1, 0.5}) {
    const RandomEffectsParams re{-0.02, sigma};
    const double quad = re_observed_loglik(t, gamma, kParams, re, true);
    const double oracle =
        grid_log_integral([&](double s) { return series_observed_loglik(t, gamma, kParams, s); }, re.mu, sigma, 4001);
    CHECK(std::abs(quad - oracle) < 1e-8);
  }
}

TEST_CASE("tiny sigma reduces to the fixed-effect likelihood") {
  const auto t = testing::observed_exposed();
  const RandomEffectsParams re{-0.02, RandomEffectsParams::kSigmaFloor};
  CHECK(re_observed_loglik(t, 626.0, kParams, re, true) ==
        doctest::Approx(observed_loglik(t, 626.0, kParams, -0.02)).epsilon(1e-9));
}

TEST_CASE("random-effects gradients match central differences") {
  const auto obs = CellCounts::from(testing::observed_exposed());
  const auto full = CellCounts::from(testing::observed_exposed().completed(85));
  const RandomEffectsParams re{-0.05, 0.3};
  const double gamma = 640.0, h = 1e-5;
  const GradientLayout layout{3};
  auto value = [&](const RaschParams& p, const RandomEffectsParams& r, double g, bool complete) {
    return complete ? re_complete_loglik_gradient(full, p, r, true).value
                    : re_observed_loglik_gradient(obs, g, p, r, true).value;
  };
  for (bool complete : {true, false}) {
    const auto g = complete ? re_complete_loglik_gradient(full, kParams, re, true)
                            : re_observed_loglik_gradient(obs, gamma, kParams, re, true);
    for (int slot = 0; slot < layout.shift(); ++slot) {
      RaschParams qp = kParams, qm = kParams;
      auto& vp = slot < 3 ? qp.alpha[static_cast<std::size_t>(slot)] : qp.alpha2[static_cast<std::size_t>(slot - 3)];
      auto& vm = slot < 3 ? qm.alpha[static_cast<std::size_t>(slot)] : qm.alpha2[static_cast<std::size_t>(slot - 3)];
      vp += h;
      vm -= h;
      const double fd = (value(qp, re, gamma, complete) - value(qm, re, gamma, complete)) / (2 * h);
      CHECK(std::abs(fd - g.d_params[static_cast<std::size_t>(slot)]) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
    const double fmu = (value(kParams, {re.mu + h, re.sigma}, gamma, complete) -
                        value(kParams, {re.mu - h, re.sigma}, gamma, complete)) / (2 * h);
    CHECK(std::abs(fmu - g.d_params[static_cast<std::size_t>(layout.shift())]) <= 1e-5 * std::max(1.0, std::abs(fmu)));
    const double fs = (value(kParams, {re.mu, re.sigma + h}, gamma, complete) -
                       value(kParams, {re.mu, re.sigma - h}, gamma, complete)) / (2 * h);
    CHECK(std::abs(fs - g.d_sigma) <= 1e-5 * std::max(1.0, std::abs(fs)));
    if (!complete) {
      const double fg = (value(kParams, re, gamma * std::exp(h), false) - value(kParams, re, gamma * std::exp(-h), false)) /
                        (2 * h);
      CHECK(std::abs(fg - g.d_log_gamma) <= 1e-5 * std::max(1.0, std::abs(fg)));
    }
  }
}

TEST_CASE("an unresolved integral raises a quadrature error") {
  const auto t = testing::observed_exposed().completed(85);
  QuadratureOptions coarse;
  coarse.nodes = 3;
  CHECK_THROWS_AS(re_complete_loglik(t, kParams, {0.0, 2.0}, true, coarse), QuadratureError);
}
