#include <doctest.h>

#include <cmath>
#include <random>

#include "ascertain/error.hpp"
#include "ascertain/rasch.hpp"

using namespace ascertain;

namespace {

RaschParams random_params(std::mt19937_64& rng, int lists, CaptureModel model, double scale = 2.0) {
  std::normal_distribution<double> z(0.0, scale);
  std::vector<double> alpha(static_cast<std::size_t>(lists)), alpha2(static_cast<std::size_t>(pair_count(lists)));
  for (auto& a : alpha) a = z(rng);
  if (model == CaptureModel::independent) return RaschParams::independent(alpha, z(rng));
  for (auto& a : alpha2) a = z(rng);
  return RaschParams::dynamic(alpha, alpha2, z(rng));
}

// Direct transcription of the sequential capture model: list k captures with
// probability 1 / (1 + exp(-(shift + alpha_k + sum_{j<k} alpha_jk x_j))).
double oracle_cell(const RaschParams& p, double shift, std::uint32_t index) {
  const int lists = p.lists();
  std::vector<int> x(static_cast<std::size_t>(lists));
  for (int k = 0; k < lists; ++k) x[static_cast<std::size_t>(k)] = (index >> (lists - 1 - k)) & 1u;
  double prob = 1.0;
  for (int k = 0; k < lists; ++k) {
    double eta = shift + p.alpha[static_cast<std::size_t>(k)];
    if (p.model == CaptureModel::dynamic)
      for (int j = 0; j < k; ++j) eta += p.interaction(j, k) * x[static_cast<std::size_t>(j)];
    const double q = 1.0 / (1.0 + std::exp(-eta));
    prob *= x[static_cast<std::size_t>(k)] ? q : 1.0 - q;
  }
  return prob;
}

}  // namespace

TEST_CASE("pair index enumerates pairs in order") {
  for (int lists = 2; lists <= 6; ++lists) {
    int expected = 0;
    for (int j = 0; j < lists; ++j)
      for (int k = j + 1; k < lists; ++k) CHECK(pair_index(lists, j, k) == expected++);
    CHECK(expected == pair_count(lists));
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(RaschParams::dynamic({0.1, 0.2, 0.3}, {0.1}), ValidationError);
  CHECK_THROWS_AS(RaschParams::independent({NAN}), ValidationError);
  CHECK_THROWS_AS(parse_capture_model("loglinear"), ValidationError);
  CHECK(parse_capture_model("dynamic") == CaptureModel::dynamic);
}

TEST_CASE("cell probabilities match the sequential oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int lists = 1 + trial % 6;
    const auto model = trial % 2 ? CaptureModel::dynamic : CaptureModel::independent;
    const auto p = random_params(rng, lists, model);
    const auto probs = cell_probabilities(p, p.theta);
    for (std::uint32_t c = 0; c < probs.size(); ++c) {
      CHECK(probs[c] == doctest::Approx(oracle_cell(p, p.theta, c)).epsilon(1e-12));
      CHECK(cell_probability(p, p.theta, CapturePattern(lists, c)) == doctest::Approx(probs[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("property: probabilities sum to one") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int lists = 1 + trial % 8;
    const auto p = random_params(rng, lists, trial % 3 ? CaptureModel::dynamic : CaptureModel::independent, 3.0);
    double sum = 0.0;
    for (double v : cell_probabilities(p, p.theta)) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("extreme parameters stay finite") {
  const auto p = RaschParams::dynamic({60.0, -60.0, 0.0}, {45.0, -45.0, 80.0}, 0.0);
  for (double shift : {-100.0, 0.0, 100.0}) {
    double sum = 0.0;
    for (std::uint32_t c = 0; c < 8; ++c) {
      const double lp = cell_log_probability(p, shift, CapturePattern(3, c));
      CHECK_FALSE(std::isnan(lp));
      sum += std::exp(lp);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("property: dynamic model with zero interactions equals independent") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int lists = 1 + trial % 6;
    auto ind = random_params(rng, lists, CaptureModel::independent);
    auto dyn = RaschParams::dynamic(ind.alpha, std::vector<double>(static_cast<std::size_t>(pair_count(lists)), 0.0),
                                    ind.theta);
    const auto a = cell_probabilities(ind, ind.theta);
    const auto b = cell_probabilities(dyn, dyn.theta);
    for (std::size_t c = 0; c < a.size(); ++c) CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-14));
  }
}

TEST_CASE("miss probability is the all-zero cell and falls with the shift") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const int lists = 1 + trial % 5;
    const auto p = random_params(rng, lists, CaptureModel::dynamic);
    double closed = 1.0;
    for (double a : p.alpha) closed *= 1.0 / (1.0 + std::exp(p.theta + a));
    CHECK(miss_probability(p, p.theta) == doctest::Approx(closed).epsilon(1e-12));
    CHECK(miss_probability(p, p.theta) == doctest::Approx(cell_probabilities(p, p.theta)[0]).epsilon(1e-12));
    double prev = 1.0;
    for (double s = -5; s <= 5; s += 0.5) {
      const double m = miss_probability(p, s);
      CHECK(m < prev);
      prev = m;
    }
  }
  const auto p = RaschParams::constant(3, 0.5, -0.2);
  CHECK(expected_missing(1000.0, p, 0.0) == doctest::Approx(1000.0 * std::pow(1.0 - 1.0 / (1.0 + std::exp(-0.5)), 3)));
  CHECK_THROWS_AS(expected_missing(0.0, p, 0.0), ValidationError);
}

TEST_CASE("log-probability gradient matches central differences") {
  std::mt19937_64 rng(15);
  const int lists = 4;
  auto p = random_params(rng, lists, CaptureModel::dynamic, 1.0);
  const GradientLayout layout{lists};
  for (std::uint32_t c = 0; c < (1u << lists); ++c) {
    std::vector<double> grad(static_cast<std::size_t>(layout.size()), 0.0);
    add_cell_log_prob_gradient(p, p.theta, c, 1.0, grad);
    auto value = [&](const RaschParams& q) { return cell_log_probability(q, q.theta, CapturePattern(lists, c)); };
    auto bump = [&](int slot, double h) {
      RaschParams q = p;
      if (slot < lists) q.alpha[static_cast<std::size_t>(slot)] += h;
      else if (slot < layout.shift()) q.alpha2[static_cast<std::size_t>(slot - lists)] += h;
      else q.theta += h;
      return value(q);
    };
    for (int slot = 0; slot < layout.size(); ++slot) {
      const double h = 1e-5;
      const double fd = (bump(slot, h) - bump(slot, -h)) / (2 * h);
      CHECK(std::abs(fd - grad[static_cast<std::size_t>(slot)]) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}
