#include <doctest.h>

#include <cmath>
#include <random>

#include "ascertain/error.hpp"
#include "ascertain/loglinear.hpp"
#include "ascertain/rasch.hpp"
#include "support.hpp"

using namespace ascertain;

namespace {

ContingencyTable table2(std::int64_t m11, std::int64_t m10, std::int64_t m01) {
  return ContingencyTable::from_counts(2, Completeness::missing_all_zero, {0, m01, m10, m11});
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("term labels") {
  const std::vector<std::string> names{"DC", "LE", "CME"};
  CHECK(LoglinearTerm::intercept().label() == "b0");
  CHECK(LoglinearTerm::main(1).label() == "b2");
  CHECK(LoglinearTerm::pair(0, 2).label() == "b13");
  CHECK(LoglinearTerm::pair(0, 2).label(names) == "DC:CME");
  CHECK(main_effects_model(3, {{0, 1}}).size() == 5);
  CHECK(allowed_pairs(2).empty());
  CHECK(allowed_pairs(4).size() == 6);
}

TEST_CASE("two lists reduce to Lincoln-Petersen") {
  for (auto [m11, m10, m01] : {std::tuple{40, 60, 25}, std::tuple{7, 3, 90}, std::tuple{250, 10, 12}}) {
    const auto t = table2(m11, m10, m01);
    const auto m = fit_loglinear(t, main_effects_model(2));
    const double observed = m11 + m10 + m01;
    CHECK(missing_cell(m) + observed == doctest::Approx(lincoln_petersen(m11, m10, m01)).epsilon(1e-6));
    CHECK(missing_cell(m) == doctest::Approx(static_cast<double>(m10) * m01 / m11).epsilon(1e-6));
  }
  CHECK_THROWS_AS(lincoln_petersen(0, 3, 4), ValidationError);
  CHECK_THROWS_AS(fit_loglinear(table2(5, 5, 5), main_effects_model(2, {{0, 1}})), ValidationError);
}

TEST_CASE("odd/even ratio equals the intercept for hierarchical pair models") {
  const auto e = testing::observed_exposed();
  for (const auto& pairs : std::vector<std::vector<std::pair<int, int>>>{{}, {{0, 1}}, {{0, 2}, {1, 2}}}) {
    const auto m = fit_loglinear(e, main_effects_model(3, pairs));
    REQUIRE(m.converged);
    CHECK(missing_cell(m) == doctest::Approx(missing_cell_linear_predictor(m)).epsilon(1e-8));
  }
}

TEST_CASE("property: fitted means solve the score equations") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int lists = 3 + trial % 2;
    ContingencyTable t(lists, Completeness::missing_all_zero);
    for (std::uint32_t c = 1; c < t.cells(); ++c) t.set(CapturePattern(lists, c), 5 + static_cast<std::int64_t>(rng() % 80));
    const auto pairs = allowed_pairs(lists);
    std::vector<std::pair<int, int>> chosen;
    for (const auto& p : pairs)
      if (rng() % 2) chosen.push_back(p);
    if (chosen.size() == pairs.size()) chosen.pop_back();
    const auto terms = main_effects_model(lists, chosen);
    const auto m = fit_loglinear(t, terms);
    REQUIRE(m.converged);
    for (const auto& term : terms) {
      double score = 0.0, scale = 0.0;
      for (std::uint32_t c = 1; c < t.cells(); ++c) {
        const CapturePattern p(lists, c);
        score += term.indicator(p) * (static_cast<double>(t.count(p)) - m.fitted[c]);
        scale += term.indicator(p) * static_cast<double>(t.count(p));
      }
      CHECK(std::abs(score) <= 1e-8 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("rank deficiency names the collinear term") {
  auto terms = main_effects_model(3);
  terms.push_back(LoglinearTerm::main(1));
  const auto msg = message_of([&] { (void)fit_loglinear(testing::observed_exposed(), terms); });
  CHECK(msg.find("rank deficient") != std::string::npos);
  CHECK(msg.find("b2") != std::string::npos);
  CHECK_THROWS_AS(fit_loglinear(testing::observed_exposed(), {LoglinearTerm::main(0)}), ValidationError);
}

TEST_CASE("chi-square tail") {
  CHECK(chi2_pvalue(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(chi2_pvalue(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(chi2_pvalue(2.0, 0) == 1.0);
  const std::vector<double> o{10, 20, 30}, f{12, 18, 30};
  CHECK(pearson_chi2(o, f) == doctest::Approx(4.0 / 12 + 4.0 / 18));
}

TEST_CASE("model selection on the observed fixture") {
  const std::vector<ContingencyTable> tables{testing::observed_exposed(), testing::observed_unexposed()};
  const auto sel = select_model(tables);
  CHECK(sel.candidates.size() == 8);
  const auto& chosen = sel.chosen();
  CHECK(chosen.terms == main_effects_model(3, {{0, 2}, {1, 2}}));
  CHECK_FALSE(chosen.saturated);
  REQUIRE(sel.missing_estimates.size() == 2);
  CHECK(sel.missing_estimates[0] == doctest::Approx(85.56).epsilon(1e-3));
  CHECK(sel.missing_estimates[1] == doctest::Approx(63.94).epsilon(1e-3));

  const auto done = complete_tables(tables, sel.missing_estimates);
  CHECK(done.filled == std::vector<std::int64_t>{85, 63});
  CHECK(done.tables[0].total() == 593);
  CHECK(done.tables[1].total() == 476);
  CHECK(done.ratio == doctest::Approx(593.0 / 476.0));

  const auto sat = select_model(tables, 0.05, false);
  CHECK(sat.chosen().saturated);
  CHECK(complete_tables(tables, sat.missing_estimates).filled == std::vector<std::int64_t>{126, 84});

  const auto msg = message_of([&] { (void)select_model(tables, 0.99); });
  CHECK(msg.find("no admissible") != std::string::npos);
  CHECK(msg.find("b0,b1,b2,b3}") != std::string::npos);
}

TEST_CASE("independent data admit the main-effects model") {
  const auto p = RaschParams::independent({0.3, -0.2, 0.6});
  const auto probs = cell_probabilities(p, 0.0);
  ContingencyTable t(3, Completeness::missing_all_zero);
  for (std::uint32_t c = 1; c < 8; ++c) t.set(CapturePattern(3, c), std::llround(5000.0 * probs[c]));
  const std::vector<ContingencyTable> tables{t};
  const auto sel = select_model(tables);
  CHECK(sel.candidates.front().terms == main_effects_model(3));
  CHECK(sel.candidates.front().admissible);
  CHECK(sel.candidates.front().min_pvalue > 0.9);
  CHECK(missing_cell(sel.candidates.front().fits[0]) == doctest::Approx(5000.0 * probs[0]).epsilon(2e-2));
}

TEST_CASE("completion floors the estimate") {
  const std::vector<ContingencyTable> tables{testing::observed_exposed()};
  const std::vector<double> est{12.999};
  const auto done = complete_tables(tables, est);
  CHECK(done.filled[0] == 12);
  CHECK(done.tables[0].count(0u) == 12);
  const std::vector<double> bad{-1.0};
  CHECK_THROWS_AS(complete_tables(tables, bad), NumericalError);
  CHECK_THROWS_AS(complete_tables(tables, std::vector<double>{}), ValidationError);
}
