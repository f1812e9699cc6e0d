#pragma once

// Log-linear capture-recapture on the 2^J - 1 observed cells.
//
//   M_c ~ Poisson(lambda_c),
//   log lambda_c = b0 + sum_j b_j x_j + sum_{j<k in model} b_jk x_j x_k
//
// The all-zero cell is estimated by lambda_odd / lambda_even, the ratio of
// the products of fitted means over cells with an odd and an even number of
// captures.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ascertain/tables.hpp"

namespace ascertain {

struct LoglinearTerm {
  enum class Kind { intercept, main, pair };
  Kind kind = Kind::intercept;
  int first = -1;   ///< list index (main, pair)
  int second = -1;  ///< second list index (pair)

  static LoglinearTerm intercept() { return {}; }
  static LoglinearTerm main(int j) { return {Kind::main, j, -1}; }
  static LoglinearTerm pair(int j, int k) { return {Kind::pair, j, k}; }

  /// "b0", "b1", "b12" style label (1-based list numbers).
  std::string label() const;
  /// Label using list names, e.g. "LE:DC".
  std::string label(const std::vector<std::string>& list_names) const;
  double indicator(const CapturePattern& p) const;

  friend bool operator==(const LoglinearTerm&, const LoglinearTerm&) = default;
};

/// Intercept plus all main effects plus the given pairs.
std::vector<LoglinearTerm> main_effects_model(int lists, const std::vector<std::pair<int, int>>& pairs = {});

/// Pairs that may enter a model: order-two interactions below the
/// all-list order (J >= 3).
std::vector<std::pair<int, int>> allowed_pairs(int lists);

struct LoglinearModel {
  int lists = 0;
  std::vector<LoglinearTerm> terms;
  Eigen::VectorXd beta;
  std::vector<double> fitted;  ///< by cell index; fitted[0] unused
  double deviance = 0.0;
  double pearson = 0.0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;  ///< coefficients ran off (zero cells); inadmissible

  int dof() const noexcept { return static_cast<int>((1u << lists) - 1) - static_cast<int>(terms.size()); }
  double aic() const noexcept { return 2.0 * static_cast<double>(terms.size()) - 2.0 * loglik; }
  double bic() const noexcept;
};

struct IrlsControls {
  double relative_tolerance = 1e-10;  ///< relative deviance change
  int max_iterations = 100;
};

/// Poisson MLE by iteratively reweighted least squares on the observed cells.
LoglinearModel fit_loglinear(const ContingencyTable& table, const std::vector<LoglinearTerm>& terms,
                             const IrlsControls& controls = {});

/// lambda_odd / lambda_even over the observed cells.
double missing_cell(const LoglinearModel& model);
/// exp of the linear predictor at the all-zero cell (the intercept).
double missing_cell_linear_predictor(const LoglinearModel& model);

double lincoln_petersen(double m11, double m10, double m01);

double pearson_chi2(std::span<const double> observed, std::span<const double> fitted);
/// Upper tail of chi-square; dof = 0 gives 1.
double chi2_pvalue(double statistic, int dof);

struct CandidateReport {
  std::vector<LoglinearTerm> terms;
  std::vector<LoglinearModel> fits;  ///< one per table
  bool saturated = false;
  bool admissible = false;
  double min_pvalue = 0.0;
  std::vector<double> pvalues;
};

struct ModelSelectionReport {
  std::vector<CandidateReport> candidates;
  std::size_t selected = 0;
  std::vector<double> missing_estimates;  ///< per table, from the selected model
  double lower_p = 0.05;
  bool exclude_saturated = true;

  const CandidateReport& chosen() const { return candidates.at(selected); }
};

/// Candidates hold the intercept and every main effect and vary the pairs.
/// A candidate is admissible when it is not excluded as saturated and its
/// Pearson p-value is at least lower_p on every table; the admissible
/// candidate with the most terms wins, ties to the largest minimum p-value.
ModelSelectionReport select_model(std::span<const ContingencyTable> tables, double lower_p = 0.05,
                                  bool exclude_saturated = true);

struct CompletedTables {
  std::vector<ContingencyTable> tables;
  std::vector<double> raw_estimates;
  std::vector<std::int64_t> filled;
  /// totals[0] / totals[1] when two tables are completed.
  double ratio = 0.0;
};

/// Fills the all-zero cell with the estimate truncated to an integer.
CompletedTables complete_tables(std::span<const ContingencyTable> observed, std::span<const double> missing_estimates);

}  // namespace ascertain
