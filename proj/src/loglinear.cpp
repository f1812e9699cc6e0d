#include "ascertain/loglinear.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <boost/math/special_functions/gamma.hpp>

#include "ascertain/error.hpp"

namespace ascertain {

std::string LoglinearTerm::label() const {
  switch (kind) {
    case Kind::intercept: return "b0";
    case Kind::main: return "b" + std::to_string(first + 1);
    case Kind::pair: return "b" + std::to_string(first + 1) + std::to_string(second + 1);
  }
  return "?";
}

std::string LoglinearTerm::label(const std::vector<std::string>& names) const {
  auto name = [&](int j) {
    return j < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(j)] : "list" + std::to_string(j + 1);
  };
  switch (kind) {
    case Kind::intercept: return "intercept";
    case Kind::main: return name(first);
    case Kind::pair: return name(first) + ":" + name(second);
  }
  return "?";
}

double LoglinearTerm::indicator(const CapturePattern& p) const {
  switch (kind) {
    case Kind::intercept: return 1.0;
    case Kind::main: return p.bit(first);
    case Kind::pair: return p.bit(first) * p.bit(second);
  }
  return 0.0;
}

std::vector<LoglinearTerm> main_effects_model(int lists, const std::vector<std::pair<int, int>>& pairs) {
  std::vector<LoglinearTerm> terms{LoglinearTerm::intercept()};
  for (int j = 0; j < lists; ++j) terms.push_back(LoglinearTerm::main(j));
  for (auto [j, k] : pairs) terms.push_back(LoglinearTerm::pair(j, k));
  return terms;
}

std::vector<std::pair<int, int>> allowed_pairs(int lists) {
  std::vector<std::pair<int, int>> out;
  if (lists < 3) return out;
  for (int j = 0; j < lists; ++j)
    for (int k = j + 1; k < lists; ++k) out.emplace_back(j, k);
  return out;
}

double LoglinearModel::bic() const noexcept {
  const double cells = static_cast<double>((1u << lists) - 1);
  return static_cast<double>(terms.size()) * std::log(cells) - 2.0 * loglik;
}

double pearson_chi2(std::span<const double> observed, std::span<const double> fitted) {
  double x2 = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - fitted[i];
    if (fitted[i] > 0) x2 += d * d / fitted[i];
  }
  return x2;
}

double chi2_pvalue(double statistic, int dof) {
  if (dof <= 0) return 1.0;
  if (statistic <= 0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

double lincoln_petersen(double m11, double m10, double m01) {
  if (!(m11 > 0)) throw ValidationError("Lincoln-Petersen estimator undefined: no individuals on both lists");
  return (m11 + m10) * (m11 + m01) / m11;
}

LoglinearModel fit_loglinear(const ContingencyTable& table, const std::vector<LoglinearTerm>& terms,
                             const IrlsControls& controls) {
  const int lists = table.lists();
  const auto cells = static_cast<Eigen::Index>(table.cells() - 1);
  const auto p = static_cast<Eigen::Index>(terms.size());
  if (terms.empty() || terms.front().kind != LoglinearTerm::Kind::intercept) {
    throw ValidationError("log-linear model must start with the intercept");
  }
  for (const auto& t : terms) {
    if (t.kind == LoglinearTerm::Kind::pair && (lists < 3 || t.first == t.second)) {
      throw ValidationError("interaction " + t.label() + " is not identifiable with " + std::to_string(lists) + " lists");
    }
  }
  if (p > cells) throw ValidationError("more terms than observed cells");

  Eigen::MatrixXd x(cells, p);
  Eigen::VectorXd y(cells);
  for (Eigen::Index r = 0; r < cells; ++r) {
    const CapturePattern pat(lists, static_cast<std::uint32_t>(r + 1));
    y(r) = static_cast<double>(table.count(pat));
    for (Eigen::Index c = 0; c < p; ++c) x(r, c) = terms[static_cast<std::size_t>(c)].indicator(pat);
  }

  // Rank check, naming each column that adds nothing to the span.
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) {
      std::vector<std::string> collinear;
      Eigen::MatrixXd acc(cells, 0);
      Eigen::Index rank = 0;
      for (Eigen::Index c = 0; c < p; ++c) {
        Eigen::MatrixXd next(cells, acc.cols() + 1);
        next << acc, x.col(c);
        const auto r = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(next).rank();
        if (r > rank) {
          acc = next;
          rank = r;
        } else {
          collinear.push_back(terms[static_cast<std::size_t>(c)].label());
        }
      }
      std::string names;
      for (const auto& n : collinear) names += (names.empty() ? "" : ", ") + n;
      throw ValidationError("log-linear design is rank deficient; collinear terms: " + names);
    }
  }

  LoglinearModel m;
  m.lists = lists;
  m.terms = terms;
  Eigen::VectorXd mu = (y.array() + 0.5).matrix();
  Eigen::VectorXd eta = mu.array().log().matrix();
  auto deviance = [&](const Eigen::VectorXd& mean) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < cells; ++i) {
      if (y(i) > 0) d += y(i) * std::log(y(i) / mean(i));
      d -= y(i) - mean(i);
    }
    return 2.0 * d;
  };
  double dev = deviance(mu);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int it = 1; it <= controls.max_iterations; ++it) {
    const Eigen::VectorXd z = eta + ((y - mu).array() / mu.array()).matrix();
    const Eigen::MatrixXd xtw = x.transpose() * mu.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtw * x);
    if (ldlt.info() != Eigen::Success) throw NumericalError("IRLS: weighted normal equations are singular");
    beta = ldlt.solve(xtw * z);
    eta = x * beta;
    mu = eta.array().exp().matrix();
    const double dev_new = deviance(mu);
    m.iterations = it;
    const bool done = std::abs(dev_new - dev) / (std::abs(dev_new) + 0.1) < controls.relative_tolerance;
    dev = dev_new;
    if (done) {
      m.converged = true;
      break;
    }
  }
  m.beta = beta;
  m.deviance = dev;
  m.fitted.assign(table.cells(), 0.0);
  for (Eigen::Index i = 0; i < cells; ++i) m.fitted[static_cast<std::size_t>(i + 1)] = mu(i);
  std::vector<double> obs(y.data(), y.data() + cells), fit(mu.data(), mu.data() + cells);
  m.pearson = pearson_chi2(obs, fit);
  m.loglik = 0.0;
  for (Eigen::Index i = 0; i < cells; ++i) m.loglik += y(i) * eta(i) - mu(i) - std::lgamma(y(i) + 1.0);
  m.diverged = !m.converged || beta.cwiseAbs().maxCoeff() > 25.0 || mu.minCoeff() < 1e-10;
  return m;
}

double missing_cell(const LoglinearModel& model) {
  double log_ratio = 0.0;
  for (std::uint32_t c = 1; c < model.fitted.size(); ++c) {
    const double lambda = model.fitted[c];
    const bool odd = CapturePattern(model.lists, c).ones() % 2 == 1;
    if (lambda <= 0) {
      if (!odd) throw NumericalError("missing_cell: zero fitted mean in an even cell");
      return 0.0;
    }
    log_ratio += odd ? std::log(lambda) : -std::log(lambda);
  }
  return std::exp(log_ratio);
}

double missing_cell_linear_predictor(const LoglinearModel& model) {
  double eta = 0.0;
  const CapturePattern zero(model.lists, 0);
  for (std::size_t i = 0; i < model.terms.size(); ++i) eta += model.beta(static_cast<Eigen::Index>(i)) * model.terms[i].indicator(zero);
  return std::exp(eta);
}

ModelSelectionReport select_model(std::span<const ContingencyTable> tables, double lower_p, bool exclude_saturated) {
  if (tables.empty()) throw ValidationError("select_model: no tables");
  const int lists = tables.front().lists();
  for (const auto& t : tables)
    if (t.lists() != lists) throw ValidationError("select_model: tables disagree on the number of lists");
  if (lists < 2) throw ValidationError("log-linear capture-recapture needs at least two lists");

  const auto pairs = allowed_pairs(lists);
  if (pairs.size() > 16) throw ValidationError("select_model: too many candidate interaction subsets");
  ModelSelectionReport report;
  report.lower_p = lower_p;
  report.exclude_saturated = exclude_saturated;

  const std::uint32_t subsets = 1u << pairs.size();
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    std::vector<std::pair<int, int>> chosen;
    for (std::size_t q = 0; q < pairs.size(); ++q)
      if (mask & (1u << q)) chosen.push_back(pairs[q]);
    CandidateReport cand;
    cand.terms = main_effects_model(lists, chosen);
    cand.saturated = mask == subsets - 1;
    cand.admissible = !(exclude_saturated && cand.saturated);
    cand.min_pvalue = 1.0;
    for (const auto& t : tables) {
      auto m = fit_loglinear(t, cand.terms);
      const double pv = chi2_pvalue(m.pearson, m.dof());
      cand.pvalues.push_back(pv);
      cand.min_pvalue = std::min(cand.min_pvalue, pv);
      if (m.diverged || pv < lower_p) cand.admissible = false;
      cand.fits.push_back(std::move(m));
    }
    report.candidates.push_back(std::move(cand));
  }

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < report.candidates.size(); ++i) {
    const auto& c = report.candidates[i];
    if (!c.admissible) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = report.candidates[*best];
    if (c.terms.size() > b.terms.size() || (c.terms.size() == b.terms.size() && c.min_pvalue > b.min_pvalue)) best = i;
  }
  if (!best) {
    std::ostringstream msg;
    msg << "no admissible log-linear model (lower p-value bound " << lower_p << "):";
    for (const auto& c : report.candidates) {
      msg << "\n  {";
      for (std::size_t i = 0; i < c.terms.size(); ++i) msg << (i ? "," : "") << c.terms[i].label();
      msg << "} min p = " << c.min_pvalue << (c.saturated && exclude_saturated ? " (saturated, excluded)" : "");
    }
    throw ValidationError(msg.str());
  }
  report.selected = *best;
  for (const auto& m : report.chosen().fits) report.missing_estimates.push_back(missing_cell(m));
  return report;
}

CompletedTables complete_tables(std::span<const ContingencyTable> observed, std::span<const double> missing_estimates) {
  if (observed.size() != missing_estimates.size()) throw ValidationError("complete_tables: one estimate per table required");
  CompletedTables out;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double est = missing_estimates[i];
    if (!std::isfinite(est) || est < 0) throw NumericalError("complete_tables: missing-cell estimate is not finite");
    const auto filled = static_cast<std::int64_t>(std::floor(est));
    out.raw_estimates.push_back(est);
    out.filled.push_back(filled);
    out.tables.push_back(observed[i].observed_part().completed(filled));
  }
  if (out.tables.size() == 2 && out.tables[1].total() > 0) {
    out.ratio = static_cast<double>(out.tables[0].total()) / static_cast<double>(out.tables[1].total());
  }
  return out;
}

}  // namespace ascertain
