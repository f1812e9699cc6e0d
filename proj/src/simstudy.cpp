#include "ascertain/simstudy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "ascertain/error.hpp"
#include "ascertain/threesided.hpp"

namespace ascertain {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kBiasStream = 0x42494153ULL;  // "BIAS"
constexpr std::uint64_t kFitStream = 0x45535449ULL;   // "ESTI"
constexpr std::uint64_t kOrStream = 0x4f444453ULL;    // "ODDS"

using json = nlohmann::json;

}  // namespace

const char* to_string(ShiftTarget t) noexcept { return t == ShiftTarget::exposed ? "exposed" : "unexposed"; }

ShiftTarget parse_shift_target(std::string_view s) {
  if (s == "exposed") return ShiftTarget::exposed;
  if (s == "unexposed") return ShiftTarget::unexposed;
  throw ValidationError("theta_applies_to must be 'exposed' or 'unexposed', got '" + std::string(s) + "'");
}

const char* to_string(Study s) noexcept {
  switch (s) {
    case Study::bias: return "bias";
    case Study::estimators: return "estimators";
    case Study::odds_ratio: return "or";
  }
  return "?";
}

Study parse_study(std::string_view s) {
  if (s == "bias") return Study::bias;
  if (s == "estimators") return Study::estimators;
  if (s == "or") return Study::odds_ratio;
  throw ValidationError("unknown study '" + std::string(s) + "' (expected bias, estimators or or)");
}

void SimConfig::validate() const {
  if (!(gamma_exposed > 0) || !(gamma_unexposed > 0)) throw ValidationError("gamma values must be positive");
  if (!std::isfinite(alpha_main) || !std::isfinite(alpha_pair)) throw ValidationError("alpha values must be finite");
  if (lists.empty()) throw ValidationError("at least one list count is required");
  for (int j : lists)
    if (j < 1 || j > 16) throw ValidationError("list counts must be between 1 and 16");
  if (thetas.empty()) throw ValidationError("theta grid must not be empty");
  for (double t : thetas)
    if (!std::isfinite(t)) throw ValidationError("theta grid values must be finite");
  if (replicates < 1) throw ValidationError("replicates must be at least 1");
}

RaschParams SimConfig::params(int j) const {
  return RaschParams::constant(j, alpha_main, j > 1 ? alpha_pair : 0.0, 0.0);
}

std::pair<double, double> SimConfig::shifts(double theta) const {
  return theta_applies_to == ShiftTarget::exposed ? std::pair{theta, 0.0} : std::pair{0.0, theta};
}

SimConfig parse_sim_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  SimConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      const json& v = it.value();
      if (!key.empty() && key[0] == '_') continue;
      if (key == "gamma_exposed") c.gamma_exposed = v.get<double>();
      else if (key == "gamma_unexposed") c.gamma_unexposed = v.get<double>();
      else if (key == "alpha_main") c.alpha_main = v.get<double>();
      else if (key == "alpha_pair") c.alpha_pair = v.get<double>();
      else if (key == "lists") c.lists = v.get<std::vector<int>>();
      else if (key == "theta") c.thetas = v.get<std::vector<double>>();
      else if (key == "replicates") c.replicates = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "theta_applies_to") c.theta_applies_to = parse_shift_target(v.get<std::string>());
      else if (key == "total_exposed") c.total_exposed = v.get<double>();
      else if (key == "total_unexposed") c.total_unexposed = v.get<double>();
      else if (key == "rare") c.rare = v.get<bool>();
      else if (key == "multistart") c.fit.multistart = v.get<int>();
      else if (key == "model") c.fit.model = parse_capture_model(v.get<std::string>());
      else throw ValidationError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config has a value of the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string sim_config_json(const SimConfig& c) {
  json j = {{"gamma_exposed", c.gamma_exposed},
            {"gamma_unexposed", c.gamma_unexposed},
            {"alpha_main", c.alpha_main},
            {"alpha_pair", c.alpha_pair},
            {"lists", c.lists},
            {"theta", c.thetas},
            {"replicates", c.replicates},
            {"seed", c.seed},
            {"theta_applies_to", to_string(c.theta_applies_to)},
            {"multistart", c.fit.multistart},
            {"model", to_string(c.fit.model)}};
  if (c.total_exposed > 0 || c.total_unexposed > 0) {
    j["total_exposed"] = c.total_exposed;
    j["total_unexposed"] = c.total_unexposed;
    j["rare"] = c.rare;
  }
  return j.dump();
}

ContingencyTable generate_population(double gamma, const RaschParams& params, double exposure_shift, Rng& rng,
                                     const std::string& label) {
  if (!(gamma > 0)) throw ValidationError("gamma must be positive");
  const auto probs = cell_probabilities(params, exposure_shift);
  return ContingencyTable::from_counts(params.lists(), Completeness::complete, draw_poisson_cells(gamma, probs, rng),
                                       label);
}

Summary summarize(std::vector<double> values) {
  Summary s;
  const auto before = values.size();
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  s.used = static_cast<int>(values.size());
  s.excluded = static_cast<int>(before - values.size());
  if (values.empty()) {
    s.mean = s.lower = s.upper = kNaN;
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  s.lower = empirical_quantile(values, 0.025);
  s.upper = empirical_quantile(values, 0.975);
  return s;
}

double expected_observed_ratio(const SimConfig& config, int lists, double theta) {
  const auto params = config.params(lists);
  const auto [se, su] = config.shifts(theta);
  return config.gamma_exposed * (1.0 - miss_probability(params, se)) /
         (config.gamma_unexposed * (1.0 - miss_probability(params, su)));
}

namespace {

struct Cell {
  int lists;
  std::size_t theta_index;
  double theta;
};

std::vector<Cell> grid(const SimConfig& c) {
  std::vector<Cell> out;
  for (int j : c.lists)
    for (std::size_t t = 0; t < c.thetas.size(); ++t) out.push_back({j, t, c.thetas[t]});
  return out;
}

std::pair<ContingencyTable, ContingencyTable> draw_pair(const SimConfig& c, const Cell& cell, std::uint64_t tag,
                                                        std::size_t replicate, std::uint64_t attempt) {
  Rng rng = substream(c.seed, {tag, static_cast<std::uint64_t>(cell.lists), cell.theta_index, replicate, attempt});
  const auto params = c.params(cell.lists);
  const auto [se, su] = c.shifts(cell.theta);
  auto e = generate_population(c.gamma_exposed, params, se, rng, "E");
  auto u = generate_population(c.gamma_unexposed, params, su, rng, "U");
  return {std::move(e), std::move(u)};
}

std::vector<BiasRow> run_bias(const SimConfig& c, const ExecutionPolicy& policy) {
  c.validate();
  std::vector<BiasRow> rows;
  const auto b = static_cast<std::size_t>(c.replicates);
  for (const auto& cell : grid(c)) {
    std::vector<double> ratios(b);
    for_each_index(policy, b, [&](std::size_t r) {
      auto [e, u] = draw_pair(c, cell, kBiasStream, r, 0);
      const auto oe = e.observed_part().total(), ou = u.observed_part().total();
      ratios[r] = ou > 0 ? static_cast<double>(oe) / static_cast<double>(ou) : kNaN;
    });
    rows.push_back({cell.lists, cell.theta, summarize(std::move(ratios)),
                    expected_observed_ratio(c, cell.lists, cell.theta)});
  }
  return rows;
}

// Fitted incomplete free-theta result for one replicate, or nullopt when
// both attempts fail.
std::optional<std::pair<FitResult, std::pair<ContingencyTable, ContingencyTable>>> fit_replicate(
    const SimConfig& c, const Cell& cell, std::uint64_t tag, std::size_t r) {
  FitSpec spec = c.fit;
  spec.variant = FitVariant::incomplete_free_theta;
  for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
    auto tables = draw_pair(c, cell, tag, r, attempt);
    spec.seed = c.seed ^ (0x9e3779b97f4a7c15ULL * (r + 1)) ^ attempt;
    try {
      auto f = fit(tables.first.observed_part(), tables.second.observed_part(), spec);
      return std::pair{std::move(f), std::move(tables)};
    } catch (const NumericalError&) {
    } catch (const ValidationError&) {
    }
  }
  return std::nullopt;
}

std::vector<EstimatorRow> run_estimators(const SimConfig& c, const ExecutionPolicy& policy) {
  c.validate();
  std::vector<EstimatorRow> rows;
  const auto b = static_cast<std::size_t>(c.replicates);
  for (const auto& cell : grid(c)) {
    if (cell.lists < 2) throw ValidationError("the estimator study needs at least two lists");
    const auto truth = c.params(cell.lists);
    std::vector<std::string> names;
    std::vector<double> truths;
    for (int k = 0; k < cell.lists; ++k) {
      names.push_back("a" + std::to_string(k + 1));
      truths.push_back(truth.alpha[static_cast<std::size_t>(k)]);
    }
    if (c.fit.model == CaptureModel::dynamic) {
      for (int j = 0; j < cell.lists; ++j)
        for (int k = j + 1; k < cell.lists; ++k) {
          names.push_back("a" + std::to_string(j + 1) + std::to_string(k + 1));
          truths.push_back(c.alpha_pair);
        }
    }
    names.insert(names.end(), {"gamma_E", "gamma_U", "theta"});
    const auto [se, su] = c.shifts(cell.theta);
    truths.insert(truths.end(), {c.gamma_exposed, c.gamma_unexposed, se - su});

    std::vector<std::vector<double>> values(names.size(), std::vector<double>(b, kNaN));
    for_each_index(policy, b, [&](std::size_t r) {
      auto res = fit_replicate(c, cell, kFitStream, r);
      if (!res) return;
      const auto& f = res->first;
      std::size_t i = 0;
      for (double a : f.params.alpha) values[i++][r] = a;
      if (c.fit.model == CaptureModel::dynamic)
        for (double a : f.params.alpha2) values[i++][r] = a;
      values[i++][r] = f.rates->exposed;
      values[i++][r] = f.rates->unexposed;
      values[i][r] = f.params.theta;
    });
    for (std::size_t i = 0; i < names.size(); ++i) {
      rows.push_back({cell.lists, cell.theta, names[i], truths[i], summarize(std::move(values[i]))});
    }
  }
  return rows;
}

std::vector<OddsRatioRow> run_odds_ratio(const SimConfig& c, const ExecutionPolicy& policy) {
  c.validate();
  if (!(c.total_exposed > 0) || !(c.total_unexposed > 0)) {
    throw ValidationError("the odds-ratio study needs total_exposed and total_unexposed");
  }
  std::vector<OddsRatioRow> rows;
  const auto b = static_cast<std::size_t>(c.replicates);
  for (const auto& cell : grid(c)) {
    if (cell.lists < 2) throw ValidationError("the odds-ratio study needs at least two lists");
    OddsRatioRow row;
    row.lists = cell.lists;
    row.theta = cell.theta;
    row.true_or = odds_ratio(c.gamma_exposed, c.gamma_unexposed, c.total_exposed, c.total_unexposed, c.rare);
    std::vector<double> naive(b, kNaN), corrected(b, kNaN);
    std::vector<char> closer(b, 0);
    for_each_index(policy, b, [&](std::size_t r) {
      auto res = fit_replicate(c, cell, kOrStream, r);
      if (!res) return;
      const auto& [f, tables] = *res;
      const double oe = static_cast<double>(tables.first.observed_part().total());
      const double ou = static_cast<double>(tables.second.observed_part().total());
      try {
        naive[r] = odds_ratio(oe, ou, c.total_exposed, c.total_unexposed, c.rare);
        corrected[r] = odds_ratio(f.rates->exposed, f.rates->unexposed, c.total_exposed, c.total_unexposed, c.rare);
      } catch (const ValidationError&) {
        naive[r] = corrected[r] = kNaN;
        return;
      }
      closer[r] = std::abs(corrected[r] - row.true_or) < std::abs(naive[r] - row.true_or);
    });
    for (std::size_t r = 0; r < b; ++r) row.corrected_closer += closer[r];
    row.naive = summarize(std::move(naive));
    row.corrected = summarize(std::move(corrected));
    row.naive_bias = row.naive.mean - row.true_or;
    row.corrected_bias = row.corrected.mean - row.true_or;
    rows.push_back(row);
  }
  return rows;
}

constexpr ExecutionPolicy kSerial{Execution::serial, 1};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<BiasRow> bias_study(const SimConfig& config) { return run_bias(config, config.execution); }
std::vector<BiasRow> bias_study_serial(SimConfig config) { return run_bias(config, kSerial); }

std::vector<EstimatorRow> estimator_study(const SimConfig& config) { return run_estimators(config, config.execution); }
std::vector<EstimatorRow> estimator_study_serial(SimConfig config) { return run_estimators(config, kSerial); }

std::vector<OddsRatioRow> or_bias(const SimConfig& config) { return run_odds_ratio(config, config.execution); }
std::vector<OddsRatioRow> or_bias_serial(SimConfig config) { return run_odds_ratio(config, kSerial); }

void write_bias_csv(std::ostream& out, const std::vector<BiasRow>& rows) {
  out << "lists,theta,mean,lower,upper,expected,used,excluded\n";
  for (const auto& r : rows) {
    out << r.lists << ',' << num(r.theta) << ',' << num(r.ratio.mean) << ',' << num(r.ratio.lower) << ','
        << num(r.ratio.upper) << ',' << num(r.expected) << ',' << r.ratio.used << ',' << r.ratio.excluded << '\n';
  }
}

void write_estimator_csv(std::ostream& out, const std::vector<EstimatorRow>& rows) {
  out << "lists,theta,parameter,truth,mean,lower,upper,used,excluded\n";
  for (const auto& r : rows) {
    out << r.lists << ',' << num(r.theta) << ',' << r.parameter << ',' << num(r.truth) << ',' << num(r.estimate.mean)
        << ',' << num(r.estimate.lower) << ',' << num(r.estimate.upper) << ',' << r.estimate.used << ','
        << r.estimate.excluded << '\n';
  }
}

void write_odds_ratio_csv(std::ostream& out, const std::vector<OddsRatioRow>& rows) {
  out << "lists,theta,true_or,naive_mean,naive_lower,naive_upper,corrected_mean,corrected_lower,corrected_upper,"
         "naive_bias,corrected_bias,corrected_closer,used\n";
  for (const auto& r : rows) {
    out << r.lists << ',' << num(r.theta) << ',' << num(r.true_or) << ',' << num(r.naive.mean) << ','
        << num(r.naive.lower) << ',' << num(r.naive.upper) << ',' << num(r.corrected.mean) << ','
        << num(r.corrected.lower) << ',' << num(r.corrected.upper) << ',' << num(r.naive_bias) << ','
        << num(r.corrected_bias) << ',' << r.corrected_closer << ',' << r.corrected.used << '\n';
  }
}

}  // namespace ascertain
