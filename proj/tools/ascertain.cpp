// ascertain: command-line front end for the differential-ascertainment
// library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ascertain/error.hpp"
#include "ascertain/estimation.hpp"
#include "ascertain/loglinear.hpp"
#include "ascertain/report.hpp"
#include "ascertain/simstudy.hpp"
#include "ascertain/tables.hpp"
#include "ascertain/threesided.hpp"

using namespace ascertain;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Groups {
  std::string bytes;
  TableInput input;
  ContingencyTable exposed;
  ContingencyTable unexposed;
};

Groups load_groups(const std::string& path, const std::string& exposed, const std::string& unexposed) {
  Groups g;
  g.bytes = read_file(path);
  std::istringstream in(g.bytes);
  g.input = read_table_csv(in);
  auto take = [&](const std::string& label) {
    const auto it = g.input.tables.find(label);
    if (it == g.input.tables.end()) throw ValidationError("input has no exposure group '" + label + "'");
    return it->second;
  };
  g.exposed = take(exposed);
  g.unexposed = take(unexposed);
  g.input.list_names = list_names_or_default(g.input.list_names, g.input.lists);
  return g;
}

void emit(const Report& report, const std::string& out) {
  if (out.empty() || out == "-") {
    report.write(std::cout);
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw ValidationError("cannot write '" + out + "'");
  report.write(f);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write '" + path + "'");
  f << text;
}

void add_run(Report& report, const std::string& command, const std::string& input, const std::string& bytes) {
  auto& s = report.section("run");
  s.set("command", command);
  s.set("input", input);
  s.set("input_sha256", sha256_hex(bytes));
}

void add_table(ReportSection& s, const std::string& name, const ContingencyTable& t) {
  auto& block = s.table(name, {"pattern", "count"});
  for (std::uint32_t c = t.cells(); c-- > 0;) {
    if (c == 0 && !t.complete()) continue;
    block.add_row({CapturePattern(t.lists(), c).str(), std::to_string(t.count(c))});
  }
}

ExecutionPolicy policy(int threads) {
  return threads == 1 ? ExecutionPolicy{Execution::serial, 1} : ExecutionPolicy{Execution::parallel, threads};
}

// ---- fit ---------------------------------------------------------------------

struct FitOptions {
  std::string input;
  std::string variant = "incomplete-free-theta";
  std::string model = "dynamic";
  std::string exposed = "E";
  std::string unexposed = "U";
  std::uint64_t seed = 0;
  int multistart = 5;
  std::vector<double> deltas;
  std::string out;
};

FitSpec make_spec(const FitOptions& o) {
  FitSpec spec;
  spec.variant = parse_fit_variant(o.variant);
  spec.model = parse_capture_model(o.model);
  spec.seed = o.seed;
  spec.multistart = o.multistart;
  return spec;
}

std::pair<ContingencyTable, ContingencyTable> tables_for(const Groups& g, FitVariant v) {
  if (is_incomplete(v)) return {g.exposed.observed_part(), g.unexposed.observed_part()};
  if (!g.exposed.complete() || !g.unexposed.complete()) {
    throw ValidationError(std::string(to_string(v)) + " needs complete tables (add 000 rows to the input)");
  }
  return {g.exposed, g.unexposed};
}

int run_fit(const FitOptions& o) {
  const auto g = load_groups(o.input, o.exposed, o.unexposed);
  const auto spec = make_spec(o);
  const auto [e, u] = tables_for(g, spec.variant);
  Report report;
  add_run(report, "fit", o.input, g.bytes);
  auto& cfg = report.section("config");
  cfg.set("variant", to_string(spec.variant));
  cfg.set("model", to_string(spec.model));
  cfg.set("exposed", o.exposed);
  cfg.set("unexposed", o.unexposed);
  cfg.set("seed", std::to_string(o.seed));
  cfg.set("multistart", o.multistart);
  auto& data = report.section("data");
  add_table(data, "exposed", e);
  add_table(data, "unexposed", u);
  const auto result = fit(e, u, spec);
  add_fit(report, "fit", result, g.input.list_names);
  const double shift = result.random_effects ? result.random_effects->mu : result.params.theta;
  for (std::size_t i = 0; i < o.deltas.size(); ++i) {
    auto& s = report.section("probabilities." + std::to_string(i + 1));
    s.set("theta_hat", shift);
    s.set("delta", o.deltas[i]);
    s.tables.push_back(probability_table(result.params, shift, o.deltas[i]));
  }
  emit(report, o.out);
  return 0;
}

// ---- test --------------------------------------------------------------------

struct TestOptions {
  std::string input;
  std::string regime = "incomplete";
  std::string model = "dynamic";
  std::string exposed = "E";
  std::string unexposed = "U";
  int bootstrap = 1500;
  double alpha = 0.05;
  std::vector<double> deltas;
  std::uint64_t seed = 0;
  int threads = 0;
  int multistart = 5;
  std::string draws;
  std::string out;
};

int run_test(const TestOptions& o) {
  const auto g = load_groups(o.input, o.exposed, o.unexposed);
  const auto regime = parse_regime(o.regime);
  if (!(o.alpha > 0 && o.alpha < 1)) throw ValidationError("--alpha must be in (0, 1)");
  for (double d : o.deltas)
    if (!(d >= 0)) throw ValidationError("--delta must be non-negative");

  FitSpec spec;
  spec.model = parse_capture_model(o.model);
  spec.multistart = o.multistart;
  spec.seed = o.seed;
  spec.variant = regime == Regime::incomplete ? FitVariant::incomplete_free_theta : FitVariant::complete_free_theta;
  const auto [e, u] = tables_for(g, spec.variant);

  Report report;
  add_run(report, "test", o.input, g.bytes);
  auto& cfg = report.section("config");
  cfg.set("regime", to_string(regime));
  cfg.set("model", to_string(spec.model));
  cfg.set("exposed", o.exposed);
  cfg.set("unexposed", o.unexposed);
  cfg.set("bootstrap", o.bootstrap);
  cfg.set("alpha", o.alpha);
  std::string ds;
  for (double d : o.deltas) ds += (ds.empty() ? "" : ",") + format_number(d);
  cfg.set("delta", ds.empty() ? "none" : ds);
  cfg.set("seed", std::to_string(o.seed));
  cfg.set("multistart", o.multistart);

  const auto observed = fit(e, u, spec);
  add_fit(report, "fit", observed, g.input.list_names);

  BootstrapOptions bo;
  bo.replicates = o.bootstrap;
  bo.seed = o.seed;
  bo.fit = spec;
  bo.execution = policy(o.threads);
  const auto dist = bootstrap_null(e, u, regime, bo);
  add_fit(report, "null_fit", dist.null_fit, g.input.list_names);
  add_null_distribution(report, dist);

  const auto q = null_quantiles(dist, o.alpha);
  const auto th = delta_thresholds(observed.params.theta, q);
  auto& qs = report.section("quantiles");
  qs.set("q_alpha_half", q.lower_half);
  qs.set("q_alpha", q.lower);
  qs.set("q_one_minus_alpha", q.upper);
  qs.set("q_one_minus_alpha_half", q.upper_half);
  qs.set("delta1", th.delta1);
  qs.set("delta2", th.delta2);
  for (std::size_t i = 0; i < o.deltas.size(); ++i) {
    add_outcome(report, "test." + std::to_string(i + 1), decide(observed.params.theta, q, o.alpha, o.deltas[i]));
  }
  if (o.deltas.empty()) add_outcome(report, "test", decide(observed.params.theta, q, o.alpha, 0.0));
  if (!o.draws.empty()) {
    std::ostringstream ss;
    write_draws(ss, dist);
    write_text(o.draws, ss.str());
  }
  emit(report, o.out);
  return 0;
}

// ---- loglinear ---------------------------------------------------------------

struct LoglinearOptions {
  std::string input;
  std::string exposed = "E";
  std::string unexposed = "U";
  double lower_p = 0.05;
  bool include_saturated = false;
  std::string completed;
  std::string out;
};

int run_loglinear(const LoglinearOptions& o) {
  const auto g = load_groups(o.input, o.exposed, o.unexposed);
  const std::vector<ContingencyTable> tables{g.exposed.observed_part(), g.unexposed.observed_part()};
  Report report;
  add_run(report, "loglinear", o.input, g.bytes);
  auto& cfg = report.section("config");
  cfg.set("exposed", o.exposed);
  cfg.set("unexposed", o.unexposed);
  cfg.set("lower_p", o.lower_p);
  cfg.set("include_saturated", o.include_saturated);

  const auto sel = select_model(tables, o.lower_p, !o.include_saturated);
  add_selection(report, sel, g.input.list_names, {o.exposed, o.unexposed});
  const auto done = complete_tables(tables, sel.missing_estimates);
  auto& s = report.section("completion");
  s.set("rounding", "floor");
  s.set("missing_exposed", static_cast<int>(done.filled[0]));
  s.set("missing_unexposed", static_cast<int>(done.filled[1]));
  s.set("total_exposed", static_cast<int>(done.tables[0].total()));
  s.set("total_unexposed", static_cast<int>(done.tables[1].total()));
  s.set("ratio", done.ratio);
  if (!o.completed.empty()) {
    TableSet set{{o.exposed, done.tables[0]}, {o.unexposed, done.tables[1]}};
    std::ostringstream ss;
    write_aggregated_csv(ss, set, g.input.list_names);
    write_text(o.completed, ss.str());
  }
  emit(report, o.out);
  return 0;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateOptions {
  std::string study = "bias";
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  int threads = 0;
  std::string csv;
  std::string out;
};

int run_simulate(const SimulateOptions& o) {
  const auto study = parse_study(o.study);
  const auto bytes = read_file(o.config);
  auto cfg = parse_sim_config(bytes);
  if (o.seed) cfg.seed = *o.seed;
  if (o.replicates) cfg.replicates = *o.replicates;
  cfg.validate();
  cfg.execution = policy(o.threads);

  Report report;
  add_run(report, "simulate", o.config, bytes);
  auto& c = report.section("config");
  c.set("study", to_string(study));
  c.set("effective", sim_config_json(cfg));
  c.set("theta_applies_to", to_string(cfg.theta_applies_to));
  if (cfg.theta_applies_to == ShiftTarget::unexposed) {
    c.set("note", "theta shifts the unexposed group; the exposed group is generated with shift 0");
  }

  std::ostringstream csv;
  auto& s = report.section("results");
  switch (study) {
    case Study::bias: {
      const auto rows = bias_study(cfg);
      write_bias_csv(csv, rows);
      s.set("rows", static_cast<int>(rows.size()));
      break;
    }
    case Study::estimators: {
      const auto rows = estimator_study(cfg);
      write_estimator_csv(csv, rows);
      s.set("rows", static_cast<int>(rows.size()));
      break;
    }
    case Study::odds_ratio: {
      const auto rows = or_bias(cfg);
      write_odds_ratio_csv(csv, rows);
      s.set("rows", static_cast<int>(rows.size()));
      break;
    }
  }
  // Embed the CSV as a block so the report is self-contained.
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) header.push_back(cell);
  }
  auto& block = s.table(to_string(study), header);
  while (std::getline(lines, line)) {
    std::vector<std::string> row;
    std::istringstream r(line);
    std::string cell;
    while (std::getline(r, cell, ',')) row.push_back(cell);
    block.add_row(std::move(row));
  }
  if (!o.csv.empty()) write_text(o.csv, csv.str());
  emit(report, o.out);
  return 0;
}

// ---- probs -------------------------------------------------------------------

struct ProbsOptions {
  std::string params;
  std::string section = "fit";
  std::string model = "dynamic";
  std::vector<double> alpha;
  std::vector<double> alpha2;
  std::optional<double> theta;
  double delta = 0.0;
  std::string out;
};

int run_probs(const ProbsOptions& o) {
  RaschParams params;
  Report report;
  if (!o.params.empty()) {
    const auto bytes = read_file(o.params);
    std::istringstream in(bytes);
    params = read_fit_params(Report::parse(in), o.section);
    add_run(report, "probs", o.params, bytes);
  } else {
    if (o.alpha.empty() || !o.theta) throw ValidationError("probs needs --params or both --alpha and --theta");
    const auto model = parse_capture_model(o.model);
    params = model == CaptureModel::dynamic ? RaschParams::dynamic(o.alpha, o.alpha2, *o.theta)
                                            : RaschParams::independent(o.alpha, *o.theta);
    auto& run = report.section("run");
    run.set("command", "probs");
    run.set("input", "command line");
  }
  if (!(o.delta >= 0)) throw ValidationError("--delta must be non-negative");
  auto& s = report.section("probabilities");
  s.set("model", to_string(params.model));
  s.set("theta_hat", params.theta);
  s.set("delta", o.delta);
  std::string as;
  for (double a : params.alpha) as += (as.empty() ? "" : ",") + format_number(a);
  s.set("alpha", as);
  as.clear();
  for (double a : params.alpha2) as += (as.empty() ? "" : ",") + format_number(a);
  if (!as.empty()) s.set("alpha2", as);
  s.tables.push_back(probability_table(params, params.theta, o.delta));
  emit(report, o.out);
  return 0;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "ascertain: %s\n", e.what());
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "ascertain: numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capture-recapture estimation under differential ascertainment"};
  app.require_subcommand(1);
  int code = 0;

  FitOptions fo;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a capture model to two exposure groups");
  fit_cmd->add_option("--input", fo.input, "Record or aggregated CSV")->required();
  fit_cmd->add_option("--variant", fo.variant, "incomplete|complete-{free,null}-theta, re-complete, re-incomplete")
      ->capture_default_str();
  fit_cmd->add_option("--model", fo.model, "independent|dynamic")->capture_default_str();
  fit_cmd->add_option("--exposed", fo.exposed, "Exposed group label")->capture_default_str();
  fit_cmd->add_option("--unexposed", fo.unexposed, "Unexposed group label")->capture_default_str();
  fit_cmd->add_option("--seed", fo.seed, "Multistart jitter seed")->capture_default_str();
  fit_cmd->add_option("--multistart", fo.multistart, "Number of optimizer starts")->capture_default_str()
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--delta", fo.deltas, "Add a probability table at theta-hat, -delta, +delta");
  fit_cmd->add_option("--out", fo.out, "Report path (default stdout)");
  fit_cmd->callback([&] { code = guarded([&] { return run_fit(fo); }); });

  TestOptions to;
  auto* test_cmd = app.add_subcommand("test", "Bootstrap three-sided test for the shift theta");
  test_cmd->add_option("--input", to.input, "Record or aggregated CSV")->required();
  test_cmd->add_option("--regime", to.regime, "incomplete|complete")->capture_default_str();
  test_cmd->add_option("--model", to.model, "independent|dynamic")->capture_default_str();
  test_cmd->add_option("--exposed", to.exposed, "Exposed group label")->capture_default_str();
  test_cmd->add_option("--unexposed", to.unexposed, "Unexposed group label")->capture_default_str();
  test_cmd->add_option("--bootstrap", to.bootstrap, "Bootstrap replicates")->capture_default_str()
      ->check(CLI::PositiveNumber);
  test_cmd->add_option("--alpha", to.alpha, "Test level")->capture_default_str();
  test_cmd->add_option("--delta", to.deltas, "Equivalence margin (repeatable)");
  test_cmd->add_option("--seed", to.seed, "Bootstrap seed")->capture_default_str();
  test_cmd->add_option("--threads", to.threads, "Worker threads (0 = all, 1 = serial)")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  test_cmd->add_option("--multistart", to.multistart, "Number of optimizer starts")->capture_default_str()
      ->check(CLI::PositiveNumber);
  test_cmd->add_option("--draws", to.draws, "Write the null draws to this file");
  test_cmd->add_option("--out", to.out, "Report path (default stdout)");
  test_cmd->callback([&] { code = guarded([&] { return run_test(to); }); });

  LoglinearOptions lo;
  auto* ll_cmd = app.add_subcommand("loglinear", "Log-linear model selection and table completion");
  ll_cmd->add_option("--input", lo.input, "Record or aggregated CSV")->required();
  ll_cmd->add_option("--exposed", lo.exposed, "Exposed group label")->capture_default_str();
  ll_cmd->add_option("--unexposed", lo.unexposed, "Unexposed group label")->capture_default_str();
  ll_cmd->add_option("--lower-p", lo.lower_p, "Smallest admissible goodness-of-fit p-value")->capture_default_str();
  ll_cmd->add_flag("--include-saturated", lo.include_saturated, "Allow the model with every pair");
  ll_cmd->add_option("--completed", lo.completed, "Write the completed tables as aggregated CSV");
  ll_cmd->add_option("--out", lo.out, "Report path (default stdout)");
  ll_cmd->callback([&] { code = guarded([&] { return run_loglinear(lo); }); });

  SimulateOptions so;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulation study");
  sim_cmd->add_option("--study", so.study, "bias|estimators|or")->capture_default_str();
  sim_cmd->add_option("--config", so.config, "JSON study configuration")->required();
  sim_cmd->add_option("--seed", so.seed, "Override the configured seed");
  sim_cmd->add_option("--replicates", so.replicates, "Override the configured replicate count");
  sim_cmd->add_option("--threads", so.threads, "Worker threads (0 = all, 1 = serial)")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--csv", so.csv, "Write the study table as CSV");
  sim_cmd->add_option("--out", so.out, "Report path (default stdout)");
  sim_cmd->callback([&] { code = guarded([&] { return run_simulate(so); }); });

  ProbsOptions po;
  auto* probs_cmd = app.add_subcommand("probs", "Cell probabilities at theta-hat and +/- delta");
  probs_cmd->add_option("--params", po.params, "Fit report to read parameters from");
  probs_cmd->add_option("--section", po.section, "Report section holding the fit")->capture_default_str();
  probs_cmd->add_option("--model", po.model, "independent|dynamic")->capture_default_str();
  probs_cmd->add_option("--alpha", po.alpha, "List strengths")->delimiter(',');
  probs_cmd->add_option("--alpha2", po.alpha2, "Pair interactions in (1,2),(1,3),...,(2,3),... order")
      ->delimiter(',');
  probs_cmd->add_option("--theta", po.theta, "Shift theta-hat");
  probs_cmd->add_option("--delta", po.delta, "Margin delta")->capture_default_str();
  probs_cmd->add_option("--out", po.out, "Report path (default stdout)");
  probs_cmd->callback([&] { code = guarded([&] { return run_probs(po); }); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }
  return code;
}
