#include "ascertain/report.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

#include <openssl/evp.h>

#include "ascertain/error.hpp"

namespace ascertain {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

namespace {

double parse_number(std::string_view text, std::string_view what) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError("report value '" + std::string(what) + "' is not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string join_csv(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find_first_of(",\n") != std::string::npos) throw ValidationError("report cell contains a separator");
    out += (i ? "," : "") + cells[i];
  }
  return out;
}

}  // namespace

void CsvBlock::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw ValidationError("CSV block '" + name + "': row width mismatch");
  rows.push_back(std::move(row));
}

std::size_t CsvBlock::column(std::string_view col) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == col) return i;
  throw ValidationError("CSV block '" + name + "' has no column '" + std::string(col) + "'");
}

void ReportSection::set(const std::string& key, std::string value) {
  if (value.find('\n') != std::string::npos) throw ValidationError("report value for '" + key + "' spans lines");
  for (auto& [k, v] : values) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  values.emplace_back(key, std::move(value));
}

std::optional<std::string> ReportSection::get(std::string_view key) const {
  for (const auto& [k, v] : values)
    if (k == key) return v;
  return std::nullopt;
}

double ReportSection::number(std::string_view key) const {
  const auto v = get(key);
  if (!v) throw ValidationError("report section [" + name + "] has no key '" + std::string(key) + "'");
  return parse_number(*v, key);
}

CsvBlock& ReportSection::table(const std::string& table_name, std::vector<std::string> header) {
  tables.push_back({table_name, std::move(header), {}});
  return tables.back();
}

const CsvBlock* ReportSection::find_table(std::string_view table_name) const {
  for (const auto& t : tables)
    if (t.name == table_name) return &t;
  return nullptr;
}

ReportSection& Report::section(const std::string& name) {
  for (auto& s : sections_)
    if (s.name == name) return s;
  sections_.push_back({name, {}, {}});
  return sections_.back();
}

const ReportSection* Report::find(std::string_view name) const {
  for (const auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

void Report::write(std::ostream& out) const {
  bool first = true;
  for (const auto& s : sections_) {
    if (!first) out << '\n';
    first = false;
    out << '[' << s.name << "]\n";
    for (const auto& [k, v] : s.values) out << k << " = " << v << '\n';
    for (const auto& t : s.tables) {
      out << "\n@csv " << t.name << '\n' << join_csv(t.header) << '\n';
      for (const auto& r : t.rows) out << join_csv(r) << '\n';
    }
  }
}

std::string Report::str() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

Report Report::parse(std::istream& in) {
  Report report;
  ReportSection* current = nullptr;
  CsvBlock* block = nullptr;
  bool expect_header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      block = nullptr;
      continue;
    }
    if (block) {
      if (expect_header) {
        block->header = split_csv(line);
        expect_header = false;
      } else {
        auto row = split_csv(line);
        if (row.size() != block->header.size()) throw ParseError(line_no, "CSV row width does not match its header");
        block->rows.push_back(std::move(row));
      }
      continue;
    }
    if (line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      current = &report.section(line.substr(1, line.size() - 2));
      continue;
    }
    if (!current) throw ParseError(line_no, "content before the first section");
    if (line.rfind("@csv ", 0) == 0) {
      block = &current->table(line.substr(5), {});
      expect_header = true;
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    current->set(line.substr(0, eq), line.substr(eq + 3));
  }
  return report;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::vector<std::string> parameter_labels(const RaschParams& params, const std::vector<std::string>& list_names) {
  const int lists = params.lists();
  const auto names = list_names_or_default(list_names, lists);
  std::vector<std::string> out;
  for (int k = 0; k < lists; ++k) out.push_back("alpha:" + names[static_cast<std::size_t>(k)]);
  if (params.model == CaptureModel::dynamic) {
    for (int j = 0; j < lists; ++j)
      for (int k = j + 1; k < lists; ++k)
        out.push_back("alpha2:" + names[static_cast<std::size_t>(j)] + ":" + names[static_cast<std::size_t>(k)]);
  }
  out.emplace_back("theta");
  return out;
}

void add_fit(Report& report, const std::string& name, const FitResult& fit,
             const std::vector<std::string>& list_names) {
  auto& s = report.section(name);
  const auto names = list_names_or_default(list_names, fit.params.lists());
  std::string joined;
  for (const auto& n : names) joined += (joined.empty() ? "" : ",") + n;
  s.set("variant", to_string(fit.variant));
  s.set("model", to_string(fit.params.model));
  s.set("lists", joined);
  s.set("loglik", fit.loglik);
  s.set("converged", fit.converged);
  s.set("gradient_norm", fit.gradient_norm);
  s.set("iterations", fit.iterations);
  s.set("starts_run", fit.starts_run);
  s.set("best_start", fit.best_start);
  if (fit.rates) {
    s.set("gamma_exposed", fit.rates->exposed);
    s.set("gamma_unexposed", fit.rates->unexposed);
  }
  if (fit.random_effects) {
    s.set("mu", fit.random_effects->mu);
    s.set("sigma", fit.random_effects->sigma);
  }
  s.set("miss_probability_exposed", fit.derived.miss_probability_exposed);
  s.set("miss_probability_unexposed", fit.derived.miss_probability_unexposed);
  s.set("expected_missing_exposed", fit.derived.expected_missing_exposed);
  s.set("expected_missing_unexposed", fit.derived.expected_missing_unexposed);
  s.set("ratio", fit.derived.ratio);
  for (std::size_t i = 0; i < fit.warnings.size(); ++i) s.set("warning." + std::to_string(i + 1), fit.warnings[i]);

  auto& t = s.table("parameters", {"parameter", "estimate", "estimable"});
  const auto labels = parameter_labels(fit.params, names);
  std::size_t i = 0;
  for (std::size_t k = 0; k < fit.params.alpha.size(); ++k, ++i) {
    const bool est = k < fit.estimable.size() ? static_cast<bool>(fit.estimable[k]) : true;
    t.add_row({labels[i], format_number(fit.params.alpha[k]), format_bool(est)});
  }
  for (double a : fit.params.alpha2) t.add_row({labels[i++], format_number(a), "true"});
  t.add_row({labels[i], format_number(fit.params.theta), format_bool(has_free_shift(fit.variant))});
}

RaschParams read_fit_params(const Report& report, const std::string& name) {
  const auto* s = report.find(name);
  if (!s) throw ValidationError("report has no [" + name + "] section");
  const auto* t = s->find_table("parameters");
  if (!t) throw ValidationError("report section [" + name + "] has no parameters table");
  const auto model = parse_capture_model(s->get("model").value_or("dynamic"));
  const auto pc = t->column("parameter"), ec = t->column("estimate");
  std::vector<double> alpha, alpha2;
  std::optional<double> theta;
  for (const auto& row : t->rows) {
    const auto& label = row[pc];
    const double v = parse_number(row[ec], label);
    if (label.rfind("alpha2:", 0) == 0) alpha2.push_back(v);
    else if (label.rfind("alpha:", 0) == 0) alpha.push_back(v);
    else if (label == "theta") theta = v;
  }
  if (alpha.empty() || !theta) throw ValidationError("report parameters are incomplete");
  if (s->get("mu")) theta = s->number("mu");
  return model == CaptureModel::dynamic ? RaschParams::dynamic(alpha, alpha2, *theta)
                                        : RaschParams::independent(alpha, *theta);
}

CsvBlock probability_table(const RaschParams& params, double theta_hat, double delta) {
  CsvBlock t{"probabilities", {"pattern", "exposed_theta_hat", "exposed_minus_delta", "exposed_plus_delta", "unexposed"}, {}};
  const auto at_hat = cell_probabilities(params, theta_hat);
  const auto at_minus = cell_probabilities(params, -delta);
  const auto at_plus = cell_probabilities(params, delta);
  const auto unexposed = cell_probabilities(params, 0.0);
  const int lists = params.lists();
  for (std::uint32_t c = static_cast<std::uint32_t>(at_hat.size()); c-- > 0;) {
    t.add_row({CapturePattern(lists, c).str(), format_number(at_hat[c]), format_number(at_minus[c]),
               format_number(at_plus[c]), format_number(unexposed[c])});
  }
  return t;
}

void add_selection(Report& report, const ModelSelectionReport& sel, const std::vector<std::string>& list_names,
                   const std::vector<std::string>& group_labels) {
  auto& s = report.section("selection");
  s.set("lower_p", sel.lower_p);
  s.set("exclude_saturated", sel.exclude_saturated);
  const auto& chosen = sel.chosen();
  auto terms_of = [&](const CandidateReport& c) {
    std::string out;
    for (const auto& t : c.terms) {
      if (t.kind != LoglinearTerm::Kind::pair) continue;
      out += (out.empty() ? "" : " ") + t.label(list_names);
    }
    return out.empty() ? std::string("none") : out;
  };
  s.set("selected_pairs", terms_of(chosen));
  for (std::size_t g = 0; g < sel.missing_estimates.size(); ++g) {
    s.set("missing_estimate." + group_labels.at(g), sel.missing_estimates[g]);
  }
  std::vector<std::string> header{"pairs", "terms", "saturated", "admissible", "min_p"};
  for (const auto& g : group_labels) {
    for (const char* col : {"pearson.", "p.", "aic.", "bic.", "missing."}) header.push_back(col + g);
  }
  auto& t = s.table("candidates", header);
  for (const auto& c : sel.candidates) {
    std::vector<std::string> row{terms_of(c), std::to_string(c.terms.size()), format_bool(c.saturated),
                                 format_bool(c.admissible), format_number(c.min_pvalue)};
    for (std::size_t g = 0; g < c.fits.size(); ++g) {
      const auto& m = c.fits[g];
      double missing = std::nan("");
      try {
        missing = missing_cell(m);
      } catch (const NumericalError&) {
      }
      row.insert(row.end(), {format_number(m.pearson), format_number(c.pvalues[g]), format_number(m.aic()),
                             format_number(m.bic()), format_number(missing)});
    }
    t.add_row(std::move(row));
  }
}

void add_null_distribution(Report& report, const NullDistribution& dist) {
  auto& s = report.section("bootstrap");
  s.set("regime", to_string(dist.regime));
  s.set("seed", std::to_string(dist.seed));
  s.set("requested", dist.requested);
  s.set("used", static_cast<int>(dist.draws.size()));
  s.set("retried", dist.retried);
  s.set("excluded", dist.excluded);
  if (!dist.sorted.empty()) {
    double sum = 0.0;
    for (double d : dist.draws) sum += d;
    s.set("mean", sum / static_cast<double>(dist.draws.size()));
    s.set("min", dist.sorted.front());
    s.set("max", dist.sorted.back());
  }
}

void add_outcome(Report& report, const std::string& name, const ThreeSidedOutcome& o) {
  auto& s = report.section(name);
  s.set("theta_hat", o.theta_hat);
  s.set("alpha", o.alpha);
  s.set("delta", o.delta);
  s.set("q_alpha_half", o.quantiles.lower_half);
  s.set("q_alpha", o.quantiles.lower);
  s.set("q_one_minus_alpha", o.quantiles.upper);
  s.set("q_one_minus_alpha_half", o.quantiles.upper_half);
  s.set("delta1", o.thresholds.delta1);
  s.set("delta2", o.thresholds.delta2);
  s.set("reject_H0", o.reject_null);
  s.set("reject_Hplus", o.reject_plus);
  s.set("reject_Hminus", o.reject_minus);
  const auto lines = interpret(o);
  for (std::size_t i = 0; i < lines.size(); ++i) s.set("reading." + std::to_string(i + 1), lines[i]);
}

}  // namespace ascertain
