#pragma once

// Plain-text reports: `[section]` headers, `key = value` lines and embedded
// CSV blocks introduced by `@csv name`, each ending at a blank line.
// Numbers are written in shortest round-trip form so a report can be read
// back without loss.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ascertain/estimation.hpp"
#include "ascertain/loglinear.hpp"
#include "ascertain/threesided.hpp"

namespace ascertain {

std::string format_number(double v);
std::string format_bool(bool v);

struct CsvBlock {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  /// Column index by header name; throws if absent.
  std::size_t column(std::string_view name) const;
};

struct ReportSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<CsvBlock> tables;

  void set(const std::string& key, std::string value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, double value) { set(key, format_number(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, format_bool(value)); }

  std::optional<std::string> get(std::string_view key) const;
  /// Parsed numeric value; throws ValidationError if missing or malformed.
  double number(std::string_view key) const;
  CsvBlock& table(const std::string& name, std::vector<std::string> header);
  const CsvBlock* find_table(std::string_view name) const;
};

class Report {
 public:
  ReportSection& section(const std::string& name);
  const ReportSection* find(std::string_view name) const;
  const std::vector<ReportSection>& sections() const noexcept { return sections_; }

  void write(std::ostream& out) const;
  std::string str() const;
  static Report parse(std::istream& in);

 private:
  std::vector<ReportSection> sections_;
};

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Parameter labels: "alpha:<list>", "alpha2:<list>:<list>", "theta".
std::vector<std::string> parameter_labels(const RaschParams& params, const std::vector<std::string>& list_names);

/// Section `name` with the fit summary and an `@csv parameters` block.
void add_fit(Report& report, const std::string& name, const FitResult& fit,
             const std::vector<std::string>& list_names);

/// Capture parameters read back from a section written by add_fit.
RaschParams read_fit_params(const Report& report, const std::string& name = "fit");

/// Cell probabilities for the exposed group at theta-hat, -delta and +delta
/// plus the unexposed column.
CsvBlock probability_table(const RaschParams& params, double theta_hat, double delta);

void add_selection(Report& report, const ModelSelectionReport& selection, const std::vector<std::string>& list_names,
                   const std::vector<std::string>& group_labels);

void add_null_distribution(Report& report, const NullDistribution& dist);
void add_outcome(Report& report, const std::string& name, const ThreeSidedOutcome& outcome);

}  // namespace ascertain
