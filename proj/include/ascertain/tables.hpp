#pragma once

// 2^J contingency tables of list-membership patterns.
//
// A pattern is stored as an integer cell index with list 1 in the most
// significant bit, so numeric order equals lexicographic order of the
// pattern strings ("000" < "001" < ... < "111").

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ascertain {

inline constexpr int kMaxLists = 20;

class CapturePattern {
 public:
  CapturePattern(int lists, std::uint32_t index);

  static CapturePattern from_bits(const std::vector<int>& bits);
  static CapturePattern parse(std::string_view text);

  int lists() const noexcept { return lists_; }
  std::uint32_t index() const noexcept { return index_; }

  /// Membership of list k, zero-based (k = 0 is list 1).
  int bit(int k) const noexcept { return static_cast<int>((index_ >> (lists_ - 1 - k)) & 1u); }
  int ones() const noexcept;
  bool is_all_zero() const noexcept { return index_ == 0; }

  std::string str() const;

  friend bool operator==(const CapturePattern&, const CapturePattern&) = default;
  friend auto operator<=>(const CapturePattern& a, const CapturePattern& b) {
    if (auto c = a.lists_ <=> b.lists_; c != 0) return c;
    return a.index_ <=> b.index_;
  }

 private:
  int lists_;
  std::uint32_t index_;
};

enum class Completeness { complete, missing_all_zero };

class ContingencyTable {
 public:
  ContingencyTable() = default;
  ContingencyTable(int lists, Completeness completeness, std::string exposure_label = {});

  /// Builds a table from one count per cell index; counts[0] must be zero
  /// when the all-zero cell is missing.
  static ContingencyTable from_counts(int lists, Completeness completeness,
                                      std::vector<std::int64_t> counts,
                                      std::string exposure_label = {});

  int lists() const noexcept { return lists_; }
  std::uint32_t cells() const noexcept { return 1u << lists_; }
  Completeness completeness() const noexcept { return completeness_; }
  bool complete() const noexcept { return completeness_ == Completeness::complete; }
  const std::string& exposure_label() const noexcept { return label_; }

  std::int64_t count(const CapturePattern& p) const;
  std::int64_t count(std::uint32_t index) const;
  void set(const CapturePattern& p, std::int64_t n);
  void add(const CapturePattern& p, std::int64_t n = 1);

  /// Sum of stored counts. For complete tables this is N_e.
  std::int64_t total() const noexcept;

  /// Copy with the all-zero cell filled in.
  ContingencyTable completed(std::int64_t missing_count) const;
  /// Copy with the all-zero cell dropped.
  ContingencyTable observed_part() const;

  /// Dense view, index 0 is the all-zero cell (zero when missing).
  const std::vector<std::int64_t>& dense() const noexcept { return counts_; }

  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;

 private:
  int lists_ = 0;
  Completeness completeness_ = Completeness::missing_all_zero;
  std::string label_;
  std::vector<std::int64_t> counts_;
};

struct RecordRow {
  std::string exposure;
  std::vector<int> memberships;
};

using TableSet = std::map<std::string, ContingencyTable>;

/// Counts observed patterns per exposure group. Rows missed by every list
/// are rejected since they cannot come from observed data.
TableSet aggregate(const std::vector<RecordRow>& records, int lists);

std::int64_t totals(const ContingencyTable& table) noexcept;

/// Parsed input file: tables per exposure label plus optional list names
/// (from a `# lists: A,B,C` directive or the record CSV header).
struct TableInput {
  TableSet tables;
  std::vector<std::string> list_names;
  int lists = 0;
};

/// Record CSV: `exposure,list1,...,listJ` with 0/1 flags.
TableInput read_record_csv(std::istream& in);
/// Aggregated CSV: `exposure,pattern,count`. A row for the all-zero pattern
/// marks that group's table complete.
TableInput read_aggregated_csv(std::istream& in);
/// Dispatches on the header line.
TableInput read_table_csv(std::istream& in);

void write_aggregated_csv(std::ostream& out, const TableSet& tables,
                          const std::vector<std::string>& list_names = {});

/// Names for J lists, falling back to list1..listJ.
std::vector<std::string> list_names_or_default(const std::vector<std::string>& names, int lists);

}  // namespace ascertain
