#include "ascertain/tables.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "ascertain/error.hpp"

namespace ascertain {

namespace {

void check_lists(int lists) {
  if (lists < 1 || lists > kMaxLists) {
    throw ValidationError("number of lists must be in [1, " + std::to_string(kMaxLists) +
                          "], got " + std::to_string(lists));
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::int64_t parse_count(std::string_view s, std::size_t line) {
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw ParseError(line, "invalid count '" + std::string(s) + "'");
  if (v < 0) throw ParseError(line, "negative count " + std::string(s));
  return v;
}

// Reads the next non-empty line. Comment lines are handed to on_comment.
template <class OnComment>
bool next_line(std::istream& in, std::string& line, std::size_t& line_no, OnComment&& on_comment) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      on_comment(t.substr(1));
      continue;
    }
    line = std::string(t);
    return true;
  }
  return false;
}

struct ListDirective {
  std::vector<std::string> names;
  void operator()(std::string_view comment) {
    const auto t = trim(comment);
    constexpr std::string_view key = "lists:";
    if (t.substr(0, key.size()) == key) names = split_csv(trim(t.substr(key.size())));
  }
};

}  // namespace

// ---- CapturePattern --------------------------------------------------------

CapturePattern::CapturePattern(int lists, std::uint32_t index) : lists_(lists), index_(index) {
  check_lists(lists);
  if (index >= (1u << lists)) throw ValidationError("pattern index out of range");
}

CapturePattern CapturePattern::from_bits(const std::vector<int>& bits) {
  check_lists(static_cast<int>(bits.size()));
  std::uint32_t index = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw ValidationError("pattern entries must be 0 or 1");
    index = (index << 1) | static_cast<std::uint32_t>(b);
  }
  return CapturePattern(static_cast<int>(bits.size()), index);
}

CapturePattern CapturePattern::parse(std::string_view text) {
  std::vector<int> bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1') {
      throw ValidationError("invalid pattern '" + std::string(text) + "': expected 0/1 characters");
    }
    bits.push_back(c - '0');
  }
  if (bits.empty()) throw ValidationError("empty pattern");
  return from_bits(bits);
}

int CapturePattern::ones() const noexcept { return std::popcount(index_); }

std::string CapturePattern::str() const {
  std::string s(static_cast<std::size_t>(lists_), '0');
  for (int k = 0; k < lists_; ++k) s[static_cast<std::size_t>(k)] = bit(k) ? '1' : '0';
  return s;
}

// ---- ContingencyTable ------------------------------------------------------

ContingencyTable::ContingencyTable(int lists, Completeness completeness, std::string exposure_label)
    : lists_(lists), completeness_(completeness), label_(std::move(exposure_label)) {
  check_lists(lists);
  counts_.assign(std::size_t{1} << lists, 0);
}

ContingencyTable ContingencyTable::from_counts(int lists, Completeness completeness,
                                               std::vector<std::int64_t> counts,
                                               std::string exposure_label) {
  ContingencyTable t(lists, completeness, std::move(exposure_label));
  if (counts.size() != t.counts_.size()) {
    throw ValidationError("expected " + std::to_string(t.counts_.size()) + " cell counts, got " +
                          std::to_string(counts.size()));
  }
  if (std::any_of(counts.begin(), counts.end(), [](auto c) { return c < 0; })) {
    throw ValidationError("cell counts must be non-negative");
  }
  if (completeness == Completeness::missing_all_zero && counts[0] != 0) {
    throw ValidationError("all-zero cell must be empty in a table with the all-zero cell missing");
  }
  t.counts_ = std::move(counts);
  return t;
}

std::int64_t ContingencyTable::count(std::uint32_t index) const {
  if (index >= counts_.size()) throw ValidationError("cell index out of range");
  if (index == 0 && !complete()) throw ValidationError("all-zero cell is not observed");
  return counts_[index];
}

std::int64_t ContingencyTable::count(const CapturePattern& p) const {
  if (p.lists() != lists_) throw ValidationError("pattern length does not match table");
  return count(p.index());
}

void ContingencyTable::set(const CapturePattern& p, std::int64_t n) {
  if (p.lists() != lists_) throw ValidationError("pattern length does not match table");
  if (n < 0) throw ValidationError("cell counts must be non-negative");
  if (p.is_all_zero() && !complete()) throw ValidationError("all-zero cell is not observed");
  counts_[p.index()] = n;
}

void ContingencyTable::add(const CapturePattern& p, std::int64_t n) { set(p, count(p) + n); }

std::int64_t ContingencyTable::total() const noexcept {
  std::int64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

ContingencyTable ContingencyTable::completed(std::int64_t missing_count) const {
  if (missing_count < 0) throw ValidationError("missing-cell count must be non-negative");
  ContingencyTable t = *this;
  t.completeness_ = Completeness::complete;
  t.counts_[0] = missing_count;
  return t;
}

ContingencyTable ContingencyTable::observed_part() const {
  ContingencyTable t = *this;
  t.completeness_ = Completeness::missing_all_zero;
  t.counts_[0] = 0;
  return t;
}

std::int64_t totals(const ContingencyTable& table) noexcept { return table.total(); }

// ---- aggregation -----------------------------------------------------------

TableSet aggregate(const std::vector<RecordRow>& records, int lists) {
  check_lists(lists);
  TableSet out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (static_cast<int>(r.memberships.size()) != lists) {
      throw ValidationError("record " + std::to_string(i) + ": expected " + std::to_string(lists) +
                            " membership flags, got " + std::to_string(r.memberships.size()));
    }
    CapturePattern p = [&] {
      try {
        return CapturePattern::from_bits(r.memberships);
      } catch (const ValidationError& e) {
        throw ValidationError("record " + std::to_string(i) + ": " + e.what());
      }
    }();
    if (p.is_all_zero()) {
      throw ValidationError("record " + std::to_string(i) + ": not ascertained by any list");
    }
    auto it = out.find(r.exposure);
    if (it == out.end()) {
      it = out.emplace(r.exposure, ContingencyTable(lists, Completeness::missing_all_zero, r.exposure))
               .first;
    }
    it->second.add(p);
  }
  return out;
}

// ---- CSV -------------------------------------------------------------------

namespace {

TableInput read_records_after_header(std::istream& in, const std::vector<std::string>& header,
                                     std::size_t line_no) {
  const int lists = static_cast<int>(header.size()) - 1;
  if (lists < 1) throw ParseError(line_no, "record header needs at least one list column");
  std::vector<RecordRow> rows;
  std::string line;
  auto ignore = [](std::string_view) {};
  while (next_line(in, line, line_no, ignore)) {
    auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != lists + 1) {
      throw ParseError(line_no, "expected " + std::to_string(lists + 1) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    RecordRow r{fields[0], {}};
    if (r.exposure.empty()) throw ParseError(line_no, "empty exposure label");
    for (int k = 1; k <= lists; ++k) {
      const auto& f = fields[static_cast<std::size_t>(k)];
      if (f != "0" && f != "1") throw ParseError(line_no, "membership flag must be 0 or 1, got '" + f + "'");
      r.memberships.push_back(f == "1");
    }
    if (std::none_of(r.memberships.begin(), r.memberships.end(), [](int b) { return b; })) {
      throw ParseError(line_no, "record not ascertained by any list");
    }
    rows.push_back(std::move(r));
  }
  TableInput result;
  result.lists = lists;
  result.list_names.assign(header.begin() + 1, header.end());
  result.tables = aggregate(rows, lists);
  return result;
}

TableInput read_aggregated_after_header(std::istream& in, std::size_t line_no, ListDirective& directive) {
  TableInput result;
  std::map<std::string, std::vector<std::int64_t>> counts;
  std::map<std::string, bool> complete;
  std::map<std::string, std::vector<bool>> seen;
  std::string line;
  while (next_line(in, line, line_no, directive)) {
    auto fields = split_csv(line);
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 fields (exposure,pattern,count), got " + std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw ParseError(line_no, "empty exposure label");
    CapturePattern p = [&] {
      try {
        return CapturePattern::parse(fields[1]);
      } catch (const ValidationError& e) {
        throw ParseError(line_no, e.what());
      }
    }();
    if (result.lists == 0) result.lists = p.lists();
    if (p.lists() != result.lists) {
      throw ParseError(line_no, "pattern '" + fields[1] + "' has " + std::to_string(p.lists()) +
                                    " lists, expected " + std::to_string(result.lists));
    }
    const auto n = parse_count(fields[2], line_no);
    auto& c = counts[fields[0]];
    auto& s = seen[fields[0]];
    if (c.empty()) {
      c.assign(std::size_t{1} << result.lists, 0);
      s.assign(c.size(), false);
    }
    if (s[p.index()]) throw ParseError(line_no, "duplicate pattern '" + fields[1] + "' for " + fields[0]);
    s[p.index()] = true;
    c[p.index()] = n;
    if (p.is_all_zero()) complete[fields[0]] = true;
  }
  for (auto& [label, c] : counts) {
    const auto completeness = complete[label] ? Completeness::complete : Completeness::missing_all_zero;
    result.tables.emplace(label, ContingencyTable::from_counts(result.lists, completeness, c, label));
  }
  result.list_names = directive.names;
  if (!result.list_names.empty() && static_cast<int>(result.list_names.size()) != result.lists &&
      result.lists != 0) {
    throw ValidationError("'# lists:' directive names " + std::to_string(result.list_names.size()) +
                          " lists but patterns have " + std::to_string(result.lists));
  }
  return result;
}

}  // namespace

TableInput read_record_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto ignore = [](std::string_view) {};
  if (!next_line(in, line, line_no, ignore)) throw ParseError(line_no, "missing header");
  auto header = split_csv(line);
  if (header.empty() || header[0] != "exposure") throw ParseError(line_no, "header must start with 'exposure'");
  return read_records_after_header(in, header, line_no);
}

TableInput read_aggregated_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  ListDirective directive;
  if (!next_line(in, line, line_no, directive)) throw ParseError(line_no, "missing header");
  if (split_csv(line) != std::vector<std::string>{"exposure", "pattern", "count"}) {
    throw ParseError(line_no, "header must be 'exposure,pattern,count'");
  }
  return read_aggregated_after_header(in, line_no, directive);
}

TableInput read_table_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  ListDirective directive;
  if (!next_line(in, line, line_no, directive)) throw ParseError(line_no, "missing header");
  auto header = split_csv(line);
  if (header == std::vector<std::string>{"exposure", "pattern", "count"}) {
    return read_aggregated_after_header(in, line_no, directive);
  }
  if (!header.empty() && header[0] == "exposure") return read_records_after_header(in, header, line_no);
  throw ParseError(line_no, "unrecognized header '" + line + "'");
}

void write_aggregated_csv(std::ostream& out, const TableSet& tables, const std::vector<std::string>& list_names) {
  if (!list_names.empty()) {
    out << "# lists: ";
    for (std::size_t i = 0; i < list_names.size(); ++i) out << (i ? "," : "") << list_names[i];
    out << '\n';
  }
  out << "exposure,pattern,count\n";
  for (const auto& [label, t] : tables) {
    // Descending pattern order puts 1...1 first, as in the usual table layout.
    for (std::uint32_t i = t.cells(); i-- > 0;) {
      if (i == 0 && !t.complete()) continue;
      out << label << ',' << CapturePattern(t.lists(), i).str() << ',' << t.dense()[i] << '\n';
    }
  }
}

std::vector<std::string> list_names_or_default(const std::vector<std::string>& names, int lists) {
  if (static_cast<int>(names.size()) == lists) return names;
  std::vector<std::string> out;
  for (int k = 1; k <= lists; ++k) out.push_back("list" + std::to_string(k));
  return out;
}

}  // namespace ascertain
