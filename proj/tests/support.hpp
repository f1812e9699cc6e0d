#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "ascertain/tables.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(ASCERTAIN_DATA_DIR) + "/" + name; }

inline ascertain::TableInput load(const std::string& name) {
  std::ifstream in(data_path(name));
  return ascertain::read_table_csv(in);
}

inline ascertain::ContingencyTable table3(std::initializer_list<std::pair<const char*, std::int64_t>> cells,
                                          bool complete = false) {
  ascertain::ContingencyTable t(3, complete ? ascertain::Completeness::complete
                                            : ascertain::Completeness::missing_all_zero);
  for (auto [p, n] : cells) t.set(ascertain::CapturePattern::parse(p), n);
  return t;
}

/// Observed NVDRS-style tables, lists ordered DC, LE, CME.
inline ascertain::ContingencyTable observed_exposed() {
  return table3({{"111", 189}, {"110", 18}, {"101", 47}, {"100", 44}, {"011", 128}, {"010", 35}, {"001", 47}});
}
inline ascertain::ContingencyTable observed_unexposed() {
  return table3({{"111", 155}, {"110", 16}, {"101", 35}, {"100", 31}, {"011", 110}, {"010", 33}, {"001", 33}});
}

}  // namespace testing
