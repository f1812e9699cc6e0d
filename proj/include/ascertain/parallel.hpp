#pragma once

#include <cstddef>
#include <functional>

namespace ascertain {

enum class Execution { serial, parallel };

struct ExecutionPolicy {
  Execution mode = Execution::parallel;
  int threads = 0;  ///< 0 = OpenMP default
};

/// Runs body(i) for i in [0, n). The parallel mode uses an OpenMP dynamic
/// schedule; the serial mode is the reference loop. The first exception
/// thrown by any body is rethrown after the loop.
void for_each_index(const ExecutionPolicy& policy, std::size_t n, const std::function<void(std::size_t)>& body);

/// Threads the parallel mode would use.
int effective_threads(const ExecutionPolicy& policy);

}  // namespace ascertain
