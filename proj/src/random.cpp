#include "ascertain/random.hpp"

#include <algorithm>

#include <omp.h>

#include "ascertain/error.hpp"
#include "ascertain/parallel.hpp"

namespace ascertain {

Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (key.size() + 1));
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto k : key) push(k);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

std::vector<std::int64_t> draw_multinomial(std::int64_t n, std::span<const double> probs, Rng& rng) {
  if (n < 0) throw ValidationError("multinomial size must be non-negative");
  std::vector<std::int64_t> out(probs.size(), 0);
  double remaining_mass = 1.0;
  std::int64_t remaining = n;
  for (std::size_t c = 0; c < probs.size() && remaining > 0; ++c) {
    if (c + 1 == probs.size()) {
      out[c] = remaining;
      break;
    }
    const double p = remaining_mass > 0 ? std::clamp(probs[c] / remaining_mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::int64_t> binom(remaining, p);
    out[c] = binom(rng);
    remaining -= out[c];
    remaining_mass -= probs[c];
  }
  return out;
}

std::vector<std::int64_t> draw_poisson_cells(double mean, std::span<const double> probs, Rng& rng) {
  std::vector<std::int64_t> out(probs.size(), 0);
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double m = mean * probs[c];
    if (m <= 0) continue;
    std::poisson_distribution<std::int64_t> pois(m);
    out[c] = pois(rng);
  }
  return out;
}

void for_each_index(const ExecutionPolicy& policy, std::size_t n, const std::function<void(std::size_t)>& body) {
  std::exception_ptr error;
  if (policy.mode == Execution::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const int threads = effective_threads(policy);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(ascertain_for_each_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

int effective_threads(const ExecutionPolicy& policy) {
  if (policy.mode == Execution::serial) return 1;
  return policy.threads > 0 ? policy.threads : omp_get_max_threads();
}

}  // namespace ascertain
