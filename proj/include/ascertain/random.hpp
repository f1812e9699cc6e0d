#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace ascertain {

using Rng = std::mt19937_64;

/// Independent generator for the stream keyed by (seed, key...). The same
/// key always yields the same sequence, whatever thread draws from it.
Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> key);

/// Multinomial(n, probs) by sequential conditional binomials.
std::vector<std::int64_t> draw_multinomial(std::int64_t n, std::span<const double> probs, Rng& rng);

/// Independent Poisson(mean * probs[c]) counts per cell.
std::vector<std::int64_t> draw_poisson_cells(double mean, std::span<const double> probs, Rng& rng);

}  // namespace ascertain
