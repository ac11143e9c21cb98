#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mdam {

using Rng = std::mt19937_64;

/// Independent stream for (master seed, stream id). Streams with different ids
/// are seeded through std::seed_seq so neighbouring ids do not correlate.
Rng make_stream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t salt = 0);

/// Child stream derived from the next output of a parent generator.
Rng split(Rng& parent);

double uniform01(Rng& rng);
double standard_normal(Rng& rng);
bool bernoulli(Rng& rng, double p);

/// Index drawn from an unnormalised nonnegative weight vector.
std::size_t categorical(Rng& rng, std::span<const double> probs);

/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Chi-square draw with `df` degrees of freedom.
double chi_square(Rng& rng, double df);

}  // namespace mdam
