#include "mdam/random.hpp"

#include <numeric>
#include <stdexcept>

namespace mdam {

Rng make_stream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t salt) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
        static_cast<std::uint32_t>(stream_id),   static_cast<std::uint32_t>(stream_id >> 32),
        static_cast<std::uint32_t>(salt),        static_cast<std::uint32_t>(salt >> 32),
        0x6d64616du};
    return Rng(seq);
}

Rng split(Rng& parent) {
    const std::uint64_t a = parent();
    const std::uint64_t b = parent();
    return make_stream(a, b, 0x73706c6974ull);
}

double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double standard_normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

bool bernoulli(Rng& rng, double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01(rng) < p;
}

std::size_t categorical(Rng& rng, std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("categorical: empty probability vector");
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (!(total > 0.0)) throw std::invalid_argument("categorical: probabilities sum to zero");
    double u = uniform01(rng) * total;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (u < probs[k]) return k;
        u -= probs[k];
    }
    // rounding: fall back to the last level with positive mass
    for (std::size_t k = probs.size(); k-- > 0;)
        if (probs[k] > 0.0) return k;
    return probs.size() - 1;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double chi_square(Rng& rng, double df) {
    return std::chi_squared_distribution<double>(df)(rng);
}

}  // namespace mdam
