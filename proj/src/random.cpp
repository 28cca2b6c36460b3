#include "fuselab/random.hpp"

#include <cmath>

namespace fuselab {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

void fill_uniform(Tensor& t, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.data()) v = dist(rng);
}

void fill_normal(Tensor& t, double mean, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(mean, stddev);
    for (double& v : t.data()) v = dist(rng);
}

void fill_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    fill_uniform(t, -bound, bound, rng);
}

}  // namespace fuselab
