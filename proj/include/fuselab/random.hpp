#pragma once

#include <cstdint>
#include <random>

#include "fuselab/tensor.hpp"

namespace fuselab {

using Rng = std::mt19937_64;

// Independent generator for (seed, stream); every random draw in the library
// comes from a generator built here.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

void fill_uniform(Tensor& t, double lo, double hi, Rng& rng);
void fill_normal(Tensor& t, double mean, double stddev, Rng& rng);
// Glorot/Xavier uniform bound for a fan_in x fan_out map.
void fill_glorot(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace fuselab
