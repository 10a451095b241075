#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace mtda {

// Seeded streams; the helpers below replace the std:: distributions and give
// the same values on every standard library.
using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a list of tags.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag_a, std::uint64_t tag_b = 0,
                          std::uint64_t tag_c = 0);

double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
double normal(Rng& rng);
// Uniform integer in [0, n), rejection sampled.
std::size_t uniform_index(Rng& rng, std::size_t n);

void shuffle(std::vector<std::size_t>& v, Rng& rng);
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace mtda
