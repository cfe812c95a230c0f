#pragma once

// Seeded random streams. Engines come from the standard library; integer
// and real distributions come from Boost.Random, whose output is fixed
// across platforms, unlike the std:: distributions.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace vitalws {

using Rng = std::mt19937_64;

/// Independent stream for a tuple of keys, e.g. (master seed, tree index).
inline Rng derived_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(keys.size() * 2);
  for (const auto k : keys) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Uniform integer in [lo, hi].
template <class Int>
Int uniform_int(Rng& rng, Int lo, Int hi) {
  return boost::random::uniform_int_distribution<Int>(lo, hi)(rng);
}

/// Uniform real in [lo, hi).
inline double uniform_real(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return boost::random::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return boost::random::normal_distribution<double>(mean, sd)(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform_real(rng) < p; }

/// Fisher-Yates shuffle driven by `uniform_int`.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = uniform_int<std::size_t>(rng, 0, i - 1);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace vitalws
