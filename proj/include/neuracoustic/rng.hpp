#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string_view>

namespace neuracoustic {

// splitmix64 finalizer. Used both for seed derivation and content hashing.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t seed_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2)));
}

// Order-sensitive seed derivation: hash(master, part0, part1, ...).
// Tasks seeded this way are independent of scheduling and worker count.
template <typename... Parts>
constexpr std::uint64_t derive_seed(std::uint64_t master, Parts... parts) {
  std::uint64_t h = mix64(master);
  ((h = seed_combine(h, static_cast<std::uint64_t>(parts))), ...);
  return h;
}

std::uint64_t fnv1a64(const void* data, std::size_t n,
                      std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64(std::string_view s,
                      std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);

// Deterministic RNG with portable samplers. std::mt19937_64 output is fully
// specified by the standard; the distributions here are hand-rolled because
// the std:: distribution algorithms are implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in (0, 1]; never returns 0 so log() is safe.
  double uniform01() {
    return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
  }

  // Box-Muller; consumes exactly two uniforms per call.
  double gaussian();

  // Inverse-CDF by sequential search; consumes exactly one uniform per draw,
  // so streams with different means stay coupled (common random numbers).
  // Means above 30 are split recursively via Poisson additivity.
  std::uint32_t poisson(double mean);

  // Same sampler with exp(-mean) precomputed by the caller (hot path).
  std::uint32_t poisson_with_expneg(double mean, double exp_neg_mean) {
    const double u = uniform01();
    if (u <= exp_neg_mean) return 0;  // overwhelmingly the common case here
    double p = exp_neg_mean;
    double cdf = p;
    std::uint32_t k = 0;
    while (u > cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
      if (k > 10000) break;  // cdf has numerically saturated
    }
    return k;
  }

private:
  std::mt19937_64 eng_;
};

}  // namespace neuracoustic
