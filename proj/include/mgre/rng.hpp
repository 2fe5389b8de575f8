#pragma once

#include <cstdint>
#include <string_view>

namespace mgre {

// SplitMix64 (Steele, Lea & Flood 2014). The state advances by the golden
// gamma 0x9E3779B97F4A7C15 and each output is a fixed bijective mix of the
// state, so draw i of seed s is available directly through uniform_at(s, i).
// Uniform doubles use the top 53 bits; normals use Box-Muller on two
// consecutive uniforms. Nothing here depends on <random> distributions, so
// sequences are identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() { return bits_at(seed_, counter_++); }
    double uniform() { return to_unit(next_u64()); }
    double normal();
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    static std::uint64_t bits_at(std::uint64_t seed, std::uint64_t index);
    static double uniform_at(std::uint64_t seed, std::uint64_t index) { return to_unit(bits_at(seed, index)); }
    // Two independent standard normals drawn from uniforms 2*index and 2*index+1.
    static void normal_pair_at(std::uint64_t seed, std::uint64_t index, double& a, double& b);

    static double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Child seed for a named component; used to split one root seed hierarchically.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label, std::uint64_t index = 0);

}  // namespace mgre
