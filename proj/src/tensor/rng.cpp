#include "mgre/rng.hpp"

#include <cmath>
#include <numbers>

namespace mgre {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
}

std::uint64_t splitmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t Rng::bits_at(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed + (index + 1) * kGamma);
}

double Rng::normal() {
    double a = 0.0, b = 0.0;
    const std::uint64_t pair = counter_ / 2 + (counter_ % 2);
    counter_ = 2 * (pair + 1);
    normal_pair_at(seed_, pair, a, b);
    return a;
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

void Rng::normal_pair_at(std::uint64_t seed, std::uint64_t index, double& a, double& b) {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform_at(seed, 2 * index);
    const double u2 = uniform_at(seed, 2 * index + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    a = r * std::cos(t);
    b = r * std::sin(t);
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label, std::uint64_t index) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return splitmix64(splitmix64(parent ^ h) + index * kGamma);
}

}  // namespace mgre
