#pragma once

#include <cstdint>

#include "mgre/tensor.hpp"

namespace mgre {

// 0: fixed manual pattern, 1: one learned pattern shared by all echoes,
// 2: learned pattern per echo.
enum class SpoMode : int { Manual = 0, SingleEcho = 1, MultiEcho = 2 };

SpoMode spo_from_int(int v);

struct PatternWeights {
    RealArray w;  // [N_T, N_y, N_z]; slabs identical in SingleEcho mode
    double slope = 0.25;
    double gamma = 0.25;
    SpoMode mode = SpoMode::MultiEcho;

    static PatternWeights zeros(std::size_t echoes, std::size_t ny, std::size_t nz, double gamma, double slope,
                                SpoMode mode);
};

struct ProbPattern {
    RealArray p;  // [N_T, N_y, N_z], entries in [0, 1]
};

struct BinaryPattern {
    RealArray u;  // [N_T, N_y, N_z], entries 0 or 1
    std::size_t calib_size = 0;

    std::size_t count(std::size_t echo) const;
    double ratio() const;
};

double sigmoid(double x);

// sigmoid(a w) per entry, then per-echo linear renormalization to mean gamma:
// scale down when the mean exceeds gamma, scale the complement otherwise.
ProbPattern build_prob_pattern(const PatternWeights& weights);

// Vector-Jacobian product of build_prob_pattern: dL/dw from dL/dP.
// Used as the straight-through gradient of the Bernoulli node, where the
// upstream gradient with respect to the binary mask stands in for dL/dP.
RealArray straight_through_grad(const RealArray& dl_du, const PatternWeights& weights);

// Half-open index range [n/2 - c/2, n/2 - c/2 + c) of the central calibration block.
std::pair<std::size_t, std::size_t> calib_range(std::size_t n, std::size_t c);
void force_calibration(RealArray& u, std::size_t calib_size);

// Independent Bernoulli(P) draw per location and echo, then the central
// calib_size x calib_size block set to one. With shared_across_echoes the
// first echo's draw is reused for every echo.
BinaryPattern sample_binary(const ProbPattern& p, std::uint64_t seed, std::size_t calib_size,
                            bool shared_across_echoes = false);

// Weighted sampling without replacement with exactly `count` locations per
// echo (calibration block included), for prospective schedules that need
// equal per-echo sample counts. Keys follow Efraimidis-Spirakis.
BinaryPattern sample_binary_exact(const ProbPattern& p, std::size_t count, std::uint64_t seed,
                                  std::size_t calib_size, bool shared_across_echoes = false);

struct ManualDensity {
    RealArray density;        // [N_y, N_z]
    std::vector<double> level_density;
    std::vector<std::size_t> level_count;
};

// Concentric levels of equal radial width; level 0 fully sampled, outer
// level densities c * ratio^l (capped at 1) with c solved so the expected
// sampling ratio is gamma.
ManualDensity manual_vd_density(std::size_t ny, std::size_t nz, double gamma, std::size_t n_levels = 5,
                                double level_ratio = 0.5);
BinaryPattern manual_vd_pattern(std::size_t echoes, std::size_t ny, std::size_t nz, double gamma,
                                std::size_t n_levels, std::uint64_t seed, double level_ratio = 0.5,
                                std::size_t calib_size = 0);

}  // namespace mgre
