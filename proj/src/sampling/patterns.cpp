#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mgre/rng.hpp"
#include "mgre/sampling.hpp"

namespace mgre {

SpoMode spo_from_int(int v) {
    if (v < 0 || v > 2) throw std::invalid_argument("spo must be 0, 1 or 2, got " + std::to_string(v));
    return static_cast<SpoMode>(v);
}

PatternWeights PatternWeights::zeros(std::size_t echoes, std::size_t ny, std::size_t nz, double gamma, double slope,
                                     SpoMode mode) {
    return PatternWeights{RealArray({echoes, ny, nz}, 0.0), slope, gamma, mode};
}

std::size_t BinaryPattern::count(std::size_t echo) const {
    auto s = u.slab(echo);
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](double v) { return v != 0.0; }));
}

double BinaryPattern::ratio() const {
    return std::accumulate(u.values().begin(), u.values().end(), 0.0) / static_cast<double>(u.size());
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

void check_weights(const PatternWeights& w) {
    if (!(w.gamma > 0.0 && w.gamma <= 1.0)) {
        throw std::invalid_argument("gamma must lie in (0, 1], got " + std::to_string(w.gamma));
    }
    if (!(w.slope > 0.0)) throw std::invalid_argument("sigmoid slope must be positive");
    if (w.w.ndim() != 3) throw std::invalid_argument("pattern weights must be [N_T, N_y, N_z]");
}

// Echo slab of w feeding echo j.
std::size_t source_slab(const PatternWeights& w, std::size_t j) { return w.mode == SpoMode::SingleEcho ? 0 : j; }

void renormalize(std::span<double> p, double gamma) {
    const double n = static_cast<double>(p.size());
    const double mean = std::accumulate(p.begin(), p.end(), 0.0) / n;
    if (mean >= gamma) {
        const double scale = gamma / mean;
        for (auto& v : p) v = std::clamp(v * scale, 0.0, 1.0);
    } else {
        const double scale = (1.0 - gamma) / (1.0 - mean);
        for (auto& v : p) v = std::clamp(1.0 - (1.0 - v) * scale, 0.0, 1.0);
    }
}

}  // namespace

ProbPattern build_prob_pattern(const PatternWeights& weights) {
    check_weights(weights);
    const std::size_t nt = weights.w.extent(0), plane = weights.w.slab_size();
    RealArray p(weights.w.shape());
    for (std::size_t j = 0; j < nt; ++j) {
        auto src = weights.w.slab(source_slab(weights, j));
        auto dst = p.slab(j);
        for (std::size_t v = 0; v < plane; ++v) dst[v] = sigmoid(weights.slope * src[v]);
        renormalize(dst, weights.gamma);
    }
    return ProbPattern{std::move(p)};
}

RealArray straight_through_grad(const RealArray& dl_du, const PatternWeights& weights) {
    check_weights(weights);
    if (dl_du.shape() != weights.w.shape()) {
        throw std::invalid_argument("gradient shape " + shape_string(dl_du.shape()) + " does not match weights " +
                                    shape_string(weights.w.shape()));
    }
    const std::size_t nt = weights.w.extent(0), plane = weights.w.slab_size();
    const double n = static_cast<double>(plane), a = weights.slope, gamma = weights.gamma;
    RealArray grad(weights.w.shape());
    std::vector<double> s(plane);
    for (std::size_t j = 0; j < nt; ++j) {
        auto w = weights.w.slab(source_slab(weights, j));
        auto g = dl_du.slab(j);
        for (std::size_t v = 0; v < plane; ++v) s[v] = sigmoid(a * w[v]);
        const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
        auto out = grad.slab(source_slab(weights, j));
        if (mean >= gamma) {
            // P = s * gamma / mean
            double gs = 0.0;
            for (std::size_t v = 0; v < plane; ++v) gs += g[v] * s[v];
            const double c = gamma / mean, coupling = gamma * gs / (mean * mean * n);
            for (std::size_t v = 0; v < plane; ++v) out[v] += (c * g[v] - coupling) * a * s[v] * (1.0 - s[v]);
        } else {
            // P = 1 - (1 - s) * (1 - gamma) / (1 - mean)
            double gs = 0.0;
            for (std::size_t v = 0; v < plane; ++v) gs += g[v] * (1.0 - s[v]);
            const double c = (1.0 - gamma) / (1.0 - mean);
            const double coupling = (1.0 - gamma) * gs / ((1.0 - mean) * (1.0 - mean) * n);
            for (std::size_t v = 0; v < plane; ++v) out[v] += (c * g[v] - coupling) * a * s[v] * (1.0 - s[v]);
        }
    }
    if (weights.mode == SpoMode::SingleEcho) {
        for (std::size_t j = 1; j < nt; ++j) std::copy_n(grad.slab(0).begin(), plane, grad.slab(j).begin());
    }
    return grad;
}

std::pair<std::size_t, std::size_t> calib_range(std::size_t n, std::size_t c) {
    const std::size_t lo = n / 2 - c / 2;
    return {lo, lo + c};
}

void force_calibration(RealArray& u, std::size_t calib_size) {
    if (calib_size == 0) return;
    const std::size_t nt = u.extent(0), ny = u.extent(1), nz = u.extent(2);
    if (calib_size > ny || calib_size > nz) {
        throw std::invalid_argument("calibration size " + std::to_string(calib_size) + " exceeds grid " +
                                    std::to_string(ny) + "x" + std::to_string(nz));
    }
    const auto [y0, y1] = calib_range(ny, calib_size);
    const auto [z0, z1] = calib_range(nz, calib_size);
    for (std::size_t j = 0; j < nt; ++j)
        for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t z = z0; z < z1; ++z) u.at(j, y, z) = 1.0;
}

namespace {

void check_calib(const RealArray& p, std::size_t calib_size) {
    if (p.ndim() != 3) throw std::invalid_argument("pattern must be [N_T, N_y, N_z]");
    if (calib_size > p.extent(1) || calib_size > p.extent(2)) {
        throw std::invalid_argument("calibration size " + std::to_string(calib_size) + " exceeds grid " +
                                    std::to_string(p.extent(1)) + "x" + std::to_string(p.extent(2)));
    }
}

}  // namespace

BinaryPattern sample_binary(const ProbPattern& p, std::uint64_t seed, std::size_t calib_size,
                            bool shared_across_echoes) {
    check_calib(p.p, calib_size);
    const std::size_t nt = p.p.extent(0), plane = p.p.slab_size();
    RealArray u(p.p.shape());
    for (std::size_t j = 0; j < nt; ++j) {
        const std::size_t draw_echo = shared_across_echoes ? 0 : j;
        auto prob = p.p.slab(draw_echo);
        auto out = u.slab(j);
        for (std::size_t v = 0; v < plane; ++v) {
            const double z = Rng::uniform_at(seed, draw_echo * plane + v);
            out[v] = z < prob[v] ? 1.0 : 0.0;
        }
    }
    force_calibration(u, calib_size);
    return BinaryPattern{std::move(u), calib_size};
}

BinaryPattern sample_binary_exact(const ProbPattern& p, std::size_t count, std::uint64_t seed,
                                  std::size_t calib_size, bool shared_across_echoes) {
    check_calib(p.p, calib_size);
    const std::size_t nt = p.p.extent(0), ny = p.p.extent(1), nz = p.p.extent(2), plane = ny * nz;
    if (count > plane) throw std::invalid_argument("requested sample count exceeds grid size");
    if (count < calib_size * calib_size) throw std::invalid_argument("sample count smaller than calibration block");
    RealArray u(p.p.shape());
    force_calibration(u, calib_size);
    std::vector<std::pair<double, std::size_t>> keys;
    keys.reserve(plane);
    for (std::size_t j = 0; j < nt; ++j) {
        const std::size_t draw_echo = shared_across_echoes ? 0 : j;
        auto prob = p.p.slab(shared_across_echoes ? 0 : j);
        auto out = u.slab(j);
        keys.clear();
        for (std::size_t v = 0; v < plane; ++v) {
            if (out[v] != 0.0) continue;
            const double z = 1.0 - Rng::uniform_at(seed, draw_echo * plane + v);  // (0, 1]
            const double key = prob[v] > 0.0 ? std::log(z) / prob[v] : -INFINITY;
            keys.emplace_back(key, v);
        }
        const std::size_t need = count - calib_size * calib_size;
        std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(need), keys.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        for (std::size_t i = 0; i < need; ++i) out[keys[i].second] = 1.0;
    }
    return BinaryPattern{std::move(u), calib_size};
}

ManualDensity manual_vd_density(std::size_t ny, std::size_t nz, double gamma, std::size_t n_levels,
                                double level_ratio) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
    if (n_levels == 0) throw std::invalid_argument("n_levels must be >= 1");
    if (!(level_ratio > 0.0 && level_ratio <= 1.0)) throw std::invalid_argument("level ratio must lie in (0, 1]");
    // Elliptical radius normalized so the grid edge midpoints sit at 1.
    auto radius = [&](std::size_t y, std::size_t z) {
        const double dy = (static_cast<double>(y) - static_cast<double>(ny / 2)) / (0.5 * ny);
        const double dz = (static_cast<double>(z) - static_cast<double>(nz / 2)) / (0.5 * nz);
        return std::sqrt(dy * dy + dz * dz);
    };
    double rmax = 0.0;
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t z = 0; z < nz; ++z) rmax = std::max(rmax, radius(y, z));
    NdArray<std::size_t> level({ny, nz});
    std::vector<std::size_t> counts(n_levels, 0);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t z = 0; z < nz; ++z) {
            auto l = static_cast<std::size_t>(radius(y, z) / rmax * static_cast<double>(n_levels));
            l = std::min(l, n_levels - 1);
            level.at(y, z) = l;
            ++counts[l];
        }
    const double total = static_cast<double>(ny * nz);
    auto densities = [&](double c) {
        std::vector<double> d(n_levels, 1.0);
        for (std::size_t l = 1; l < n_levels; ++l) d[l] = std::min(1.0, c * std::pow(level_ratio, static_cast<double>(l)));
        return d;
    };
    auto expected = [&](double c) {
        const auto d = densities(c);
        double s = 0.0;
        for (std::size_t l = 0; l < n_levels; ++l) s += d[l] * static_cast<double>(counts[l]);
        return s / total;
    };
    if (static_cast<double>(counts[0]) / total > gamma + 1e-15) {
        throw std::invalid_argument("gamma " + std::to_string(gamma) + " is infeasible: the fully sampled centre level alone covers " +
                                    std::to_string(static_cast<double>(counts[0]) / total));
    }
    double lo = 0.0, hi = 1.0;
    while (expected(hi) < gamma && hi < 1e12) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (expected(mid) < gamma ? lo : hi) = mid;
    }
    const auto d = densities(hi);
    RealArray density({ny, nz});
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t z = 0; z < nz; ++z) density.at(y, z) = d[level.at(y, z)];
    return ManualDensity{std::move(density), d, counts};
}

BinaryPattern manual_vd_pattern(std::size_t echoes, std::size_t ny, std::size_t nz, double gamma,
                                std::size_t n_levels, std::uint64_t seed, double level_ratio, std::size_t calib_size) {
    const auto md = manual_vd_density(ny, nz, gamma, n_levels, level_ratio);
    RealArray p({echoes, ny, nz});
    for (std::size_t j = 0; j < echoes; ++j) std::copy(md.density.values().begin(), md.density.values().end(), p.slab(j).begin());
    return sample_binary(ProbPattern{std::move(p)}, seed, calib_size, /*shared_across_echoes=*/true);
}

}  // namespace mgre
