#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mgre/signal.hpp"
#include "mgre/ssim.hpp"
#include "mgre/tensor.hpp"

namespace mgre {

struct FitOptions {
    // Voxels whose first-echo magnitude is at most this fraction of the
    // image's largest first-echo magnitude are invalid.
    double magnitude_threshold = 0.05;
    // Field fits are invalid where any inter-echo phase step reaches this.
    double max_phase_step = 0.95 * 3.14159265358979323846;
};

struct QuantMaps {
    RealArray magnitude;     // [N_y, N_z]
    RealArray r2star;        // 1/s
    RealArray field;         // Hz
    RealArray r2star_valid;  // 0/1
    RealArray field_valid;   // 0/1
};

// sqrt(sum_j |s_j|^2) per voxel.
RealArray echo_combine(const ComplexArray& x);
RealArray echo_combine(const MultiEchoImage& x);

// Unweighted least-squares slope of -ln|s_j| against TE, clamped at zero.
// Invalid voxels are 0 in the map and 0 in *valid.
RealArray fit_r2star(const MultiEchoImage& x, const FitOptions& opt = {}, RealArray* valid = nullptr);

// Magnitude-weighted least-squares slope of the accumulated inter-echo phase
// against TE, divided by 2 pi.
RealArray fit_field(const MultiEchoImage& x, const FitOptions& opt = {}, RealArray* valid = nullptr);

QuantMaps quant_maps(const MultiEchoImage& x, const FitOptions& opt = {});

// 15x15 Laplacian-of-Gaussian kernel (sigma 1.5), shifted to zero sum.
RealArray log_kernel(std::size_t size = 15, double sigma = 1.5);
// Same-size 2-D correlation with zero padding outside the image.
RealArray filter_same(const RealArray& img, const RealArray& kernel);

struct MetricEntry {
    std::string map;
    double psnr = 0.0;  // dB; +inf when x == ref
    double ssim = 0.0;
    double rmse = 0.0;  // percent
    double hfen = 0.0;  // percent
};

// PSNR peak is max(ref). SSIM is computed on x and ref both divided by
// max|ref|, so that its constants see a unit dynamic range.
MetricEntry compute_metrics(const RealArray& x, const RealArray& ref, const std::string& map = "",
                            const SsimParams& ssim = {});

struct MetricReport {
    std::vector<MetricEntry> entries;

    std::string to_csv() const;
    nlohmann::json to_json() const;
};

// Population mean and standard deviation over mask != 0.
std::pair<double, double> roi_stats(const RealArray& map, const RealArray& mask);

// Mean over roi minus mean over its one-pixel 8-connected dilation ring.
double sharpness(const RealArray& map, const RealArray& roi);

// 8-bit binary PGM, values clipped to [lo, hi] and scaled to 0..255.
std::string to_pgm(const RealArray& img, double lo, double hi);
void write_pgm(const std::filesystem::path& path, const RealArray& img, double lo, double hi);

}  // namespace mgre
