#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mgre/recon.hpp"
#include "mgre/sampling.hpp"
#include "mgre/signal.hpp"
#include "mgre/ssim.hpp"

namespace mgre {

// One training/validation example: fully sampled (noisy) multi-coil k-space
// and the noiseless image it was simulated from.
struct Sample {
    ComplexArray kspace;  // [N_T, N_C, N_y, N_z]
    ComplexArray truth;   // [N_T, N_y, N_z]
    CoilSet coils;
    std::vector<double> echo_times;
};

struct DatasetSpec {
    std::size_t count = 20;
    std::size_t ny = 64, nz = 64;
    std::vector<double> echo_times;
    std::size_t n_coils = 4;
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
};

// Seeded random phantoms, each with its own coil set.
std::vector<Sample> make_dataset(const DatasetSpec& spec);

struct AdamState {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t step = 0;
    std::vector<RealArray> m, v;
};

// Bias-corrected Adam update of every parameter in place.
void adam_step(const std::vector<RealArray*>& params, const std::vector<const RealArray*>& grads, AdamState& state);

enum class MaskSource {
    Sampled,    // Bernoulli draw from P, straight-through gradient
    Surrogate,  // P itself used as the mask (deterministic)
    Fixed,      // externally supplied binary mask, no pattern gradient
};

struct LossConfig {
    AdmmConfig admm;
    SsimParams ssim;
    std::size_t calib_size = 0;
};

struct ModelParams {
    PatternWeights pattern;
    TffWeights net;
};

struct LossResult {
    double loss = 0.0;
    TffWeights net_grad;
    RealArray pattern_grad;  // empty unless the mask came from the pattern
    RealArray mask;          // mask actually used
};

// Negative sum over the 2 N_T real/imag channels of SSIM between the
// reconstruction and the truth, both scaled by 1 / max|truth|.
LossResult loss_and_grad(const Sample& sample, const ModelParams& params, const LossConfig& cfg, MaskSource source,
                         std::uint64_t draw_seed = 0, const RealArray* fixed_mask = nullptr, bool want_grad = true);

// Mask drawn exactly as MaskSource::Sampled would draw it.
RealArray draw_mask(const PatternWeights& pattern, std::uint64_t draw_seed, std::size_t calib_size);

struct TrainConfig {
    std::size_t epochs = 100;
    double lr = 1e-3;
    double pattern_lr = 1e-3;
    // Cosine annealing of both rates from their base value towards 0 over the run.
    bool cosine_lr = false;
    std::size_t batch_size = 1;
    int phase = 1;
    LossConfig loss;
    std::uint64_t seed = 0;
};

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double val_loss = 0.0;  // NaN when no validation set was given
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochLog> log;
};

// Joint updates of pattern weights and network with a fresh mask draw every
// step. When params.pattern.mode is Manual, fixed_mask must be given and only
// the network is trained.
TrainResult train_phase1(const std::vector<Sample>& train, const std::vector<Sample>& val, ModelParams init,
                         const TrainConfig& cfg, const RealArray* fixed_mask = nullptr);

// Network fine-tuning with a frozen binary mask; pattern weights untouched.
TrainResult train_phase2(const std::vector<Sample>& train, const std::vector<Sample>& val, const RealArray& fixed_mask,
                         ModelParams init, const TrainConfig& cfg);

// Mean loss over a set with a fixed mask.
double evaluate_loss(const std::vector<Sample>& set, const ModelParams& params, const LossConfig& cfg,
                     const RealArray& mask);

std::string loss_log_csv(const std::vector<EpochLog>& log);

// Flat views used by optimizers and gradient checks.
std::vector<RealArray*> parameter_list(TffWeights& w);
std::vector<const RealArray*> parameter_list(const TffWeights& w);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0, worst_numeric = 0.0;
    std::size_t checked = 0;
    std::size_t within_1e5 = 0;  // coordinates with relative error <= 1e-5
    double fraction_within_1e5() const { return checked ? static_cast<double>(within_1e5) / checked : 1.0; }
};

// f(x) and its gradient at x.
using ScalarFn = std::function<double(const std::vector<double>& x, std::vector<double>* grad)>;

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) against the
// analytic gradient, over `coords` (all coordinates when empty). Relative
// error is |a - n| / max(|a|, |n|, floor) where floor = floor_scale * max_i |a_i|.
GradCheckReport gradient_check(const ScalarFn& f, const std::vector<double>& x, double eps,
                               const std::vector<std::size_t>& coords = {}, double floor_scale = 1e-6);

}  // namespace mgre
