#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mgre/autodiff.hpp"
#include "mgre/metf.hpp"
#include "mgre/signal.hpp"

namespace mgre {

// Temporal-feature-fusion denoiser layout. With recurrent=false the hidden
// path is dropped and the input path gets a second conv layer.
struct TffArchitecture {
    std::size_t echoes = 4;
    std::size_t hidden = 8;   // C_h
    std::size_t width = 16;   // C_d
    std::size_t layers = 3;   // conv layers in the denoiser stack, >= 2
    std::size_t kernel = 3;
    bool recurrent = true;

    void validate() const;
    bool operator==(const TffArchitecture&) const = default;
};

struct ConvLayer {
    std::string name;
    RealArray weight;  // [C_out, C_in, K, K]
    RealArray bias;    // [C_out]
};

enum class WeightInit {
    // He-normal kernels, zero biases.
    He,
    // Kernels that route +/- real and imaginary parts of each echo straight
    // through to the output, plus small He-scaled noise; the network starts
    // close to the identity map. Needs hidden >= 4 and width >= 4 * echoes.
    NearIdentity,
};

struct TffWeights {
    TffArchitecture arch;
    std::vector<ConvLayer> layers;  // "ns0", ["ns1"], ["nh"], "d0".."d{L-1}"

    static TffWeights zeros(const TffArchitecture& arch);
    static TffWeights random(const TffArchitecture& arch, std::uint64_t seed, WeightInit init = WeightInit::He,
                             double noise = 0.1);

    const ConvLayer& layer(const std::string& name) const;
    std::size_t parameter_count() const;
    void check() const;

    Archive to_archive() const;
    static TffWeights from_archive(const Archive& archive);
};

struct LlrParams {
    std::size_t patch = 8;
    double lambda = 0.0;
};

struct IdentityDenoiser {};
struct LlrDenoiser {
    LlrParams params;
};
struct TffDenoiser {
    TffWeights weights;
};
using Denoiser = std::variant<IdentityDenoiser, LlrDenoiser, TffDenoiser>;

struct AdmmConfig {
    std::size_t n_unrolled = 10;
    double rho = 1.0;
    std::size_t cg_iters = 10;

    void validate() const;
};

// Zero-filled start s0 = A^H b (masks applied).
ComplexArray zero_filled_init(const KSpaceData& b, const CoilSet& coils, const RealArray& masks);

// Conjugate gradients from a zero start on
//   (A^H A + rho/2 I) s = A^H b + rho/2 (v - u / rho),
// running exactly cg_iters iterations unless the residual vanishes.
// Also reports the residual norm after every iteration.
ComplexArray data_consistency_cg(const KSpaceData& b, const CoilSet& coils, const RealArray& masks,
                                 const ComplexArray& v, const ComplexArray& u, double rho, std::size_t cg_iters,
                                 std::vector<double>* residuals = nullptr);

// Non-overlapping patch x N_T Casorati matrices, singular values shrunk by lambda.
// Extents that are not a multiple of patch are zero-padded for patching.
ComplexArray llr_denoise(const ComplexArray& x, const LlrParams& params);

// Approximate largest singular value of a patch^2 x N_T block of complex
// white noise with per-component standard deviation sigma:
// sqrt(2) sigma (patch + sqrt(N_T)).
double llr_lambda_for_noise(double sigma, std::size_t patch, std::size_t echoes);

ComplexArray tff_forward(const ComplexArray& v_tilde, const TffWeights& weights);
// Requires weights.arch.recurrent == false.
ComplexArray tff_ablated_forward(const ComplexArray& v_tilde, const TffWeights& weights);

ComplexArray admm_reconstruct(const KSpaceData& b, const CoilSet& coils, const RealArray& masks,
                              const AdmmConfig& cfg, const Denoiser& denoiser);

// --- graph builders shared by inference and training ---
namespace graph {

struct TffVars {
    TffArchitecture arch;
    std::map<std::string, std::pair<ad::Var, ad::Var>> layers;  // name -> (weight, bias)
};

// Registers the weights on the tape, as trainable parameters or as constants.
TffVars bind(ad::Tape& tape, const TffWeights& weights, bool trainable);

ad::Var tff(ad::Var v_tilde, const TffVars& vars);

using DenoiseFn = std::function<ad::Var(ad::Var)>;

ad::Var cg_solve(ad::Var rhs, ad::Var mask, const CoilSet& coils, double rho, std::size_t cg_iters,
                 std::vector<double>* residuals = nullptr);

// Unrolled ADMM returning v^(N_l). b may be fully sampled: it is masked by
// `mask` through the A^H step.
ad::Var admm(ad::Tape& tape, const ComplexArray& b, ad::Var mask, const CoilSet& coils, const AdmmConfig& cfg,
             const DenoiseFn& denoise);

}  // namespace graph

}  // namespace mgre
