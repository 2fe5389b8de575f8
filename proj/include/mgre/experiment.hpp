#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgre/learn.hpp"
#include "mgre/recon.hpp"

namespace mgre {

// Raised for config problems; field() names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    std::size_t workers = 1;

    // phantom / acquisition
    std::string phantom_path;  // JSON phantom spec; standard phantom when empty
    std::size_t ny = 64, nz = 64;
    std::size_t echoes = 4;
    double te_first = 0.004, te_spacing = 0.006;  // s
    std::vector<double> echo_times;               // overrides te_first/te_spacing when non-empty
    std::size_t n_coils = 4;
    double noise_sigma = 0.0;

    // sampling
    double gamma = 0.25;
    int spo = 2;
    double slope = 0.25;
    std::size_t calib_size = 8;
    std::size_t manual_levels = 5;
    double manual_ratio = 0.5;
    // learned patterns: draw exactly round(gamma N_y N_z) locations per echo,
    // as the schedule needs equal per-echo counts
    bool exact_count = false;
    std::string pattern_path;  // archive with pattern weights
    std::string mask_path;     // METF binary mask [N_T, N_y, N_z]

    // ordering
    std::size_t n_segments = 11;

    // reconstruction
    std::size_t n_unrolled = 10;
    double rho = 1.0;
    std::size_t cg_iters = 10;
    std::string denoiser = "tff";  // identity | llr | tff
    std::size_t llr_patch = 8;
    double llr_lambda = 0.0;
    std::string weights_path;  // TFF weights archive

    // network
    int tff = 1;
    std::size_t hidden = 8, width = 16, layers = 3, kernel = 3;
    std::string init = "near_identity";  // he | near_identity
    double init_noise = 0.1;

    // training
    std::size_t epochs = 100;
    std::size_t epochs2 = 0;  // phase 2; 0 skips it
    double lr = 1e-3;
    double pattern_lr = 1e-3;
    std::string lr_schedule = "constant";  // constant | cosine
    std::size_t batch_size = 1;
    std::size_t n_train = 20, n_val = 0, n_test = 6;
    std::size_t ssim_window = 10;

    // ablation
    std::size_t n_seeds = 3;

    // eval inputs
    std::string recon_path;  // METF complex [N_T, N_y, N_z]
    std::string truth_path;

    std::vector<double> resolved_echo_times() const;
    AdmmConfig admm() const;
    TffArchitecture architecture(bool recurrent) const;
    LossConfig loss() const;
    TrainConfig train(std::uint64_t seed) const;
    DatasetSpec dataset(std::size_t count, std::uint64_t seed) const;

    void validate() const;
    nlohmann::json to_json() const;
    // Unknown keys and wrong types raise ConfigError.
    static ExperimentConfig from_json(const nlohmann::json& doc);
};

// "key=value" with value parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct AblationRow {
    int tff = 0;
    int spo = 0;
    std::size_t seed_index = 0;
    std::uint64_t seed = 0;
    double psnr = 0.0;     // echo-combined magnitude, mean over test set
    double ssim = 0.0;
    double zf_psnr = 0.0;  // zero-filled with the same mask
    double final_loss = 0.0;
    double sampling_ratio = 0.0;
};

struct AblationResult {
    std::vector<AblationRow> rows;  // cell-major: (tff, spo) then seed

    // Rows averaged over seeds, one per cell, in grid order.
    std::vector<AblationRow> summary() const;
    std::string rows_csv() const;
    std::string summary_csv() const;
};

// Trains and tests every (TFF, SPO) cell for every seed. Cells run on
// cfg.workers threads; the result does not depend on the worker count.
AblationResult run_ablation(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Command-line entry point: returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mgre
