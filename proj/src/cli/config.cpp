#include <set>
#include <stdexcept>

#include "mgre/experiment.hpp"

namespace mgre {

namespace {

using nlohmann::json;

template <typename T>
void read(const json& doc, const char* key, T& dst, std::set<std::string>& seen) {
    seen.insert(key);
    auto it = doc.find(key);
    if (it == doc.end()) return;
    const json& v = *it;
    if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(key, "expected a string");
        dst = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(key, "expected true or false");
        dst = v.get<bool>();
    } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(key, "expected a number");
        dst = v.get<double>();
    } else if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
        dst = v.get<int>();
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
        dst.clear();
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(key, "expected an array of numbers");
            dst.push_back(e.get<double>());
        }
    } else {
        // unsigned integers
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
            throw ConfigError(key, "expected a non-negative integer");
        }
        dst = v.get<T>();
    }
}

}  // namespace

std::vector<double> ExperimentConfig::resolved_echo_times() const {
    if (!echo_times.empty()) return echo_times;
    return uniform_echo_times(echoes, te_first, te_spacing);
}

AdmmConfig ExperimentConfig::admm() const { return AdmmConfig{n_unrolled, rho, cg_iters}; }

TffArchitecture ExperimentConfig::architecture(bool recurrent) const {
    TffArchitecture a;
    a.echoes = resolved_echo_times().size();
    a.hidden = hidden;
    a.width = width;
    a.layers = layers;
    a.kernel = kernel;
    a.recurrent = recurrent;
    return a;
}

LossConfig ExperimentConfig::loss() const {
    LossConfig l;
    l.admm = admm();
    l.ssim.window = ssim_window;
    l.calib_size = calib_size;
    return l;
}

TrainConfig ExperimentConfig::train(std::uint64_t s) const {
    TrainConfig t;
    t.epochs = epochs;
    t.lr = lr;
    t.pattern_lr = pattern_lr;
    t.cosine_lr = lr_schedule == "cosine";
    t.batch_size = batch_size;
    t.loss = loss();
    t.seed = s;
    return t;
}

DatasetSpec ExperimentConfig::dataset(std::size_t count, std::uint64_t s) const {
    DatasetSpec d;
    d.count = count;
    d.ny = ny;
    d.nz = nz;
    d.echo_times = resolved_echo_times();
    d.n_coils = n_coils;
    d.noise_sigma = noise_sigma;
    d.seed = s;
    return d;
}

void ExperimentConfig::validate() const {
    if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    if (workers < 1) throw ConfigError("workers", "must be >= 1");
    if (ny < 2 || nz < 2) throw ConfigError("ny", "grid must be at least 2x2");
    if (echo_times.empty()) {
        if (echoes < 1) throw ConfigError("echoes", "must be >= 1");
        if (!(te_spacing > 0.0)) throw ConfigError("te_spacing", "must be > 0");
        if (te_first < 0.0) throw ConfigError("te_first", "must be >= 0");
    } else {
        for (std::size_t i = 1; i < echo_times.size(); ++i) {
            if (!(echo_times[i] > echo_times[i - 1])) throw ConfigError("echo_times", "must be strictly increasing");
        }
    }
    if (n_coils < 1) throw ConfigError("n_coils", "must be >= 1");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma", "must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma", "must be in (0, 1]");
    if (spo < 0 || spo > 2) throw ConfigError("spo", "must be 0, 1 or 2");
    if (!(slope > 0.0)) throw ConfigError("slope", "must be > 0");
    if (calib_size > ny || calib_size > nz) throw ConfigError("calib_size", "exceeds the grid");
    if (manual_levels < 1) throw ConfigError("manual_levels", "must be >= 1");
    if (!(manual_ratio > 0.0 && manual_ratio <= 1.0)) throw ConfigError("manual_ratio", "must be in (0, 1]");
    if (n_segments < 1) throw ConfigError("n_segments", "must be >= 1");
    if (n_unrolled < 1) throw ConfigError("n_unrolled", "must be >= 1");
    if (!(rho > 0.0)) throw ConfigError("rho", "must be > 0");
    if (cg_iters < 1) throw ConfigError("cg_iters", "must be >= 1");
    if (denoiser != "identity" && denoiser != "llr" && denoiser != "tff") {
        throw ConfigError("denoiser", "must be identity, llr or tff");
    }
    if (llr_patch < 1) throw ConfigError("llr_patch", "must be >= 1");
    if (llr_lambda < 0.0) throw ConfigError("llr_lambda", "must be >= 0");
    if (tff != 0 && tff != 1) throw ConfigError("tff", "must be 0 or 1");
    if (hidden < 1) throw ConfigError("hidden", "must be >= 1");
    if (width < 1) throw ConfigError("width", "must be >= 1");
    if (layers < 2) throw ConfigError("layers", "must be >= 2");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel", "must be odd");
    if (init != "he" && init != "near_identity") throw ConfigError("init", "must be he or near_identity");
    if (init_noise < 0.0) throw ConfigError("init_noise", "must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr", "must be > 0");
    if (!(pattern_lr > 0.0)) throw ConfigError("pattern_lr", "must be > 0");
    if (lr_schedule != "constant" && lr_schedule != "cosine") {
        throw ConfigError("lr_schedule", "must be constant or cosine");
    }
    if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
    if (ssim_window < 1 || ssim_window > ny || ssim_window > nz) throw ConfigError("ssim_window", "must fit the grid");
    if (n_seeds < 1) throw ConfigError("n_seeds", "must be >= 1");
}

nlohmann::json ExperimentConfig::to_json() const {
    return json{{"output_dir", output_dir},
                {"seed", seed},
                {"workers", workers},
                {"phantom_path", phantom_path},
                {"ny", ny},
                {"nz", nz},
                {"echoes", echoes},
                {"te_first", te_first},
                {"te_spacing", te_spacing},
                {"echo_times", echo_times},
                {"n_coils", n_coils},
                {"noise_sigma", noise_sigma},
                {"gamma", gamma},
                {"spo", spo},
                {"slope", slope},
                {"calib_size", calib_size},
                {"manual_levels", manual_levels},
                {"manual_ratio", manual_ratio},
                {"exact_count", exact_count},
                {"pattern_path", pattern_path},
                {"mask_path", mask_path},
                {"n_segments", n_segments},
                {"n_unrolled", n_unrolled},
                {"rho", rho},
                {"cg_iters", cg_iters},
                {"denoiser", denoiser},
                {"llr_patch", llr_patch},
                {"llr_lambda", llr_lambda},
                {"weights_path", weights_path},
                {"tff", tff},
                {"hidden", hidden},
                {"width", width},
                {"layers", layers},
                {"kernel", kernel},
                {"init", init},
                {"init_noise", init_noise},
                {"epochs", epochs},
                {"epochs2", epochs2},
                {"lr", lr},
                {"pattern_lr", pattern_lr},
                {"lr_schedule", lr_schedule},
                {"batch_size", batch_size},
                {"n_train", n_train},
                {"n_val", n_val},
                {"n_test", n_test},
                {"ssim_window", ssim_window},
                {"n_seeds", n_seeds},
                {"recon_path", recon_path},
                {"truth_path", truth_path}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    ExperimentConfig c;
    std::set<std::string> seen;
    read(doc, "output_dir", c.output_dir, seen);
    read(doc, "seed", c.seed, seen);
    read(doc, "workers", c.workers, seen);
    read(doc, "phantom_path", c.phantom_path, seen);
    read(doc, "ny", c.ny, seen);
    read(doc, "nz", c.nz, seen);
    read(doc, "echoes", c.echoes, seen);
    read(doc, "te_first", c.te_first, seen);
    read(doc, "te_spacing", c.te_spacing, seen);
    read(doc, "echo_times", c.echo_times, seen);
    read(doc, "n_coils", c.n_coils, seen);
    read(doc, "noise_sigma", c.noise_sigma, seen);
    read(doc, "gamma", c.gamma, seen);
    read(doc, "spo", c.spo, seen);
    read(doc, "slope", c.slope, seen);
    read(doc, "calib_size", c.calib_size, seen);
    read(doc, "manual_levels", c.manual_levels, seen);
    read(doc, "manual_ratio", c.manual_ratio, seen);
    read(doc, "exact_count", c.exact_count, seen);
    read(doc, "pattern_path", c.pattern_path, seen);
    read(doc, "mask_path", c.mask_path, seen);
    read(doc, "n_segments", c.n_segments, seen);
    read(doc, "n_unrolled", c.n_unrolled, seen);
    read(doc, "rho", c.rho, seen);
    read(doc, "cg_iters", c.cg_iters, seen);
    read(doc, "denoiser", c.denoiser, seen);
    read(doc, "llr_patch", c.llr_patch, seen);
    read(doc, "llr_lambda", c.llr_lambda, seen);
    read(doc, "weights_path", c.weights_path, seen);
    read(doc, "tff", c.tff, seen);
    read(doc, "hidden", c.hidden, seen);
    read(doc, "width", c.width, seen);
    read(doc, "layers", c.layers, seen);
    read(doc, "kernel", c.kernel, seen);
    read(doc, "init", c.init, seen);
    read(doc, "init_noise", c.init_noise, seen);
    read(doc, "epochs", c.epochs, seen);
    read(doc, "epochs2", c.epochs2, seen);
    read(doc, "lr", c.lr, seen);
    read(doc, "pattern_lr", c.pattern_lr, seen);
    read(doc, "lr_schedule", c.lr_schedule, seen);
    read(doc, "batch_size", c.batch_size, seen);
    read(doc, "n_train", c.n_train, seen);
    read(doc, "n_val", c.n_val, seen);
    read(doc, "n_test", c.n_test, seen);
    read(doc, "ssim_window", c.ssim_window, seen);
    read(doc, "n_seeds", c.n_seeds, seen);
    read(doc, "recon_path", c.recon_path, seen);
    read(doc, "truth_path", c.truth_path, seen);
    for (const auto& [key, _] : doc.items()) {
        if (!seen.count(key)) throw ConfigError(key, "unknown config key");
    }
    return c;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError(assignment, "override must look like key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    doc[key] = value;
}

}  // namespace mgre
