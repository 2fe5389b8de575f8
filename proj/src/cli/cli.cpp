#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mgre/errors.hpp"
#include "mgre/experiment.hpp"
#include "mgre/metf.hpp"
#include "mgre/ordering.hpp"
#include "mgre/quant.hpp"
#include "mgre/rng.hpp"

namespace mgre {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json read_json_file(const fs::path& p, const std::string& field) {
    std::ifstream in(p);
    if (!in) throw ConfigError(field, "cannot open " + p.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(field, "not valid JSON: " + p.string());
    return doc;
}

void require_file(const std::string& path, const std::string& field) {
    if (!path.empty() && !fs::exists(path)) throw ConfigError(field, "file not found: " + path);
}

double max_of(const RealArray& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, v);
    return m;
}

RealArray plane(const RealArray& a, std::size_t j) {
    RealArray out({a.extent(1), a.extent(2)});
    std::copy(a.slab(j).begin(), a.slab(j).end(), out.begin());
    return out;
}

struct Acquisition {
    Phantom phantom;
    CoilSet coils;
    KSpaceData kspace;  // fully sampled, noisy
};

Acquisition acquire(const ExperimentConfig& cfg) {
    PhantomSpec spec;
    if (cfg.phantom_path.empty()) {
        spec = standard_phantom_spec(cfg.ny, cfg.nz);
        spec.noise_sigma = cfg.noise_sigma;
    } else {
        spec = phantom_spec_from_json(read_json_file(cfg.phantom_path, "phantom_path"));
    }
    Acquisition a;
    const auto times = cfg.resolved_echo_times();
    a.phantom = generate_phantom(spec, times);
    a.coils = generate_coils(cfg.n_coils, spec.ny, spec.nz, derive_seed(cfg.seed, "coils"));
    a.kspace = encode(a.phantom.image, a.coils, full_masks(times.size(), spec.ny, spec.nz));
    if (spec.noise_sigma > 0.0) a.kspace = add_noise(a.kspace, spec.noise_sigma, derive_seed(cfg.seed, "noise"));
    return a;
}

RealArray load_or_manual_mask(const ExperimentConfig& cfg, std::size_t nt, std::size_t ny, std::size_t nz) {
    if (!cfg.mask_path.empty()) {
        Tensor t = read_tensor(cfg.mask_path);
        if (!t.is_real() || t.shape() != Shape{nt, ny, nz}) {
            throw ConfigError("mask_path", "mask must be real " + shape_string({nt, ny, nz}));
        }
        return t.real();
    }
    return manual_vd_pattern(nt, ny, nz, cfg.gamma, cfg.manual_levels, derive_seed(cfg.seed, "manual"),
                             cfg.manual_ratio, cfg.calib_size)
        .u;
}

PatternWeights load_pattern(const ExperimentConfig& cfg, std::size_t nt) {
    PatternWeights pw = PatternWeights::zeros(nt, cfg.ny, cfg.nz, cfg.gamma, cfg.slope, spo_from_int(cfg.spo));
    if (cfg.pattern_path.empty()) return pw;
    const Archive ar = read_archive(cfg.pattern_path);
    for (const auto& [name, t] : ar.entries) {
        if (name == "w") {
            if (!t.is_real() || t.shape() != pw.w.shape()) {
                throw ConfigError("pattern_path", "weights must be real " + shape_string(pw.w.shape()));
            }
            pw.w = t.real();
            return pw;
        }
    }
    throw ConfigError("pattern_path", "archive has no 'w' entry");
}

Archive pattern_archive(const PatternWeights& pw) {
    Archive ar;
    ar.meta = {{"kind", "pattern_weights"}, {"slope", pw.slope}, {"gamma", pw.gamma}, {"spo", static_cast<int>(pw.mode)}};
    ar.entries.emplace_back("w", pw.w);
    return ar;
}

void write_masks_pgm(const fs::path& dir, const std::string& stem, const RealArray& m) {
    for (std::size_t j = 0; j < m.extent(0); ++j) {
        write_pgm(dir / (stem + "_echo" + std::to_string(j) + ".pgm"), plane(m, j), 0.0, 1.0);
    }
}

// --- commands ---

void cmd_phantom(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = cfg.output_dir;
    const Acquisition a = acquire(cfg);
    Archive ar;
    ar.meta = {{"kind", "phantom"}, {"echo_times", a.phantom.image.echo_times}};
    ar.entries.emplace_back("image", a.phantom.image.data);
    ar.entries.emplace_back("coils", a.coils.maps);
    ar.entries.emplace_back("kspace", a.kspace.data);
    ar.entries.emplace_back("m0", a.phantom.truth.m0);
    ar.entries.emplace_back("r2star", a.phantom.truth.r2star);
    ar.entries.emplace_back("field", a.phantom.truth.field);
    ar.entries.emplace_back("phase", a.phantom.truth.phase);
    write_archive(dir / "phantom", ar);
    const RealArray mag = echo_combine(a.phantom.image);
    write_pgm(dir / "phantom_magnitude.pgm", mag, 0.0, std::max(max_of(mag), 1e-12));
    out << "wrote " << (dir / "phantom").string() << "\n";
}

void cmd_pattern(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = cfg.output_dir;
    const std::size_t nt = cfg.resolved_echo_times().size();
    RealArray prob, mask;
    if (cfg.spo == 0) {
        const auto md = manual_vd_density(cfg.ny, cfg.nz, cfg.gamma, cfg.manual_levels, cfg.manual_ratio);
        prob = RealArray({nt, cfg.ny, cfg.nz});
        for (std::size_t j = 0; j < nt; ++j) std::copy(md.density.begin(), md.density.end(), prob.slab(j).begin());
        mask = load_or_manual_mask(cfg, nt, cfg.ny, cfg.nz);
    } else {
        const PatternWeights pw = load_pattern(cfg, nt);
        prob = build_prob_pattern(pw).p;
        const bool shared = pw.mode == SpoMode::SingleEcho;
        const std::uint64_t seed = derive_seed(cfg.seed, "mask");
        if (cfg.exact_count) {
            const auto count = static_cast<std::size_t>(std::llround(cfg.gamma * static_cast<double>(cfg.ny * cfg.nz)));
            mask = sample_binary_exact(ProbPattern{prob}, count, seed, cfg.calib_size, shared).u;
        } else {
            mask = sample_binary(ProbPattern{prob}, seed, cfg.calib_size, shared).u;
        }
    }
    Archive ar;
    ar.meta = {{"kind", "pattern"}, {"spo", cfg.spo}, {"gamma", cfg.gamma}, {"calib_size", cfg.calib_size}};
    ar.entries.emplace_back("prob", prob);
    ar.entries.emplace_back("mask", mask);
    write_archive(dir / "pattern", ar);
    write_tensor(mask, dir / "mask.metf");
    write_masks_pgm(dir, "density", prob);
    write_masks_pgm(dir, "mask", mask);
    double ones = 0.0;
    for (double v : mask) ones += v;
    out << "sampling ratio " << ones / static_cast<double>(mask.size()) << "\n";
}

void cmd_schedule(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = cfg.output_dir;
    const std::size_t nt = cfg.resolved_echo_times().size();
    const RealArray mask = load_or_manual_mask(cfg, nt, cfg.ny, cfg.nz);
    const AcquisitionSchedule s = build_schedule(mask, cfg.n_segments);
    const JumpStats j = encoding_jump_metric(s);
    write_file_atomic(dir / "schedule.txt", schedule_to_text(s));
    json report = {{"n_tr", s.n_tr},          {"n_ind", s.n_ind()},       {"n_segments", s.n_segments},
                   {"n_echoes", s.n_echoes},  {"segment_sizes", s.segment_sizes},
                   {"intra_mean", j.intra_mean}, {"intra_max", j.intra_max}, {"inter_mean", j.inter_mean},
                   {"inter_max", j.inter_max}};
    write_file_atomic(dir / "jumps.json", report.dump(2) + "\n");
    out << "N_TR " << s.n_tr << " N_ind " << s.n_ind() << " N_s " << s.n_segments << " intra_mean " << j.intra_mean
        << "\n";
}

void cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = cfg.output_dir;
    const auto train = make_dataset(cfg.dataset(cfg.n_train, derive_seed(cfg.seed, "train")));
    const auto val = make_dataset(cfg.dataset(cfg.n_val, derive_seed(cfg.seed, "val")));
    const std::size_t nt = cfg.resolved_echo_times().size();

    ModelParams params;
    if (cfg.weights_path.empty()) {
        params.net = TffWeights::random(cfg.architecture(cfg.tff == 1), derive_seed(cfg.seed, "net"),
                                        cfg.init == "he" ? WeightInit::He : WeightInit::NearIdentity, cfg.init_noise);
    } else {
        params.net = TffWeights::from_archive(read_archive(cfg.weights_path));
    }
    params.pattern = load_pattern(cfg, nt);

    RealArray manual;
    if (cfg.spo == 0) manual = load_or_manual_mask(cfg, nt, cfg.ny, cfg.nz);
    const TrainResult r1 =
        train_phase1(train, val, params, cfg.train(derive_seed(cfg.seed, "phase1")), cfg.spo == 0 ? &manual : nullptr);
    write_file_atomic(dir / "loss_phase1.csv", loss_log_csv(r1.log));
    write_archive(dir / "weights_phase1", r1.params.net.to_archive());
    write_archive(dir / "pattern_weights", pattern_archive(r1.params.pattern));
    const RealArray mask =
        cfg.spo == 0 ? manual : draw_mask(r1.params.pattern, derive_seed(cfg.seed, "final-mask"), cfg.calib_size);
    write_tensor(mask, dir / "mask.metf");
    for (const auto& e : r1.log) out << "phase1 epoch " << e.epoch << " loss " << e.mean_loss << "\n";
    if (cfg.epochs2 > 0) {
        TrainConfig tc2 = cfg.train(derive_seed(cfg.seed, "phase2"));
        tc2.epochs = cfg.epochs2;
        const TrainResult r2 = train_phase2(train, val, mask, r1.params, tc2);
        write_file_atomic(dir / "loss_phase2.csv", loss_log_csv(r2.log));
        write_archive(dir / "weights_phase2", r2.params.net.to_archive());
        for (const auto& e : r2.log) out << "phase2 epoch " << e.epoch << " loss " << e.mean_loss << "\n";
    }
}

void cmd_recon(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = cfg.output_dir;
    const Acquisition a = acquire(cfg);
    const std::size_t nt = a.phantom.image.echoes(), ny = a.phantom.image.ny(), nz = a.phantom.image.nz();
    const RealArray mask = load_or_manual_mask(cfg, nt, ny, nz);
    Denoiser d = IdentityDenoiser{};
    if (cfg.denoiser == "llr") {
        d = LlrDenoiser{{cfg.llr_patch, cfg.llr_lambda}};
    } else if (cfg.denoiser == "tff") {
        if (cfg.weights_path.empty()) throw ConfigError("weights_path", "required for the tff denoiser");
        d = TffDenoiser{TffWeights::from_archive(read_archive(cfg.weights_path))};
    }
    const ComplexArray rec = admm_reconstruct(a.kspace, a.coils, mask, cfg.admm(), d);
    const ComplexArray zf = zero_filled_init(a.kspace, a.coils, mask);
    Archive ar;
    ar.meta = {{"kind", "recon"}, {"denoiser", cfg.denoiser}, {"echo_times", a.phantom.image.echo_times}};
    ar.entries.emplace_back("recon", rec);
    ar.entries.emplace_back("zero_filled", zf);
    ar.entries.emplace_back("truth", a.phantom.image.data);
    ar.entries.emplace_back("mask", mask);
    write_archive(dir / "recon", ar);
    write_tensor(rec, dir / "recon.metf");
    write_tensor(a.phantom.image.data, dir / "truth.metf");

    const RealArray truth = echo_combine(a.phantom.image.data);
    const double hi = std::max(max_of(truth), 1e-12);
    write_pgm(dir / "recon_magnitude.pgm", echo_combine(rec), 0.0, hi);
    write_pgm(dir / "zero_filled_magnitude.pgm", echo_combine(zf), 0.0, hi);
    MetricReport rep;
    rep.entries.push_back(compute_metrics(echo_combine(rec), truth, "recon_magnitude"));
    rep.entries.push_back(compute_metrics(echo_combine(zf), truth, "zero_filled_magnitude"));
    write_file_atomic(dir / "recon_metrics.csv", rep.to_csv());
    out << rep.to_csv();
}

void cmd_eval(const ExperimentConfig& cfg, std::ostream& out) {
    if (cfg.recon_path.empty()) throw ConfigError("recon_path", "required for eval");
    if (cfg.truth_path.empty()) throw ConfigError("truth_path", "required for eval");
    const fs::path dir = cfg.output_dir;
    const Tensor rt = read_tensor(cfg.recon_path);
    const Tensor tt = read_tensor(cfg.truth_path);
    if (!rt.is_complex() || rt.shape().size() != 3) throw ConfigError("recon_path", "expected complex [N_T, N_y, N_z]");
    if (!tt.is_complex() || tt.shape() != rt.shape()) throw ConfigError("truth_path", "must match the recon shape");
    auto times = cfg.resolved_echo_times();
    if (times.size() != rt.shape()[0]) throw ConfigError("echo_times", "count does not match the image echoes");
    const MultiEchoImage rec(rt.complex(), times), truth(tt.complex(), times);

    MetricReport rep;
    const RealArray tm = echo_combine(truth), rm = echo_combine(rec);
    rep.entries.push_back(compute_metrics(rm, tm, "magnitude"));
    Archive maps;
    maps.meta = {{"kind", "quant_maps"}};
    maps.entries.emplace_back("magnitude", rm);
    const double hi = std::max(max_of(tm), 1e-12);
    write_pgm(dir / "eval_magnitude.pgm", rm, 0.0, hi);
    if (times.size() >= 2) {
        const QuantMaps qt = quant_maps(truth), qr = quant_maps(rec);
        auto masked = [](const RealArray& m, const RealArray& valid) {
            RealArray o = m;
            for (std::size_t i = 0; i < o.size(); ++i) o[i] *= valid[i];
            return o;
        };
        const std::pair<const char*, std::pair<const RealArray*, const RealArray*>> items[] = {
            {"r2star", {&qr.r2star, &qt.r2star}}, {"field", {&qr.field, &qt.field}}};
        for (const auto& [name, maps_pair] : items) {
            const RealArray& valid = std::string(name) == "r2star" ? qt.r2star_valid : qt.field_valid;
            const RealArray x = masked(*maps_pair.first, valid), ref = masked(*maps_pair.second, valid);
            maps.entries.emplace_back(name, *maps_pair.first);
            double norm = 0.0;
            for (double v : ref) norm += v * v;
            if (norm > 0.0) {
                rep.entries.push_back(compute_metrics(x, ref, name));
            } else {
                out << "skipping " << name << " metrics: reference map is zero inside its validity mask\n";
            }
        }
        maps.entries.emplace_back("r2star_valid", qt.r2star_valid);
        maps.entries.emplace_back("field_valid", qt.field_valid);
    }
    write_archive(dir / "quant_maps", maps);
    write_file_atomic(dir / "metrics.csv", rep.to_csv());
    write_file_atomic(dir / "metrics.json", rep.to_json().dump(2) + "\n");
    out << rep.to_csv();
}

void cmd_ablate(const ExperimentConfig& cfg, std::ostream& out) {
    const fs::path dir = cfg.output_dir;
    const AblationResult res = run_ablation(cfg, &out);
    // Both tables are built before anything is written.
    const std::string rows = res.rows_csv(), summary = res.summary_csv();
    write_file_atomic(dir / "ablation_rows.csv", rows);
    write_file_atomic(dir / "ablation_summary.csv", summary);
    auto cells = res.summary();
    std::stable_sort(cells.begin(), cells.end(), [](const AblationRow& a, const AblationRow& b) { return a.psnr > b.psnr; });
    out << "ranking by mean test PSNR (echo-combined magnitude):\n";
    for (const auto& c : cells) {
        out << "  TFF=" << c.tff << " SPO=" << c.spo << "  psnr " << c.psnr << " dB  ssim " << c.ssim
            << "  zero-filled " << c.zf_psnr << " dB\n";
    }
}

const char* kCommands = "phantom, pattern, schedule, train, recon, eval, ablate";

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-echo GRE sampling-pattern and reconstruction toolkit"};
    std::string command, config_path;
    std::vector<std::string> overrides;
    app.add_option("command", command, std::string("one of: ") + kCommands)->required();
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("--set", overrides, "override a config key: key=value")->take_all()->allow_extra_args(false);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    }
    static const std::vector<std::string> known = {"phantom", "pattern", "schedule", "train", "recon", "eval", "ablate"};
    if (std::find(known.begin(), known.end(), command) == known.end()) {
        err << "usage error: unknown command '" << command << "' (expected " << kCommands << ")\n";
        return 2;
    }

    try {
        json doc = json::object();
        if (!config_path.empty()) doc = read_json_file(config_path, "config");
        for (const auto& o : overrides) apply_override(doc, o);
        const ExperimentConfig cfg = ExperimentConfig::from_json(doc);
        cfg.validate();
        require_file(cfg.phantom_path, "phantom_path");
        require_file(cfg.pattern_path, "pattern_path");
        require_file(cfg.mask_path, "mask_path");
        require_file(cfg.weights_path, "weights_path");
        require_file(cfg.recon_path, "recon_path");
        require_file(cfg.truth_path, "truth_path");
        fs::create_directories(cfg.output_dir);
        const std::string resolved = cfg.to_json().dump(2);
        out << "command: " << command << "\nseed: " << cfg.seed << "\nconfig: " << resolved << "\n";
        write_file_atomic(fs::path(cfg.output_dir) / (command + "_config.json"), resolved + "\n");

        if (command == "phantom") cmd_phantom(cfg, out);
        else if (command == "pattern") cmd_pattern(cfg, out);
        else if (command == "schedule") cmd_schedule(cfg, out);
        else if (command == "train") cmd_train(cfg, out);
        else if (command == "recon") cmd_recon(cfg, out);
        else if (command == "eval") cmd_eval(cfg, out);
        else cmd_ablate(cfg, out);
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        err << "input format error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        err << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace mgre
