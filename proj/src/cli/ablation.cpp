#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "mgre/experiment.hpp"
#include "mgre/quant.hpp"
#include "mgre/rng.hpp"

namespace mgre {

namespace {

struct TestScores {
    double psnr = 0.0, ssim = 0.0, zf_psnr = 0.0;
};

TestScores score(const std::vector<Sample>& test, const TffWeights& net, const RealArray& mask, const AdmmConfig& admm) {
    TestScores s;
    for (const auto& smp : test) {
        const KSpaceData b{smp.kspace};
        const RealArray truth = echo_combine(smp.truth);
        const ComplexArray rec = admm_reconstruct(b, smp.coils, mask, admm, TffDenoiser{net});
        const MetricEntry m = compute_metrics(echo_combine(rec), truth);
        const MetricEntry z = compute_metrics(echo_combine(zero_filled_init(b, smp.coils, mask)), truth);
        s.psnr += m.psnr;
        s.ssim += m.ssim;
        s.zf_psnr += z.psnr;
    }
    const double n = static_cast<double>(test.size());
    s.psnr /= n;
    s.ssim /= n;
    s.zf_psnr /= n;
    return s;
}

AblationRow run_cell(const ExperimentConfig& cfg, int tff, int spo, std::size_t seed_index,
                     const std::vector<Sample>& train, const std::vector<Sample>& val,
                     const std::vector<Sample>& test) {
    const std::uint64_t seed = derive_seed(cfg.seed, "seed", seed_index);
    // The cell label keeps the streams of different cells apart.
    const std::uint64_t cell_seed = derive_seed(seed, "cell", static_cast<std::uint64_t>(tff * 3 + spo));
    const auto times = cfg.resolved_echo_times();
    const std::size_t nt = times.size();

    ModelParams params;
    params.net = TffWeights::random(cfg.architecture(tff == 1), derive_seed(seed, "net", static_cast<std::uint64_t>(tff)),
                                    cfg.init == "he" ? WeightInit::He : WeightInit::NearIdentity, cfg.init_noise);
    params.pattern = PatternWeights::zeros(nt, cfg.ny, cfg.nz, cfg.gamma, cfg.slope, spo_from_int(spo));

    RealArray manual;
    if (spo == 0) {
        manual = manual_vd_pattern(nt, cfg.ny, cfg.nz, cfg.gamma, cfg.manual_levels, derive_seed(seed, "manual"),
                                   cfg.manual_ratio, cfg.calib_size)
                     .u;
    }
    TrainConfig tc = cfg.train(derive_seed(cell_seed, "phase1"));
    TrainResult r1 = train_phase1(train, val, params, tc, spo == 0 ? &manual : nullptr);

    const RealArray mask =
        spo == 0 ? manual : draw_mask(r1.params.pattern, derive_seed(cell_seed, "final-mask"), cfg.calib_size);
    double final_loss = r1.log.empty() ? 0.0 : r1.log.back().mean_loss;
    ModelParams trained = r1.params;
    if (cfg.epochs2 > 0) {
        TrainConfig tc2 = cfg.train(derive_seed(cell_seed, "phase2"));
        tc2.epochs = cfg.epochs2;
        TrainResult r2 = train_phase2(train, val, mask, trained, tc2);
        trained = r2.params;
        if (!r2.log.empty()) final_loss = r2.log.back().mean_loss;
    }

    const TestScores ts = score(test, trained.net, mask, cfg.admm());
    AblationRow row;
    row.tff = tff;
    row.spo = spo;
    row.seed_index = seed_index;
    row.seed = seed;
    row.psnr = ts.psnr;
    row.ssim = ts.ssim;
    row.zf_psnr = ts.zf_psnr;
    row.final_loss = final_loss;
    double ones = 0.0;
    for (double v : mask) ones += v;
    row.sampling_ratio = ones / static_cast<double>(mask.size());
    return row;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

const char* kHeader = "tff,spo,seed_index,seed,psnr_db,ssim,zero_filled_psnr_db,final_train_loss,sampling_ratio\n";

std::string row_line(const AblationRow& r, bool with_seed) {
    std::string s = std::to_string(r.tff) + "," + std::to_string(r.spo) + ",";
    s += with_seed ? std::to_string(r.seed_index) + "," + std::to_string(r.seed) : std::string("mean,mean");
    s += "," + fmt(r.psnr) + "," + fmt(r.ssim) + "," + fmt(r.zf_psnr) + "," + fmt(r.final_loss) + "," +
         fmt(r.sampling_ratio) + "\n";
    return s;
}

}  // namespace

std::vector<AblationRow> AblationResult::summary() const {
    std::vector<AblationRow> out;
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const AblationRow& o) { return o.tff == r.tff && o.spo == r.spo; });
        if (it == out.end()) {
            out.push_back(r);
            out.back().seed_index = 1;
            continue;
        }
        it->psnr += r.psnr;
        it->ssim += r.ssim;
        it->zf_psnr += r.zf_psnr;
        it->final_loss += r.final_loss;
        it->sampling_ratio += r.sampling_ratio;
        ++it->seed_index;
    }
    for (auto& o : out) {
        const double n = static_cast<double>(o.seed_index);
        o.psnr /= n;
        o.ssim /= n;
        o.zf_psnr /= n;
        o.final_loss /= n;
        o.sampling_ratio /= n;
        o.seed_index = 0;
        o.seed = 0;
    }
    return out;
}

std::string AblationResult::rows_csv() const {
    std::string s = kHeader;
    for (const auto& r : rows) s += row_line(r, true);
    return s;
}

std::string AblationResult::summary_csv() const {
    std::string s = kHeader;
    for (const auto& r : summary()) s += row_line(r, false);
    return s;
}

AblationResult run_ablation(const ExperimentConfig& cfg, std::ostream* log) {
    cfg.validate();
    const auto train = make_dataset(cfg.dataset(cfg.n_train, derive_seed(cfg.seed, "train")));
    const auto val = make_dataset(cfg.dataset(cfg.n_val, derive_seed(cfg.seed, "val")));
    const auto test = make_dataset(cfg.dataset(cfg.n_test, derive_seed(cfg.seed, "test")));
    if (test.empty()) throw ConfigError("n_test", "ablation needs at least one test phantom");

    struct Job {
        int tff, spo;
        std::size_t seed_index;
    };
    std::vector<Job> jobs;
    for (int tff = 0; tff <= 1; ++tff)
        for (int spo = 0; spo <= 2; ++spo)
            for (std::size_t k = 0; k < cfg.n_seeds; ++k) jobs.push_back({tff, spo, k});

    AblationResult result;
    result.rows.resize(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            {
                std::lock_guard lock(log_mutex);
                if (failure) return;
            }
            try {
                const Job& j = jobs[i];
                result.rows[i] = run_cell(cfg, j.tff, j.spo, j.seed_index, train, val, test);
                if (log) {
                    std::lock_guard lock(log_mutex);
                    const auto& r = result.rows[i];
                    *log << "cell tff=" << r.tff << " spo=" << r.spo << " seed_index=" << r.seed_index
                         << " psnr=" << fmt(r.psnr) << " zero_filled=" << fmt(r.zf_psnr) << std::endl;
                }
            } catch (...) {
                std::lock_guard lock(log_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    const std::size_t n = std::min(cfg.workers, jobs.size());
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return result;
}

}  // namespace mgre
