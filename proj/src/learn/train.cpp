#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mgre/learn.hpp"
#include "mgre/rng.hpp"

namespace mgre {

std::vector<Sample> make_dataset(const DatasetSpec& spec) {
    if (spec.echo_times.empty()) throw std::invalid_argument("dataset needs echo times");
    std::vector<Sample> out;
    out.reserve(spec.count);
    const RealArray full = full_masks(spec.echo_times.size(), spec.ny, spec.nz);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const PhantomSpec ps = random_phantom_spec(spec.ny, spec.nz, derive_seed(spec.seed, "phantom", i));
        const Phantom ph = generate_phantom(ps, spec.echo_times);
        Sample s;
        s.coils = generate_coils(spec.n_coils, spec.ny, spec.nz, derive_seed(spec.seed, "coils", i));
        s.truth = ph.image.data;
        s.echo_times = spec.echo_times;
        KSpaceData b = encode(ph.image, s.coils, full);
        if (spec.noise_sigma > 0.0) b = add_noise(b, spec.noise_sigma, derive_seed(spec.seed, "noise", i));
        s.kspace = std::move(b.data);
        out.push_back(std::move(s));
    }
    return out;
}

void adam_step(const std::vector<RealArray*>& params, const std::vector<const RealArray*>& grads, AdamState& st) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter / gradient count mismatch");
    if (st.m.empty()) {
        for (const auto* p : params) {
            st.m.emplace_back(p->shape(), 0.0);
            st.v.emplace_back(p->shape(), 0.0);
        }
    }
    if (st.m.size() != params.size()) throw std::invalid_argument("adam: state does not match parameters");
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = *params[k];
        const auto& g = *grads[k];
        if (g.shape() != p.shape()) throw std::invalid_argument("adam: gradient shape mismatch");
        auto& m = st.m[k];
        auto& v = st.v[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
            p[i] -= st.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + st.eps);
        }
    }
}

std::vector<RealArray*> parameter_list(TffWeights& w) {
    std::vector<RealArray*> out;
    for (auto& l : w.layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

std::vector<const RealArray*> parameter_list(const TffWeights& w) {
    std::vector<const RealArray*> out;
    for (const auto& l : w.layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

RealArray draw_mask(const PatternWeights& pattern, std::uint64_t draw_seed, std::size_t calib_size) {
    const ProbPattern p = build_prob_pattern(pattern);
    return sample_binary(p, draw_seed, calib_size, pattern.mode == SpoMode::SingleEcho).u;
}

namespace {

RealArray real_channels(const ComplexArray& z, double s) {
    const std::size_t n = z.extent(0), plane = z.size() / n;
    RealArray out({2 * n, z.extent(1), z.extent(2)});
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < plane; ++i) {
            out[(2 * j) * plane + i] = s * z[j * plane + i].real();
            out[(2 * j + 1) * plane + i] = s * z[j * plane + i].imag();
        }
    }
    return out;
}

}  // namespace

LossResult loss_and_grad(const Sample& sample, const ModelParams& params, const LossConfig& cfg, MaskSource source,
                         std::uint64_t draw_seed, const RealArray* fixed_mask, bool want_grad) {
    double peak = 0.0;
    for (const auto& v : sample.truth) peak = std::max(peak, std::abs(v));
    if (!(peak > 0.0)) throw std::invalid_argument("loss: ground truth is identically zero");
    const double s = 1.0 / peak;

    ad::Tape tape;
    ad::Var w;
    ad::Var mask;
    if (source == MaskSource::Fixed) {
        if (!fixed_mask) throw std::invalid_argument("loss: fixed mask source without a mask");
        mask = tape.constant(*fixed_mask);
    } else {
        if (params.pattern.mode == SpoMode::Manual) {
            throw std::invalid_argument("loss: manual patterns have no weights; use a fixed mask");
        }
        w = want_grad ? tape.parameter(params.pattern.w) : tape.constant(params.pattern.w);
        const ad::Var p = ad::prob_pattern(w, params.pattern.slope, params.pattern.gamma, params.pattern.mode);
        if (source == MaskSource::Sampled) {
            mask = ad::straight_through(p, draw_mask(params.pattern, draw_seed, cfg.calib_size));
        } else {
            mask = p;
        }
    }
    const graph::TffVars vars = graph::bind(tape, params.net, want_grad);
    const ad::Var out =
        graph::admm(tape, sample.kspace, mask, sample.coils, cfg.admm, [&vars](ad::Var x) { return graph::tff(x, vars); });
    const ad::Var x = ad::to_channels(ad::scale(out, s));
    const ad::Var sim = ad::ssim_sum(x, real_channels(sample.truth, s), cfg.ssim.window, cfg.ssim.c1, cfg.ssim.c2);
    const ad::Var loss = ad::scale(sim, -1.0);

    LossResult r;
    r.loss = loss.real()[0];
    r.mask = mask.real();
    if (!want_grad) return r;
    tape.backward(loss);
    r.net_grad = TffWeights::zeros(params.net.arch);
    for (auto& l : r.net_grad.layers) {
        const auto& [wv, bv] = vars.layers.at(l.name);
        if (tape.has_grad(wv.id())) l.weight = tape.grad_real(wv);
        if (tape.has_grad(bv.id())) l.bias = tape.grad_real(bv);
    }
    if (w.valid()) {
        r.pattern_grad = tape.has_grad(w.id()) ? tape.grad_real(w) : RealArray(params.pattern.w.shape(), 0.0);
    }
    return r;
}

double evaluate_loss(const std::vector<Sample>& set, const ModelParams& params, const LossConfig& cfg,
                     const RealArray& mask) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (const auto& s : set) total += loss_and_grad(s, params, cfg, MaskSource::Fixed, 0, &mask, false).loss;
    return total / static_cast<double>(set.size());
}

namespace {

void accumulate(TffWeights& acc, const TffWeights& g, double scale) {
    for (std::size_t k = 0; k < acc.layers.size(); ++k) {
        auto& a = acc.layers[k];
        const auto& b = g.layers[k];
        for (std::size_t i = 0; i < a.weight.size(); ++i) a.weight[i] += scale * b.weight[i];
        for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += scale * b.bias[i];
    }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "shuffle", epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

// Shared loop. learn_pattern: fresh Bernoulli draw each step with the
// straight-through gradient; otherwise the fixed mask is used.
TrainResult run_training(const std::vector<Sample>& train, const std::vector<Sample>& val, ModelParams params,
                         const TrainConfig& cfg, const RealArray* fixed_mask, bool learn_pattern) {
    if (train.empty()) throw std::invalid_argument("training set is empty");
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!learn_pattern && !fixed_mask) throw std::invalid_argument("training without a learned pattern needs a mask");
    params.net.check();

    AdamState net_opt;
    net_opt.lr = cfg.lr;
    AdamState pat_opt;
    pat_opt.lr = cfg.pattern_lr;

    TrainResult res;
    std::uint64_t step = 0;
    const std::size_t updates_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
    const double total_updates = static_cast<double>(cfg.epochs * updates_per_epoch);
    std::size_t update = 0;
    const std::uint64_t val_seed = derive_seed(cfg.seed, "val-mask");
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(train.size(), cfg.seed, epoch);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);
            TffWeights net_grad = TffWeights::zeros(params.net.arch);
            RealArray pat_grad;
            if (learn_pattern) pat_grad = RealArray(params.pattern.w.shape(), 0.0);
            for (std::size_t i = start; i < end; ++i) {
                const auto& smp = train[order[i]];
                const LossResult r =
                    learn_pattern
                        ? loss_and_grad(smp, params, cfg.loss, MaskSource::Sampled, derive_seed(cfg.seed, "mask", step))
                        : loss_and_grad(smp, params, cfg.loss, MaskSource::Fixed, 0, fixed_mask);
                ++step;
                epoch_loss += r.loss;
                accumulate(net_grad, r.net_grad, inv);
                if (learn_pattern) {
                    for (std::size_t k = 0; k < pat_grad.size(); ++k) pat_grad[k] += inv * r.pattern_grad[k];
                }
            }
            if (cfg.cosine_lr) {
                const double f = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(update) / total_updates));
                net_opt.lr = f * cfg.lr;
                pat_opt.lr = f * cfg.pattern_lr;
            }
            ++update;
            adam_step(parameter_list(params.net), parameter_list(std::as_const(net_grad)), net_opt);
            if (learn_pattern) adam_step({&params.pattern.w}, {&pat_grad}, pat_opt);
        }
        EpochLog e;
        e.epoch = epoch + 1;
        e.mean_loss = epoch_loss / static_cast<double>(train.size());
        if (val.empty()) {
            e.val_loss = std::numeric_limits<double>::quiet_NaN();
        } else {
            const RealArray m = learn_pattern ? draw_mask(params.pattern, val_seed, cfg.loss.calib_size) : *fixed_mask;
            e.val_loss = evaluate_loss(val, params, cfg.loss, m);
        }
        res.log.push_back(e);
    }
    res.params = std::move(params);
    return res;
}

}  // namespace

TrainResult train_phase1(const std::vector<Sample>& train, const std::vector<Sample>& val, ModelParams init,
                         const TrainConfig& cfg, const RealArray* fixed_mask) {
    const bool learn = init.pattern.mode != SpoMode::Manual;
    if (!learn && !fixed_mask) throw std::invalid_argument("manual pattern mode needs a fixed mask");
    return run_training(train, val, std::move(init), cfg, learn ? nullptr : fixed_mask, learn);
}

TrainResult train_phase2(const std::vector<Sample>& train, const std::vector<Sample>& val, const RealArray& fixed_mask,
                         ModelParams init, const TrainConfig& cfg) {
    return run_training(train, val, std::move(init), cfg, &fixed_mask, false);
}

std::string loss_log_csv(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,mean_loss,val_loss\n";
    for (const auto& e : log) {
        os << e.epoch << ',' << e.mean_loss << ',';
        if (std::isnan(e.val_loss)) {
            os << "nan";
        } else {
            os << e.val_loss;
        }
        os << '\n';
    }
    return os.str();
}

GradCheckReport gradient_check(const ScalarFn& f, const std::vector<double>& x, double eps,
                               const std::vector<std::size_t>& coords, double floor_scale) {
    if (!(eps > 0.0)) throw std::invalid_argument("gradient_check: eps must be > 0");
    std::vector<double> g;
    f(x, &g);
    if (g.size() != x.size()) throw std::invalid_argument("gradient_check: gradient size mismatch");
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    const double floor = floor_scale * gmax;

    std::vector<std::size_t> idx = coords;
    if (idx.empty()) {
        idx.resize(x.size());
        std::iota(idx.begin(), idx.end(), 0);
    }
    GradCheckReport rep;
    std::vector<double> xp = x;
    for (std::size_t i : idx) {
        if (i >= x.size()) throw std::out_of_range("gradient_check: coordinate out of range");
        xp[i] = x[i] + eps;
        const double fp = f(xp, nullptr);
        xp[i] = x[i] - eps;
        const double fm = f(xp, nullptr);
        xp[i] = x[i];
        const double num = (fp - fm) / (2.0 * eps);
        const double denom = std::max({std::abs(g[i]), std::abs(num), floor});
        const double rel = denom > 0.0 ? std::abs(g[i] - num) / denom : 0.0;
        ++rep.checked;
        if (rel <= 1e-5) ++rep.within_1e5;
        if (rel > rep.max_rel_error || rep.checked == 1) {
            rep.max_rel_error = std::max(rep.max_rel_error, rel);
            if (rel >= rep.max_rel_error) {
                rep.worst_index = i;
                rep.worst_analytic = g[i];
                rep.worst_numeric = num;
            }
        }
    }
    return rep;
}

}  // namespace mgre
