#include "doctest.h"

#include "gradcheck.hpp"
#include "mgre/learn.hpp"
#include "oracles.hpp"

using namespace mgre;

namespace {

std::vector<Sample> tiny_set(std::size_t n, std::uint64_t seed) {
    DatasetSpec ds;
    ds.count = n;
    ds.ny = ds.nz = 12;
    ds.echo_times = {0.004, 0.010};
    ds.n_coils = 2;
    ds.noise_sigma = 0.001;
    ds.seed = seed;
    return make_dataset(ds);
}

ModelParams tiny_model(SpoMode mode) {
    TffArchitecture a;
    a.echoes = 2;
    a.hidden = 4;
    a.width = 8;
    ModelParams m;
    m.net = TffWeights::random(a, 3, WeightInit::NearIdentity, 0.1);
    m.pattern = PatternWeights::zeros(2, 12, 12, 0.4, 0.5, mode);
    return m;
}

TrainConfig tiny_train(std::size_t epochs) {
    TrainConfig c;
    c.epochs = epochs;
    c.lr = 1e-3;
    c.pattern_lr = 0.05;
    c.loss.admm = {2, 1.0, 3};
    c.loss.ssim.window = 4;
    c.loss.calib_size = 2;
    c.seed = 17;
    return c;
}

}  // namespace

TEST_CASE("Adam first step moves each coordinate by lr against the gradient sign") {
    RealArray p({3}, std::vector<double>{1.0, -2.0, 0.5});
    const RealArray g({3}, std::vector<double>{0.3, -4.0, 0.0});
    AdamState st;
    st.lr = 0.1;
    adam_step({&p}, {&g}, st);
    CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-1.9).epsilon(1e-6));
    CHECK(p[2] == 0.5);
    CHECK(st.step == 1);
}

TEST_CASE("Adam second step matches a hand recurrence") {
    RealArray p({1}, 0.0);
    AdamState st;
    st.lr = 0.01;
    const RealArray g1({1}, 1.0), g2({1}, -0.5);
    adam_step({&p}, {&g1}, st);
    adam_step({&p}, {&g2}, st);
    const double m = 0.9 * 0.1 * 1.0 + 0.1 * -0.5, v = 0.999 * 0.001 + 0.001 * 0.25;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    CHECK(p[0] == doctest::Approx(-0.01 / (1 + 1e-8) - 0.01 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("Adam minimizes a quadratic") {
    RealArray p({2}, std::vector<double>{3.0, -1.0});
    AdamState st;
    st.lr = 0.05;
    for (int i = 0; i < 2000; ++i) {
        const RealArray g({2}, std::vector<double>{2 * (p[0] - 1.0), 8 * (p[1] + 0.5)});
        adam_step({&p}, {&g}, st);
    }
    CHECK(std::abs(p[0] - 1.0) < 1e-3);
    CHECK(std::abs(p[1] + 0.5) < 1e-3);
}

TEST_CASE("gradient check accepts a correct gradient and flags a corrupted one") {
    auto f = [](const std::vector<double>& x, std::vector<double>* g) {
        if (g) *g = {2 * x[0] + x[1], x[0] + 6 * x[1] * x[1]};
        return x[0] * x[0] + x[0] * x[1] + 2 * x[1] * x[1] * x[1];
    };
    const auto ok = gradient_check(f, {0.7, -0.3}, 1e-6);
    CHECK(ok.max_rel_error < 1e-8);
    CHECK(ok.fraction_within_1e5() == 1.0);
    auto bad = [&](const std::vector<double>& x, std::vector<double>* g) {
        const double v = f(x, g);
        if (g) (*g)[1] *= 1.01;
        return v;
    };
    const auto rep = gradient_check(bad, {0.7, -0.3}, 1e-6);
    CHECK(rep.max_rel_error > 5e-3);
    CHECK(rep.worst_index == 1);
    CHECK(rep.within_1e5 == 1);
    CHECK_THROWS_AS(gradient_check(f, {0.0, 0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("full loss gradient in the network weights matches finite differences") {
    const auto p = gradcheck::make_problem(5);
    const auto x = gradcheck::network_point(p);
    std::vector<std::size_t> coords;
    for (std::size_t i = 0; i < x.size(); i += 7) coords.push_back(i);
    const auto rep = gradient_check(gradcheck::network_fn(p, 3), x, 1e-6, coords);
    CHECK(rep.fraction_within_1e5() >= 0.95);
    CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("full loss gradient in the pattern weights matches finite differences") {
    const auto p = gradcheck::make_problem(6);
    const auto rep = gradient_check(gradcheck::pattern_fn(p), p.params.pattern.w.values(), 1e-6);
    CHECK(rep.fraction_within_1e5() >= 0.95);
    CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("loss of a perfect reconstruction is minus the channel count") {
    auto p = gradcheck::make_problem(7);
    // full sampling, identity network, no noise
    p.sample.kspace = encode(p.sample.truth, p.sample.coils, full_masks(2, 8, 8));
    TffArchitecture a = p.params.net.arch;
    a.width = 8;
    p.params.net = TffWeights::random(a, 1, WeightInit::NearIdentity, 0.0);
    const RealArray full({2, 8, 8}, 1.0);
    const auto r = loss_and_grad(p.sample, p.params, p.cfg, MaskSource::Fixed, 0, &full, false);
    CHECK(r.loss == doctest::Approx(-4.0).epsilon(1e-9));
}

TEST_CASE("loss argument errors") {
    auto p = gradcheck::make_problem(8);
    CHECK_THROWS_AS(loss_and_grad(p.sample, p.params, p.cfg, MaskSource::Fixed), std::invalid_argument);
    p.params.pattern.mode = SpoMode::Manual;
    CHECK_THROWS_AS(loss_and_grad(p.sample, p.params, p.cfg, MaskSource::Sampled), std::invalid_argument);
    p.sample.truth = ComplexArray(p.sample.truth.shape());
    const RealArray full({2, 8, 8}, 1.0);
    CHECK_THROWS_AS(loss_and_grad(p.sample, p.params, p.cfg, MaskSource::Fixed, 0, &full), std::invalid_argument);
}

TEST_CASE("sampled mask follows the draw seed") {
    const auto p = gradcheck::make_problem(9);
    const auto a = loss_and_grad(p.sample, p.params, p.cfg, MaskSource::Sampled, 4, nullptr, false);
    CHECK(a.mask == draw_mask(p.params.pattern, 4, 0));
    const auto s = loss_and_grad(p.sample, p.params, p.cfg, MaskSource::Surrogate, 0, nullptr, false);
    CHECK(s.mask == build_prob_pattern(p.params.pattern).p);
}

TEST_CASE("datasets are deterministic per seed") {
    const auto a = tiny_set(2, 4), b = tiny_set(2, 4), c = tiny_set(2, 5);
    CHECK(a[1].kspace == b[1].kspace);
    CHECK(a[1].truth == b[1].truth);
    CHECK(!(a[0].truth == c[0].truth));
    CHECK(!(a[0].truth == a[1].truth));
    CHECK(a[0].kspace.shape() == Shape{2, 2, 12, 12});
}

TEST_CASE("zero epochs leave the parameters unchanged") {
    const auto train = tiny_set(2, 1);
    const ModelParams init = tiny_model(SpoMode::MultiEcho);
    const auto r = train_phase1(train, {}, init, tiny_train(0));
    CHECK(r.log.empty());
    CHECK(r.params.pattern.w == init.pattern.w);
    for (std::size_t i = 0; i < init.net.layers.size(); ++i) CHECK(r.params.net.layers[i].weight == init.net.layers[i].weight);
}

TEST_CASE("phase 1 is deterministic and moves both parameter sets") {
    const auto train = tiny_set(2, 1), val = tiny_set(1, 2);
    const ModelParams init = tiny_model(SpoMode::MultiEcho);
    const auto a = train_phase1(train, val, init, tiny_train(2));
    const auto b = train_phase1(train, val, init, tiny_train(2));
    REQUIRE(a.log.size() == 2);
    CHECK(a.log[1].mean_loss == b.log[1].mean_loss);
    CHECK(a.log[1].val_loss == b.log[1].val_loss);
    CHECK(std::isfinite(a.log[0].val_loss));
    CHECK(a.params.pattern.w == b.params.pattern.w);
    CHECK(!(a.params.pattern.w == init.pattern.w));
    CHECK(!(a.params.net.layers[0].weight == init.net.layers[0].weight));
    const std::string csv = loss_log_csv(a.log);
    CHECK(csv.rfind("epoch,mean_loss,val_loss\n1,", 0) == 0);
}

TEST_CASE("single-echo patterns stay shared across echoes during training") {
    const auto train = tiny_set(2, 1);
    const auto r = train_phase1(train, {}, tiny_model(SpoMode::SingleEcho), tiny_train(2));
    const RealArray p = build_prob_pattern(r.params.pattern).p;
    for (std::size_t i = 0; i < 144; ++i) CHECK(p[i] == p[144 + i]);
    CHECK(std::isnan(train_phase1(train, {}, tiny_model(SpoMode::SingleEcho), tiny_train(1)).log[0].val_loss));
}

TEST_CASE("manual mode trains the network only, with the given mask") {
    const auto train = tiny_set(2, 1);
    ModelParams init = tiny_model(SpoMode::Manual);
    CHECK_THROWS_AS(train_phase1(train, {}, init, tiny_train(1)), std::invalid_argument);
    const RealArray mask = manual_vd_pattern(2, 12, 12, 0.4, 3, 5).u;
    const auto r = train_phase1(train, {}, init, tiny_train(1), &mask);
    CHECK(r.params.pattern.w == init.pattern.w);
    CHECK(!(r.params.net.layers[0].weight == init.net.layers[0].weight));
}

TEST_CASE("phase 2 leaves the pattern untouched") {
    const auto train = tiny_set(2, 1);
    const ModelParams init = tiny_model(SpoMode::MultiEcho);
    const RealArray mask = draw_mask(init.pattern, 3, 2);
    TrainConfig c = tiny_train(2);
    c.phase = 2;
    const auto r = train_phase2(train, {}, mask, init, c);
    CHECK(r.params.pattern.w == init.pattern.w);
    CHECK(!(r.params.net.layers[0].weight == init.net.layers[0].weight));
    CHECK(r.log.size() == 2);
}

TEST_CASE("a few epochs lower the training loss") {
    const auto train = tiny_set(3, 11);
    const RealArray mask = manual_vd_pattern(2, 12, 12, 0.4, 3, 5, 0.5, 2).u;
    TrainConfig c = tiny_train(6);
    c.lr = 3e-3;
    const auto r = train_phase2(train, {}, mask, tiny_model(SpoMode::MultiEcho), c);
    CHECK(r.log.back().mean_loss < r.log.front().mean_loss);
}

TEST_CASE("cosine schedule starts at the base rate and then decays") {
    const auto train = tiny_set(2, 1);
    const RealArray mask = manual_vd_pattern(2, 12, 12, 0.4, 3, 5, 0.5, 2).u;
    const ModelParams init = tiny_model(SpoMode::MultiEcho);
    auto run = [&](std::size_t n, bool cosine) {
        TrainConfig c = tiny_train(1);
        c.cosine_lr = cosine;
        const std::vector<Sample> part(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n));
        return train_phase2(part, {}, mask, init, c).params.net.layers[0].weight;
    };
    CHECK(run(1, true) == run(1, false));
    // the second update runs at half the rate, so its move is shorter
    const RealArray w0 = init.net.layers[0].weight, wc = run(2, true), wk = run(2, false);
    double dc = 0, dk = 0;
    for (std::size_t i = 0; i < w0.size(); ++i) {
        dc += std::abs(wc[i] - w0[i]);
        dk += std::abs(wk[i] - w0[i]);
    }
    CHECK(!(wc == wk));
    CHECK(dc < dk);
}
