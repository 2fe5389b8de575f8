#include "doctest.h"

#include "mgre/autodiff.hpp"
#include "mgre/conv.hpp"
#include "mgre/errors.hpp"
#include "mgre/ssim.hpp"
#include "oracles.hpp"

using namespace mgre;

namespace {

using Build = std::function<ad::Var(ad::Tape&, ad::Var)>;

// Reduce any node to a real scalar by a fixed random projection.
ad::Var project(ad::Tape& t, ad::Var v, std::uint64_t seed) {
    if (v.shape() == Shape{1} && !v.is_complex()) return v;
    if (!v.is_complex()) v = ad::from_channels(v);
    return ad::inner_re(v, t.constant(oracle::random_complex(v.shape(), seed)));
}

double value_of(const Build& f, const RealArray& x) {
    ad::Tape t;
    return project(t, f(t, t.constant(x)), 99).real()[0];
}

// Largest relative disagreement between the tape gradient and central differences.
double grad_error(const Build& f, const RealArray& x, double eps = 1e-6) {
    ad::Tape t;
    const ad::Var p = t.parameter(x);
    t.backward(project(t, f(t, p), 99));
    const RealArray g = t.grad_real(p);
    double scale = 0;
    for (double v : g) scale = std::max(scale, std::abs(v));
    double worst = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        RealArray xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        const double num = (value_of(f, xp) - value_of(f, xm)) / (2 * eps);
        worst = std::max(worst, std::abs(num - g[i]) / std::max({std::abs(num), std::abs(g[i]), 1e-3 * scale, 1e-12}));
    }
    return worst;
}

}  // namespace

TEST_CASE("conv2d forward matches the loop oracle") {
    for (std::size_t k : {1, 3, 5}) {
        const RealArray x = oracle::random_real({3, 7, 9}, k);
        const RealArray w = oracle::random_real({4, 3, k, k}, 10 + k);
        const RealArray b = oracle::random_real({4}, 20 + k);
        const RealArray y = conv2d_forward(x, w, b), ref = oracle::conv2d(x, w, b);
        REQUIRE(y.shape() == ref.shape());
        double d = 0;
        for (std::size_t i = 0; i < y.size(); ++i) d = std::max(d, std::abs(y[i] - ref[i]));
        CHECK(d < 1e-12);
    }
}

TEST_CASE("conv2d backward is the adjoint of the forward map") {
    const RealArray x = oracle::random_real({2, 6, 5}, 1), w = oracle::random_real({3, 2, 3, 3}, 2);
    const RealArray dy = oracle::random_real({3, 6, 5}, 3);
    RealArray dx(x.shape(), 0.0), dw(w.shape(), 0.0), db({3}, 0.0);
    conv2d_backward(x, w, dy, &dx, &dw, &db);
    const RealArray y = conv2d_forward(x, w, RealArray({3}, 0.0));
    double lhs = 0, rhs = 0, wsum = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * dy[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * dx[i];
    for (std::size_t i = 0; i < w.size(); ++i) wsum += w[i] * dw[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    CHECK(lhs == doctest::Approx(wsum).epsilon(1e-12));
    double dys = 0;
    for (std::size_t i = 0; i < 30; ++i) dys += dy[i];
    CHECK(db[0] == doctest::Approx(dys).epsilon(1e-12));
}

TEST_CASE("elementwise and structural ops pass finite differences") {
    const RealArray x = oracle::random_real({4, 3, 3}, 7);
    const RealArray c = oracle::random_real({4, 3, 3}, 8);
    CHECK(grad_error([&](ad::Tape& t, ad::Var v) { return ad::add(v, t.constant(c)); }, x) < 1e-7);
    CHECK(grad_error([&](ad::Tape& t, ad::Var v) { return ad::sub(t.constant(c), ad::scale(v, 2.5)); }, x) < 1e-7);
    CHECK(grad_error([&](ad::Tape&, ad::Var v) { return ad::relu(v); }, x) < 1e-7);
    CHECK(grad_error([&](ad::Tape&, ad::Var v) { return ad::sum(ad::relu(v)); }, x) < 1e-7);
    CHECK(grad_error([&](ad::Tape& t, ad::Var v) { return ad::concat({v, t.constant(c), v}); }, x) < 1e-7);
    CHECK(grad_error([&](ad::Tape&, ad::Var v) { return ad::slice(v, 2, 2); }, x) < 1e-7);
    CHECK(grad_error([&](ad::Tape&, ad::Var v) { return ad::to_channels(ad::from_channels(v)); }, x) < 1e-7);
    CHECK(grad_error([&](ad::Tape&, ad::Var v) { return ad::sub(v, v); }, x) < 1e-7);
}

TEST_CASE("conv2d node gradients for input, weights and bias") {
    const RealArray x = oracle::random_real({2, 5, 6}, 1), w = oracle::random_real({4, 2, 3, 3}, 2);
    const RealArray b = oracle::random_real({4}, 3);
    CHECK(grad_error([&](ad::Tape& t, ad::Var v) { return ad::conv2d(v, t.constant(w), t.constant(b)); }, x) < 1e-7);
    CHECK(grad_error([&](ad::Tape& t, ad::Var v) { return ad::conv2d(t.constant(x), v, t.constant(b)); }, w) < 1e-6);
    CHECK(grad_error([&](ad::Tape& t, ad::Var v) { return ad::conv2d(t.constant(x), t.constant(w), v); }, b) < 1e-7);
}

TEST_CASE("scalar ops used by unrolled CG") {
    const RealArray x = oracle::random_real({4, 3, 2}, 5);
    const ComplexArray y = oracle::random_complex({2, 3, 2}, 6);
    auto cg_like = [&](ad::Tape& t, ad::Var v) {
        const ad::Var z = ad::from_channels(v), c = t.constant(y);
        const ad::Var alpha = ad::div(ad::inner_re(z, z), ad::inner_re(z, c));
        return ad::axmy(ad::axpy(c, alpha, z), ad::inner_re(c, z), z);
    };
    CHECK(grad_error(cg_like, x) < 1e-6);
}

TEST_CASE("encoding nodes differentiate in the image and in the mask") {
    const std::size_t nt = 2, h = 4, w = 5;
    const CoilSet coils = generate_coils(2, h, w, 3);
    const RealArray img = oracle::random_real({2 * nt, h, w}, 9);
    const RealArray mask = oracle::random_real({nt, h, w}, 10, 0.1, 0.9);
    const ComplexArray b = oracle::random_complex({nt, 2, h, w}, 11);
    CHECK(grad_error([&](ad::Tape& t, ad::Var v) { return ad::normal_op(ad::from_channels(v), t.constant(mask), coils); },
                     img) < 1e-6);
    CHECK(grad_error([&](ad::Tape& t, ad::Var v) {
              return ad::normal_op(t.constant(ComplexArray(oracle::random_complex({nt, h, w}, 12))), v, coils);
          },
                     mask) < 1e-7);
    CHECK(grad_error([&](ad::Tape&, ad::Var v) { return ad::masked_adjoint(b, v, coils); }, mask) < 1e-7);
}

TEST_CASE("pattern node gradient and straight-through pass") {
    const RealArray w = oracle::random_real({2, 4, 4}, 13, -3, 3);
    CHECK(grad_error([&](ad::Tape&, ad::Var v) { return ad::prob_pattern(v, 0.5, 0.3, SpoMode::MultiEcho); }, w) < 1e-6);
    ad::Tape t;
    const ad::Var p = t.parameter(oracle::random_real({2, 4, 4}, 14, 0.0, 1.0));
    RealArray bin({2, 4, 4}, 0.0);
    bin[3] = 1.0;
    const ad::Var u = ad::straight_through(p, bin);
    CHECK(u.real() == bin);
    const ComplexArray c = oracle::random_complex({1, 4, 4}, 15);
    t.backward(ad::inner_re(ad::from_channels(u), t.constant(c)));
    const RealArray& g = t.grad_real(p);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(g[i] == c[i].real());
        CHECK(g[16 + i] == c[i].imag());
    }
}

TEST_CASE("SSIM matches the brute-force oracle") {
    for (std::size_t win : {3, 4, 7}) {
        const RealArray x = oracle::random_real({12, 11}, win, 0.0, 1.0);
        const RealArray y = oracle::random_real({12, 11}, win + 50, 0.0, 1.0);
        const SsimParams prm{win, 1e-4, 9e-4};
        CHECK(std::abs(ssim_map(x, y, prm) - oracle::ssim(x, y, win, prm.c1, prm.c2)) < 1e-12);
        CHECK(ssim_map(x, y, prm) == doctest::Approx(ssim_map(y, x, prm)).epsilon(1e-14));
        CHECK(ssim_map(x, x, prm) == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("SSIM of a constant shift has the closed form") {
    // Same variance and covariance = variance, so SSIM reduces to the luminance term.
    RealArray x({6, 6}, 0.3), y({6, 6}, 0.5);
    const SsimParams prm{3, 1e-4, 9e-4};
    const double expect = (2 * 0.3 * 0.5 + prm.c1) / (0.09 + 0.25 + prm.c1);
    CHECK(std::abs(ssim_map(x, y, prm) - expect) < 1e-12);
    // Non-constant image: the structure term is exactly one, leaving the
    // luminance term of each window.
    const RealArray z = oracle::random_real({8, 8}, 3, 0.0, 1.0);
    RealArray zs = z;
    for (auto& v : zs) v += 0.2;
    double closed = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r + 3 <= 8; ++r)
        for (std::size_t c = 0; c + 3 <= 8; ++c) {
            double mu = 0;
            for (std::size_t u = 0; u < 3; ++u)
                for (std::size_t v = 0; v < 3; ++v) mu += z.at(r + u, c + v) / 9.0;
            closed += (2 * mu * (mu + 0.2) + prm.c1) / (mu * mu + (mu + 0.2) * (mu + 0.2) + prm.c1);
            ++n;
        }
    CHECK(std::abs(ssim_map(z, zs, prm) - closed / static_cast<double>(n)) < 1e-12);
}

TEST_CASE("SSIM gradient matches finite differences") {
    const RealArray x = oracle::random_real({9, 8}, 1, 0.0, 1.0), y = oracle::random_real({9, 8}, 2, 0.0, 1.0);
    const SsimParams prm{4, 1e-4, 9e-4};
    const RealArray g = ssim_grad(x, y, prm);
    for (std::size_t i = 0; i < x.size(); ++i) {
        RealArray xp = x, xm = x;
        xp[i] += 1e-6;
        xm[i] -= 1e-6;
        const double num = (ssim_map(xp, y, prm) - ssim_map(xm, y, prm)) / 2e-6;
        CHECK(std::abs(num - g[i]) < 1e-7 * std::max(1.0, std::abs(num)));
    }
    CHECK(grad_error([&](ad::Tape&, ad::Var v) {
              return ad::ssim_sum(v, RealArray({2, 9, 8}, oracle::random_real({2, 9, 8}, 4, 0.0, 1.0).values()), 4, 1e-4,
                                  9e-4);
          },
                     oracle::random_real({2, 9, 8}, 5, 0.0, 1.0)) < 1e-6);
}

TEST_CASE("non-finite values are reported with the node name") {
    ad::Tape t;
    const ad::Var p = t.parameter(RealArray({1}, 0.0));
    const ad::Var q = ad::div(p, p);
    try {
        t.backward(q);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("div") != std::string::npos);
    }
}

TEST_CASE("opaque nodes refuse differentiable inputs") {
    ad::Tape t;
    const ad::Var c = t.constant(ComplexArray({2}, cplx(1, 1)));
    const ad::Var o = ad::opaque(c, [](const ComplexArray& z) { return z; }, "copy");
    CHECK(o.cplx() == c.cplx());
    const ad::Var p = ad::from_channels(t.parameter(RealArray({2, 2}, 1.0)));
    CHECK_THROWS_AS(ad::opaque(p, [](const ComplexArray& z) { return z; }, "copy"), std::invalid_argument);
    CHECK_THROWS_AS(t.backward(c), std::invalid_argument);
    CHECK_THROWS_AS(ad::add(c, t.constant(ComplexArray({3}))), std::invalid_argument);
}
