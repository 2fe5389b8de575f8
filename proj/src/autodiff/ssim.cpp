#include "mgre/ssim.hpp"

#include <stdexcept>
#include <vector>

namespace mgre {

namespace {

// Summed-area table with a zero first row and column.
std::vector<double> integral(const double* a, const double* b, std::size_t h, std::size_t w) {
    std::vector<double> s((h + 1) * (w + 1), 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
            const double v = b ? a[i * w + j] * b[i * w + j] : a[i * w + j];
            row += v;
            s[(i + 1) * (w + 1) + j + 1] = s[i * (w + 1) + j + 1] + row;
        }
    }
    return s;
}

double box(const std::vector<double>& s, std::size_t w, std::size_t i, std::size_t j, std::size_t n) {
    const std::size_t stride = w + 1;
    return s[(i + n) * stride + j + n] - s[i * stride + j + n] - s[(i + n) * stride + j] + s[i * stride + j];
}

struct WindowStats {
    double mx, my, vx, vy, cxy;
};

struct Prepared {
    std::size_t h, w, n, rows, cols;
    std::vector<double> sx, sy, sxx, syy, sxy;

    WindowStats at(std::size_t i, std::size_t j) const {
        const double inv = 1.0 / static_cast<double>(n * n);
        WindowStats st;
        st.mx = box(sx, w, i, j, n) * inv;
        st.my = box(sy, w, i, j, n) * inv;
        st.vx = box(sxx, w, i, j, n) * inv - st.mx * st.mx;
        st.vy = box(syy, w, i, j, n) * inv - st.my * st.my;
        st.cxy = box(sxy, w, i, j, n) * inv - st.mx * st.my;
        return st;
    }
};

Prepared prepare(const RealArray& x, const RealArray& y, std::size_t n) {
    if (x.ndim() != 2 || x.shape() != y.shape()) {
        throw std::invalid_argument("ssim: images must share a 2D shape, got " + shape_string(x.shape()) + " and " +
                                    shape_string(y.shape()));
    }
    const std::size_t h = x.extent(0), w = x.extent(1);
    if (n == 0 || h < n || w < n) {
        throw std::invalid_argument("ssim: image " + shape_string(x.shape()) + " smaller than window " + std::to_string(n));
    }
    return Prepared{h,
                    w,
                    n,
                    h - n + 1,
                    w - n + 1,
                    integral(x.data(), nullptr, h, w),
                    integral(y.data(), nullptr, h, w),
                    integral(x.data(), x.data(), h, w),
                    integral(y.data(), y.data(), h, w),
                    integral(x.data(), y.data(), h, w)};
}

}  // namespace

double ssim_map(const RealArray& x, const RealArray& y, const SsimParams& p) {
    const Prepared pr = prepare(x, y, p.window);
    double total = 0.0;
    for (std::size_t i = 0; i < pr.rows; ++i)
        for (std::size_t j = 0; j < pr.cols; ++j) {
            const auto s = pr.at(i, j);
            const double num = (2.0 * (s.mx * s.my) + p.c1) * (2.0 * s.cxy + p.c2);
            const double den = (s.mx * s.mx + s.my * s.my + p.c1) * (s.vx + s.vy + p.c2);
            total += num / den;
        }
    return total / static_cast<double>(pr.rows * pr.cols);
}

RealArray ssim_grad(const RealArray& x, const RealArray& y, const SsimParams& p) {
    const Prepared pr = prepare(x, y, p.window);
    const std::size_t h = pr.h, w = pr.w, n = pr.n;
    // Difference arrays for box-scattering per-window coefficients back to pixels.
    const std::size_t stride = w + 1;
    std::vector<double> da((h + 1) * stride, 0.0), db(da.size(), 0.0), dc(da.size(), 0.0);
    auto scatter = [&](std::vector<double>& d, std::size_t i, std::size_t j, double v) {
        d[i * stride + j] += v;
        d[(i + n) * stride + j] -= v;
        d[i * stride + j + n] -= v;
        d[(i + n) * stride + j + n] += v;
    };
    for (std::size_t i = 0; i < pr.rows; ++i)
        for (std::size_t j = 0; j < pr.cols; ++j) {
            const auto s = pr.at(i, j);
            const double A = 2.0 * (s.mx * s.my) + p.c1, B = 2.0 * s.cxy + p.c2;
            const double C = s.mx * s.mx + s.my * s.my + p.c1, D = s.vx + s.vy + p.c2;
            const double S = (A * B) / (C * D);
            const double d_mu = 2.0 * s.my * B / (C * D) - S * 2.0 * s.mx / C;
            const double beta = -2.0 * S / D;
            const double gam = 2.0 * A / (C * D);
            const double alpha = d_mu - beta * s.mx - gam * s.my;
            scatter(da, i, j, alpha);
            scatter(db, i, j, beta);
            scatter(dc, i, j, gam);
        }
    auto prefix = [&](std::vector<double>& d) {
        for (std::size_t i = 0; i <= h; ++i)
            for (std::size_t j = 1; j <= w; ++j) d[i * stride + j] += d[i * stride + j - 1];
        for (std::size_t i = 1; i <= h; ++i)
            for (std::size_t j = 0; j <= w; ++j) d[i * stride + j] += d[(i - 1) * stride + j];
    };
    prefix(da);
    prefix(db);
    prefix(dc);
    const double scale = 1.0 / (static_cast<double>(n * n) * static_cast<double>(pr.rows * pr.cols));
    RealArray g(x.shape());
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t k = i * stride + j;
            g.at(i, j) = scale * (da[k] + db[k] * x.at(i, j) + dc[k] * y.at(i, j));
        }
    return g;
}

}  // namespace mgre
