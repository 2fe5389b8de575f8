#pragma once

// Slow, direct reference implementations used as test oracles. None of these
// call into the library's numeric kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "mgre/rng.hpp"
#include "mgre/tensor.hpp"

namespace oracle {

using mgre::ComplexArray;
using mgre::cplx;
using mgre::RealArray;

// Centered unitary 2-D DFT of one plane by direct summation, O(N^2) per output.
inline std::vector<cplx> dft2_centered(const std::vector<cplx>& x, std::size_t h, std::size_t w, int sign = -1) {
    std::vector<cplx> out(h * w);
    const double ch = static_cast<double>(h / 2), cw = static_cast<double>(w / 2);
    const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
    for (std::size_t ky = 0; ky < h; ++ky)
        for (std::size_t kz = 0; kz < w; ++kz) {
            cplx acc{};
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t z = 0; z < w; ++z) {
                    const double ph = sign * 2.0 * std::numbers::pi *
                                      ((ky - ch) * (y - ch) / static_cast<double>(h) +
                                       (kz - cw) * (z - cw) / static_cast<double>(w));
                    acc += x[y * w + z] * cplx(std::cos(ph), std::sin(ph));
                }
            out[ky * w + kz] = acc * scale;
        }
    return out;
}

// Dense forward model: b[j,k] = U_j . DFT(E_k . s_j)
inline ComplexArray encode(const ComplexArray& x, const ComplexArray& coils, const RealArray& masks) {
    const std::size_t nt = x.extent(0), h = x.extent(1), w = x.extent(2), nc = coils.extent(0), plane = h * w;
    ComplexArray b({nt, nc, h, w});
    for (std::size_t j = 0; j < nt; ++j)
        for (std::size_t k = 0; k < nc; ++k) {
            std::vector<cplx> img(plane);
            for (std::size_t v = 0; v < plane; ++v) img[v] = coils[k * plane + v] * x[j * plane + v];
            const auto spec = dft2_centered(img, h, w, -1);
            for (std::size_t v = 0; v < plane; ++v) b[(j * nc + k) * plane + v] = masks[j * plane + v] * spec[v];
        }
    return b;
}

// Zero-padded "same" cross-correlation of one channel stack, by loops.
// x [C_in, H, W], w [C_out, C_in, K, K], b [C_out]
inline RealArray conv2d(const RealArray& x, const RealArray& w, const RealArray& b) {
    const long cin = static_cast<long>(x.extent(0)), H = static_cast<long>(x.extent(1)), W = static_cast<long>(x.extent(2));
    const long cout = static_cast<long>(w.extent(0)), K = static_cast<long>(w.extent(2)), p = K / 2;
    RealArray y({static_cast<std::size_t>(cout), x.extent(1), x.extent(2)});
    for (long o = 0; o < cout; ++o)
        for (long r = 0; r < H; ++r)
            for (long c = 0; c < W; ++c) {
                double acc = b[o];
                for (long i = 0; i < cin; ++i)
                    for (long u = 0; u < K; ++u)
                        for (long v = 0; v < K; ++v) {
                            const long rr = r + u - p, cc = c + v - p;
                            if (rr < 0 || rr >= H || cc < 0 || cc >= W) continue;
                            acc += w[((o * cin + i) * K + u) * K + v] * x[(i * H + rr) * W + cc];
                        }
                y[(o * H + r) * W + c] = acc;
            }
    return y;
}

// Mean SSIM over every window position, statistics by direct summation.
inline double ssim(const RealArray& x, const RealArray& y, std::size_t win, double c1, double c2) {
    const std::size_t H = x.extent(0), W = x.extent(1);
    const double n = static_cast<double>(win * win);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r + win <= H; ++r)
        for (std::size_t c = 0; c + win <= W; ++c) {
            double mx = 0, my = 0;
            for (std::size_t u = 0; u < win; ++u)
                for (std::size_t v = 0; v < win; ++v) {
                    mx += x.at(r + u, c + v);
                    my += y.at(r + u, c + v);
                }
            mx /= n;
            my /= n;
            double vx = 0, vy = 0, cxy = 0;
            for (std::size_t u = 0; u < win; ++u)
                for (std::size_t v = 0; v < win; ++v) {
                    const double a = x.at(r + u, c + v) - mx, b = y.at(r + u, c + v) - my;
                    vx += a * a;
                    vy += b * b;
                    cxy += a * b;
                }
            vx /= n;
            vy /= n;
            cxy /= n;
            total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

// Laplacian of Gaussian, normalized Gaussian times (r^2 - 2 s^2) / s^4, zero-mean.
inline std::vector<double> log_kernel(int size, double s) {
    const int h = size / 2;
    std::vector<double> g(static_cast<std::size_t>(size * size)), k(g.size());
    double gs = 0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double r2 = (i - h) * (i - h) + (j - h) * (j - h);
            g[i * size + j] = std::exp(-r2 / (2 * s * s));
            gs += g[i * size + j];
        }
    double ks = 0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double r2 = (i - h) * (i - h) + (j - h) * (j - h);
            k[i * size + j] = g[i * size + j] / gs * (r2 - 2 * s * s) / (s * s * s * s);
            ks += k[i * size + j];
        }
    for (auto& v : k) v -= ks / static_cast<double>(k.size());
    return k;
}

inline RealArray filter(const RealArray& img, const std::vector<double>& k, int size) {
    const int H = static_cast<int>(img.extent(0)), W = static_cast<int>(img.extent(1)), h = size / 2;
    RealArray out(img.shape(), 0.0);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double acc = 0;
            for (int u = -h; u <= h; ++u)
                for (int v = -h; v <= h; ++v) {
                    const int rr = r + u, cc = c + v;
                    if (rr >= 0 && rr < H && cc >= 0 && cc < W) acc += k[(u + h) * size + (v + h)] * img.at(rr, cc);
                }
            out.at(r, c) = acc;
        }
    return out;
}

// Thin SVD of a complex m x n matrix (row-major, m >= n) by one-sided
// Jacobi rotations. Returns U (m x n), singular values, V (n x n).
struct Svd {
    std::vector<cplx> u, v;
    std::vector<double> s;
};

inline Svd jacobi_svd(std::vector<cplx> a, std::size_t m, std::size_t n) {
    std::vector<cplx> v(n * n, cplx{});
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0, aqq = 0;
                cplx apq{};
                for (std::size_t i = 0; i < m; ++i) {
                    app += std::norm(a[i * n + p]);
                    aqq += std::norm(a[i * n + q]);
                    apq += std::conj(a[i * n + p]) * a[i * n + q];
                }
                const double mag = std::abs(apq);
                if (mag <= 1e-300 || mag <= 1e-16 * std::sqrt(app * aqq)) continue;
                off = std::max(off, mag / std::sqrt(app * aqq));
                const cplx phase = apq / mag;
                const double tau = (aqq - app) / (2.0 * mag);
                const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
                auto rotate = [&](std::vector<cplx>& mat, std::size_t rows) {
                    for (std::size_t i = 0; i < rows; ++i) {
                        const cplx xp = mat[i * n + p], xq = mat[i * n + q];
                        mat[i * n + p] = c * xp - s * std::conj(phase) * xq;
                        mat[i * n + q] = s * phase * xp + c * xq;
                    }
                };
                rotate(a, m);
                rotate(v, n);
            }
        if (off < 1e-15) break;
    }
    Svd r;
    r.s.resize(n);
    r.u = a;
    for (std::size_t j = 0; j < n; ++j) {
        double nn = 0;
        for (std::size_t i = 0; i < m; ++i) nn += std::norm(a[i * n + j]);
        r.s[j] = std::sqrt(nn);
        if (r.s[j] > 0)
            for (std::size_t i = 0; i < m; ++i) r.u[i * n + j] /= r.s[j];
    }
    r.v = v;
    return r;
}

// Soft-threshold the singular values: U max(S - lambda, 0) V^H
inline std::vector<cplx> svt(const std::vector<cplx>& a, std::size_t m, std::size_t n, double lambda) {
    const Svd d = jacobi_svd(a, m, n);
    std::vector<cplx> out(m * n, cplx{});
    for (std::size_t j = 0; j < n; ++j) {
        const double s = std::max(d.s[j] - lambda, 0.0);
        if (s == 0.0) continue;
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) out[r * n + c] += d.u[r * n + j] * s * std::conj(d.v[c * n + j]);
    }
    return out;
}

inline RealArray random_real(const mgre::Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    RealArray a(shape);
    mgre::Rng rng(seed);
    for (auto& v : a) v = lo + (hi - lo) * rng.uniform();
    return a;
}

inline ComplexArray random_complex(const mgre::Shape& shape, std::uint64_t seed) {
    ComplexArray a(shape);
    mgre::Rng rng(seed);
    for (auto& v : a) v = cplx(rng.normal(), rng.normal());
    return a;
}

// Central difference of f along direction d at x (vector form).
inline double directional_fd(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                             std::size_t i, double eps) {
    const double x0 = x[i];
    x[i] = x0 + eps;
    const double fp = f(x);
    x[i] = x0 - eps;
    const double fm = f(x);
    return (fp - fm) / (2 * eps);
}

}  // namespace oracle
