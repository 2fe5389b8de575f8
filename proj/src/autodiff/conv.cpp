#include "mgre/conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <stdexcept>

namespace mgre {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Dims {
    std::size_t cin, cout, h, w, k;
};

Dims check(const RealArray& x, const RealArray& w) {
    if (x.ndim() != 3) throw std::invalid_argument("conv2d input must be [C, H, W], got " + shape_string(x.shape()));
    if (w.ndim() != 4 || w.extent(2) != w.extent(3) || w.extent(2) % 2 == 0) {
        throw std::invalid_argument("conv2d kernel must be [C_out, C_in, K, K] with odd K, got " + shape_string(w.shape()));
    }
    if (w.extent(1) != x.extent(0)) {
        throw std::invalid_argument("conv2d kernel " + shape_string(w.shape()) + " does not match input " +
                                    shape_string(x.shape()));
    }
    return {x.extent(0), w.extent(0), x.extent(1), x.extent(2), w.extent(2)};
}

// Zero-padded planes flattened with row stride W + 2p. On that layout tap
// (ky, kx) is a constant offset, so each tap is one GEMM over the run of
// positions from the first to the last interior pixel; border positions in
// the run are computed and discarded.
struct Padded {
    long pad, wp, len, p0, n;

    explicit Padded(const Dims& d) {
        pad = static_cast<long>(d.k / 2);
        wp = static_cast<long>(d.w) + 2 * pad;
        len = (static_cast<long>(d.h) + 2 * pad) * wp;
        p0 = pad * wp + pad;
        n = (static_cast<long>(d.h) - 1) * wp + static_cast<long>(d.w);
    }
    long offset(std::size_t ky, std::size_t kx) const {
        return (static_cast<long>(ky) - pad) * wp + (static_cast<long>(kx) - pad);
    }
};

using StrideMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using MutStrideMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

void pad_planes(const double* src, std::size_t c, const Dims& d, const Padded& g, RowMat& out) {
    out.setZero(static_cast<long>(c), g.len);
    for (std::size_t i = 0; i < c; ++i)
        for (std::size_t y = 0; y < d.h; ++y)
            std::copy_n(src + (i * d.h + y) * d.w, d.w, out.row(static_cast<long>(i)).data() + g.p0 + static_cast<long>(y) * g.wp);
}

// w[:, :, ky, kx] as a [C_out, C_in] matrix.
RowMat tap_matrix(const RealArray& w, const Dims& d, std::size_t ky, std::size_t kx) {
    RowMat t(static_cast<long>(d.cout), static_cast<long>(d.cin));
    for (std::size_t o = 0; o < d.cout; ++o)
        for (std::size_t c = 0; c < d.cin; ++c) t(static_cast<long>(o), static_cast<long>(c)) = w.at(o, c, ky, kx);
    return t;
}

}  // namespace

RealArray conv2d_forward(const RealArray& x, const RealArray& w, const RealArray& bias) {
    const Dims d = check(x, w);
    if (bias.size() != d.cout) throw std::invalid_argument("conv2d bias length does not match output channels");
    const Padded g(d);
    thread_local RowMat xp, acc;
    pad_planes(x.data(), d.cin, d, g, xp);
    acc.resize(static_cast<long>(d.cout), g.n);
    for (std::size_t o = 0; o < d.cout; ++o) acc.row(static_cast<long>(o)).setConstant(bias[o]);
    for (std::size_t ky = 0; ky < d.k; ++ky)
        for (std::size_t kx = 0; kx < d.k; ++kx) {
            const StrideMap xs(xp.data() + g.p0 + g.offset(ky, kx), static_cast<long>(d.cin), g.n, Eigen::OuterStride<>(g.len));
            acc.noalias() += tap_matrix(w, d, ky, kx) * xs;
        }
    RealArray y({d.cout, d.h, d.w});
    for (std::size_t o = 0; o < d.cout; ++o)
        for (std::size_t r = 0; r < d.h; ++r)
            std::copy_n(acc.row(static_cast<long>(o)).data() + static_cast<long>(r) * g.wp, d.w, y.data() + (o * d.h + r) * d.w);
    return y;
}

void conv2d_backward(const RealArray& x, const RealArray& w, const RealArray& dy, RealArray* dx, RealArray* dw,
                     RealArray* dbias) {
    const Dims d = check(x, w);
    if (dy.shape() != Shape{d.cout, d.h, d.w}) throw std::invalid_argument("conv2d output gradient has wrong shape");
    const long hw = static_cast<long>(d.h * d.w);
    if (dbias) {
        // plain loop: Eigen's vectorized sum peels by pointer alignment, which
        // makes the rounding depend on where the allocator put dy
        for (std::size_t o = 0; o < d.cout; ++o) {
            const double* row = dy.data() + o * d.h * d.w;
            double s = 0.0;
            for (long i = 0; i < hw; ++i) s += row[i];
            (*dbias)[o] += s;
        }
    }
    if (!dw && !dx) return;
    const Padded g(d);
    // dy on the run layout, zero at the discarded border positions
    thread_local RowMat dyr, xp, dxp;
    dyr.setZero(static_cast<long>(d.cout), g.n);
    for (std::size_t o = 0; o < d.cout; ++o)
        for (std::size_t r = 0; r < d.h; ++r)
            std::copy_n(dy.data() + (o * d.h + r) * d.w, d.w, dyr.row(static_cast<long>(o)).data() + static_cast<long>(r) * g.wp);
    if (dw) pad_planes(x.data(), d.cin, d, g, xp);
    if (dx) dxp.setZero(static_cast<long>(d.cin), g.len);
    for (std::size_t ky = 0; ky < d.k; ++ky)
        for (std::size_t kx = 0; kx < d.k; ++kx) {
            const long off = g.p0 + g.offset(ky, kx);
            if (dw) {
                const StrideMap xs(xp.data() + off, static_cast<long>(d.cin), g.n, Eigen::OuterStride<>(g.len));
                const RowMat t = dyr * xs.transpose();
                for (std::size_t o = 0; o < d.cout; ++o)
                    for (std::size_t c = 0; c < d.cin; ++c) dw->at(o, c, ky, kx) += t(static_cast<long>(o), static_cast<long>(c));
            }
            if (dx) {
                MutStrideMap ds(dxp.data() + off, static_cast<long>(d.cin), g.n, Eigen::OuterStride<>(g.len));
                ds.noalias() += tap_matrix(w, d, ky, kx).transpose() * dyr;
            }
        }
    if (dx)
        for (std::size_t c = 0; c < d.cin; ++c)
            for (std::size_t r = 0; r < d.h; ++r) {
                const double* s = dxp.row(static_cast<long>(c)).data() + g.p0 + static_cast<long>(r) * g.wp;
                double* t = dx->data() + (c * d.h + r) * d.w;
                for (std::size_t i = 0; i < d.w; ++i) t[i] += s[i];
            }
}

}  // namespace mgre
