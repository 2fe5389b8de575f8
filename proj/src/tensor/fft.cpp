#include "mgre/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace mgre {

namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per geometry and kept for the process.
class PlanCache {
public:
    using Key = std::tuple<int, std::size_t, std::size_t, std::size_t, int>;  // rank, n0, n1, stride, sign

    fftw_plan get(const Key& key) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        const auto [rank, n0, n1, stride, sign] = key;
        const std::size_t total = rank == 1 ? n0 * stride : n0 * n1;
        auto* buf = fftw_alloc_complex(total);
        fftw_plan plan;
        // 2-D plans only ever run on the SIMD-aligned scratch buffer.
        const unsigned flags = rank == 1 ? FFTW_ESTIMATE | FFTW_UNALIGNED : FFTW_ESTIMATE;
        if (rank == 1) {
            int n = static_cast<int>(n0);
            plan = fftw_plan_many_dft(1, &n, static_cast<int>(stride), buf, nullptr, static_cast<int>(stride), 1, buf,
                                      nullptr, static_cast<int>(stride), 1, sign, flags);
        } else {
            plan = fftw_plan_dft_2d(static_cast<int>(n0), static_cast<int>(n1), buf, buf, sign, flags);
        }
        fftw_free(buf);
        if (!plan) throw std::runtime_error("fftw planning failed");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<Key, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

// Centered transform of one axis: ifftshift, DFT, fftshift, unitary scaling.
void transform_axis(ComplexArray& x, std::size_t axis, int sign) {
    const auto& shape = x.shape();
    const std::size_t n = shape[axis];
    std::size_t inner = 1, outer = 1;
    for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
    for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
    const std::size_t half = n / 2;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    fftw_plan plan = cache().get({1, n, 0, inner, sign});
    std::vector<cplx> buf(n * inner);
    for (std::size_t o = 0; o < outer; ++o) {
        cplx* base = x.data() + o * n * inner;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t src = (i + half) % n;
            std::copy_n(base + src * inner, inner, buf.data() + i * inner);
        }
        fftw_execute_dft(plan, as_fftw(buf.data()), as_fftw(buf.data()));
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t dst = (i + half) % n;
            cplx* d = base + dst * inner;
            const cplx* s = buf.data() + i * inner;
            for (std::size_t k = 0; k < inner; ++k) d[k] = s[k] * scale;
        }
    }
}

ComplexArray transform(const ComplexArray& x, const std::vector<std::size_t>& axes, int sign) {
    for (auto a : axes) {
        if (a >= x.ndim()) {
            throw std::invalid_argument("fft axis " + std::to_string(a) + " out of range for shape " +
                                        shape_string(x.shape()));
        }
    }
    ComplexArray out = x;
    for (auto a : axes) transform_axis(out, a, sign);
    return out;
}

struct AlignedBuffer {
    fftw_complex* data = nullptr;
    std::size_t size = 0;
    ~AlignedBuffer() { fftw_free(data); }
    cplx* get(std::size_t n) {
        if (n > size) {
            fftw_free(data);
            data = fftw_alloc_complex(n);
            size = n;
        }
        return reinterpret_cast<cplx*>(data);
    }
};

// dst[j] = src[(j + shift) % w]
void rotate_row(const cplx* src, cplx* dst, std::size_t w, std::size_t shift) {
    std::copy(src + shift, src + w, dst);
    std::copy(src, src + shift, dst + (w - shift));
}

void transform_plane(cplx* plane, std::size_t h, std::size_t w, int sign) {
    fftw_plan plan = cache().get({2, h, w, 0, sign});
    thread_local AlignedBuffer storage;
    cplx* buf = storage.get(h * w);
    const std::size_t hh = h / 2, hw = w / 2;
    for (std::size_t i = 0; i < h; ++i) rotate_row(plane + ((i + hh) % h) * w, buf + i * w, w, hw);
    fftw_execute_dft(plan, as_fftw(buf), as_fftw(buf));
    const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
    // inverse rotation: plane[(i + hh) % h][(j + hw) % w] = buf[i][j]
    const std::size_t back = w - hw;
    for (std::size_t i = 0; i < h; ++i) {
        const cplx* src = buf + i * w;
        cplx* dst = plane + ((i + hh) % h) * w;
        for (std::size_t j = 0; j < back; ++j) dst[j + hw] = src[j] * scale;
        for (std::size_t j = back; j < w; ++j) dst[j - back] = src[j] * scale;
    }
}

void transform_plane_raw(cplx* plane, std::size_t h, std::size_t w, int sign) {
    fftw_plan plan = cache().get({2, h, w, 0, sign});
    if (fftw_alignment_of(reinterpret_cast<double*>(plane)) == 0) {
        fftw_execute_dft(plan, as_fftw(plane), as_fftw(plane));
        return;
    }
    thread_local AlignedBuffer storage;
    cplx* buf = storage.get(h * w);
    std::copy_n(plane, h * w, buf);
    fftw_execute_dft(plan, as_fftw(buf), as_fftw(buf));
    std::copy_n(buf, h * w, plane);
}

void transform_trailing(ComplexArray& x, int sign) {
    if (x.ndim() < 2) throw std::invalid_argument("fft2c needs at least two axes, got " + shape_string(x.shape()));
    const std::size_t h = x.extent(x.ndim() - 2), w = x.extent(x.ndim() - 1);
    const std::size_t planes = x.size() / (h * w);
    for (std::size_t p = 0; p < planes; ++p) transform_plane(x.data() + p * h * w, h, w, sign);
}

}  // namespace

ComplexArray fft_centered(const ComplexArray& x, const std::vector<std::size_t>& axes) {
    return transform(x, axes, FFTW_FORWARD);
}

ComplexArray ifft_centered(const ComplexArray& x, const std::vector<std::size_t>& axes) {
    return transform(x, axes, FFTW_BACKWARD);
}

void fft2c_inplace(ComplexArray& x) { transform_trailing(x, FFTW_FORWARD); }
void ifft2c_inplace(ComplexArray& x) { transform_trailing(x, FFTW_BACKWARD); }
void fft2c_plane(cplx* plane, std::size_t h, std::size_t w) { transform_plane(plane, h, w, FFTW_FORWARD); }
void ifft2c_plane(cplx* plane, std::size_t h, std::size_t w) { transform_plane(plane, h, w, FFTW_BACKWARD); }
void fft2_plane_raw(cplx* plane, std::size_t h, std::size_t w) { transform_plane_raw(plane, h, w, FFTW_FORWARD); }
void ifft2_plane_raw(cplx* plane, std::size_t h, std::size_t w) { transform_plane_raw(plane, h, w, FFTW_BACKWARD); }

std::size_t centered_index(std::size_t raw, std::size_t h, std::size_t w) {
    const std::size_t i = raw / w, j = raw % w;
    return ((i + h / 2) % h) * w + (j + w / 2) % w;
}

}  // namespace mgre
