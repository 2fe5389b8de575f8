#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mgre/fft.hpp"
#include "mgre/rng.hpp"
#include "mgre/signal.hpp"

namespace mgre {

CoilSet generate_coils(std::size_t n_coils, std::size_t ny, std::size_t nz, std::uint64_t seed) {
    if (n_coils == 0) throw std::invalid_argument("n_coils must be >= 1");
    Rng rng(seed);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    ComplexArray maps({n_coils, ny, nz});
    // Gaussian bumps centred on a ring outside the FOV, with linear phase.
    for (std::size_t c = 0; c < n_coils; ++c) {
        const double angle = 2.0 * std::numbers::pi * (static_cast<double>(c) + uni(-0.2, 0.2)) / n_coils;
        const double radius = uni(1.0, 1.4);
        const double cy = radius * std::cos(angle), cz = radius * std::sin(angle);
        const double width = uni(0.7, 1.1);
        const double p0 = uni(-std::numbers::pi, std::numbers::pi);
        const double py = uni(-1.5, 1.5), pz = uni(-1.5, 1.5);
        for (std::size_t i = 0; i < ny; ++i) {
            const double y = (static_cast<double>(i) - 0.5 * (ny - 1.0)) / (0.5 * ny);
            for (std::size_t k = 0; k < nz; ++k) {
                const double z = (static_cast<double>(k) - 0.5 * (nz - 1.0)) / (0.5 * nz);
                const double d2 = (y - cy) * (y - cy) + (z - cz) * (z - cz);
                maps.at(c, i, k) = std::polar(std::exp(-d2 / (2.0 * width * width)), p0 + py * y + pz * z);
            }
        }
    }
    const std::size_t plane = ny * nz;
    for (std::size_t v = 0; v < plane; ++v) {
        double ss = 0.0;
        for (std::size_t c = 0; c < n_coils; ++c) ss += std::norm(maps[c * plane + v]);
        const double inv = 1.0 / std::sqrt(ss);
        for (std::size_t c = 0; c < n_coils; ++c) maps[c * plane + v] *= inv;
    }
    return CoilSet{std::move(maps)};
}

namespace {

void check_image_and_masks(const ComplexArray& x, const CoilSet& coils, const RealArray& masks) {
    if (x.ndim() != 3) throw std::invalid_argument("image must be [N_T, N_y, N_z], got " + shape_string(x.shape()));
    if (coils.maps.ndim() != 3 || coils.maps.extent(1) != x.extent(1) || coils.maps.extent(2) != x.extent(2)) {
        throw std::invalid_argument("coil maps " + shape_string(coils.maps.shape()) + " do not match image " +
                                    shape_string(x.shape()));
    }
    if (masks.shape() != x.shape()) {
        throw std::invalid_argument("masks " + shape_string(masks.shape()) + " do not match image " +
                                    shape_string(x.shape()));
    }
}

}  // namespace

ComplexArray encode(const ComplexArray& x, const CoilSet& coils, const RealArray& masks) {
    check_image_and_masks(x, coils, masks);
    const std::size_t nt = x.extent(0), nc = coils.count(), ny = x.extent(1), nz = x.extent(2), plane = ny * nz;
    ComplexArray b({nt, nc, ny, nz});
    for (std::size_t j = 0; j < nt; ++j) {
        const cplx* s = x.data() + j * plane;
        const double* u = masks.data() + j * plane;
        for (std::size_t k = 0; k < nc; ++k) {
            cplx* out = b.data() + (j * nc + k) * plane;
            const cplx* e = coils.maps.data() + k * plane;
            for (std::size_t v = 0; v < plane; ++v) out[v] = e[v] * s[v];
            fft2c_plane(out, ny, nz);
            for (std::size_t v = 0; v < plane; ++v) out[v] *= u[v];
        }
    }
    return b;
}

KSpaceData encode(const MultiEchoImage& x, const CoilSet& coils, const RealArray& masks) {
    return KSpaceData{encode(x.data, coils, masks)};
}

ComplexArray adjoint(const ComplexArray& b, const CoilSet& coils, const RealArray& masks) {
    if (b.ndim() != 4) throw std::invalid_argument("k-space must be [N_T, N_C, N_y, N_z], got " + shape_string(b.shape()));
    const std::size_t nt = b.extent(0), nc = b.extent(1), ny = b.extent(2), nz = b.extent(3), plane = ny * nz;
    if (coils.maps.shape() != Shape{nc, ny, nz}) {
        throw std::invalid_argument("coil maps " + shape_string(coils.maps.shape()) + " do not match k-space " +
                                    shape_string(b.shape()));
    }
    if (masks.shape() != Shape{nt, ny, nz}) {
        throw std::invalid_argument("masks " + shape_string(masks.shape()) + " do not match k-space " +
                                    shape_string(b.shape()));
    }
    ComplexArray x({nt, ny, nz});
    std::vector<cplx> tmp(plane);
    for (std::size_t j = 0; j < nt; ++j) {
        const double* u = masks.data() + j * plane;
        cplx* out = x.data() + j * plane;
        for (std::size_t k = 0; k < nc; ++k) {
            const cplx* in = b.data() + (j * nc + k) * plane;
            for (std::size_t v = 0; v < plane; ++v) tmp[v] = in[v] * u[v];
            ifft2c_plane(tmp.data(), ny, nz);
            const cplx* e = coils.maps.data() + k * plane;
            for (std::size_t v = 0; v < plane; ++v) out[v] += std::conj(e[v]) * tmp[v];
        }
    }
    return x;
}

ComplexArray adjoint(const KSpaceData& b, const CoilSet& coils, const RealArray& masks) {
    return adjoint(b.data, coils, masks);
}

ComplexArray normal(const ComplexArray& x, const CoilSet& coils, const RealArray& masks) {
    check_image_and_masks(x, coils, masks);
    const std::size_t nt = x.extent(0), nc = coils.count(), ny = x.extent(1), nz = x.extent(2), plane = ny * nz;
    ComplexArray out({nt, ny, nz});
    std::vector<cplx> tmp(plane);
    std::vector<double> u2(plane);
    const double scale = 1.0 / static_cast<double>(plane);
    for (std::size_t j = 0; j < nt; ++j) {
        const cplx* s = x.data() + j * plane;
        const double* u = masks.data() + j * plane;
        cplx* o = out.data() + j * plane;
        for (std::size_t v = 0; v < plane; ++v) {
            const double m = u[centered_index(v, ny, nz)];
            u2[v] = m * m * scale;
        }
        for (std::size_t k = 0; k < nc; ++k) {
            const cplx* e = coils.maps.data() + k * plane;
            for (std::size_t v = 0; v < plane; ++v) tmp[v] = e[v] * s[v];
            fft2_plane_raw(tmp.data(), ny, nz);
            for (std::size_t v = 0; v < plane; ++v) tmp[v] *= u2[v];
            ifft2_plane_raw(tmp.data(), ny, nz);
            for (std::size_t v = 0; v < plane; ++v) o[v] += std::conj(e[v]) * tmp[v];
        }
    }
    return out;
}

KSpaceData add_noise(const KSpaceData& b, double sigma, std::uint64_t seed, const RealArray& masks) {
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    KSpaceData out = b;
    if (sigma == 0.0) return out;
    const auto& shape = b.data.shape();
    const bool masked = !masks.empty();
    std::size_t nc = 1, plane = 1;
    if (masked) {
        if (shape.size() != 4 || masks.shape() != Shape{shape[0], shape[2], shape[3]}) {
            throw std::invalid_argument("noise masks " + shape_string(masks.shape()) + " do not match k-space " +
                                        shape_string(shape));
        }
        nc = shape[1];
        plane = shape[2] * shape[3];
    }
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        if (masked) {
            const std::size_t j = i / (nc * plane), v = i % plane;
            if (masks[j * plane + v] == 0.0) continue;
        }
        double re, im;
        Rng::normal_pair_at(seed, i, re, im);
        out.data[i] += cplx(sigma * re, sigma * im);
    }
    return out;
}

RealArray full_masks(std::size_t echoes, std::size_t ny, std::size_t nz) { return RealArray({echoes, ny, nz}, 1.0); }

double noise_sigma_for_snr(const KSpaceData& b, double snr_db) {
    if (b.data.empty()) throw std::invalid_argument("noise_sigma_for_snr: empty k-space");
    const double norm = norm2(b.data.span());
    return norm / std::sqrt(2.0 * static_cast<double>(b.data.size())) * std::pow(10.0, -snr_db / 20.0);
}

}  // namespace mgre
