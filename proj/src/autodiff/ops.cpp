#include <cmath>
#include <stdexcept>

#include "mgre/autodiff.hpp"
#include "mgre/conv.hpp"
#include "mgre/fft.hpp"
#include "mgre/ssim.hpp"

namespace mgre::ad {

namespace {

Tape& tape_of(Var a) {
    if (!a.valid()) throw std::invalid_argument("operation on an empty Var");
    return *a.tape();
}

void same_tape(Var a, Var b) {
    if (a.tape() != b.tape()) throw std::invalid_argument("operands belong to different tapes");
}

void same_shape(Var a, Var b, const char* op) {
    if (a.shape() != b.shape() || a.is_complex() != b.is_complex()) {
        throw std::invalid_argument(std::string(op) + ": operand mismatch " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
    }
}

template <typename T>
void add_into(NdArray<T>& dst, const NdArray<T>& src, double s = 1.0) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

}  // namespace

Var add(Var a, Var b) {
    same_tape(a, b);
    same_shape(a, b, "add");
    Tape& t = tape_of(a);
    const bool ng = a.needs_grad() || b.needs_grad();
    const auto ia = a.id(), ib = b.id();
    auto bw = [ia, ib](Tape& t, std::size_t self) {
        for (auto i : {ia, ib}) {
            if (!t.needs_grad(i)) continue;
            if (t.is_complex(self)) add_into(t.cplx_grad(i), t.cplx_grad(self));
            else add_into(t.real_grad(i), t.real_grad(self));
        }
    };
    if (a.is_complex()) {
        ComplexArray v = a.cplx();
        add_into(v, b.cplx());
        return t.push(std::move(v), "add", ng, bw);
    }
    RealArray v = a.real();
    add_into(v, b.real());
    return t.push(std::move(v), "add", ng, bw);
}

Var sub(Var a, Var b) {
    same_tape(a, b);
    same_shape(a, b, "sub");
    Tape& t = tape_of(a);
    const bool ng = a.needs_grad() || b.needs_grad();
    const auto ia = a.id(), ib = b.id();
    auto bw = [ia, ib](Tape& t, std::size_t self) {
        if (t.is_complex(self)) {
            if (t.needs_grad(ia)) add_into(t.cplx_grad(ia), t.cplx_grad(self));
            if (t.needs_grad(ib)) add_into(t.cplx_grad(ib), t.cplx_grad(self), -1.0);
        } else {
            if (t.needs_grad(ia)) add_into(t.real_grad(ia), t.real_grad(self));
            if (t.needs_grad(ib)) add_into(t.real_grad(ib), t.real_grad(self), -1.0);
        }
    };
    if (a.is_complex()) {
        ComplexArray v = a.cplx();
        add_into(v, b.cplx(), -1.0);
        return t.push(std::move(v), "sub", ng, bw);
    }
    RealArray v = a.real();
    add_into(v, b.real(), -1.0);
    return t.push(std::move(v), "sub", ng, bw);
}

Var scale(Var a, double s) {
    Tape& t = tape_of(a);
    const auto ia = a.id();
    auto bw = [ia, s](Tape& t, std::size_t self) {
        if (t.is_complex(self)) add_into(t.cplx_grad(ia), t.cplx_grad(self), s);
        else add_into(t.real_grad(ia), t.real_grad(self), s);
    };
    if (a.is_complex()) {
        ComplexArray v = a.cplx();
        for (auto& x : v.values()) x *= s;
        return t.push(std::move(v), "scale", a.needs_grad(), bw);
    }
    RealArray v = a.real();
    for (auto& x : v.values()) x *= s;
    return t.push(std::move(v), "scale", a.needs_grad(), bw);
}

Var relu(Var a) {
    Tape& t = tape_of(a);
    RealArray v = a.real();
    for (auto& x : v.values()) x = x > 0.0 ? x : 0.0;
    const auto ia = a.id();
    return t.push(std::move(v), "relu", a.needs_grad(), [ia](Tape& t, std::size_t self) {
        const auto& x = t.real(ia);
        const auto& g = t.real_grad(self);
        auto& gi = t.real_grad(ia);
        // Subgradient 0 at the kink.
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] > 0.0) gi[i] += g[i];
    });
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat of nothing");
    Tape& t = tape_of(parts.front());
    Shape shape = parts.front().shape();
    const bool cx = parts.front().is_complex();
    std::size_t lead = 0;
    bool ng = false;
    std::vector<std::size_t> ids;
    for (const auto& p : parts) {
        same_tape(parts.front(), p);
        if (p.is_complex() != cx || p.shape().size() != shape.size() ||
            !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
            throw std::invalid_argument("concat: incompatible part " + shape_string(p.shape()));
        }
        lead += p.shape()[0];
        ng = ng || p.needs_grad();
        ids.push_back(p.id());
    }
    shape[0] = lead;
    auto bw = [ids](Tape& t, std::size_t self) {
        std::size_t off = 0;
        for (auto i : ids) {
            const std::size_t n = t.is_complex(i) ? t.cplx(i).size() : t.real(i).size();
            if (t.needs_grad(i)) {
                if (t.is_complex(i)) {
                    auto& g = t.cplx_grad(i);
                    const auto& gs = t.cplx_grad(self);
                    for (std::size_t k = 0; k < n; ++k) g[k] += gs[off + k];
                } else {
                    auto& g = t.real_grad(i);
                    const auto& gs = t.real_grad(self);
                    for (std::size_t k = 0; k < n; ++k) g[k] += gs[off + k];
                }
            }
            off += n;
        }
    };
    if (cx) {
        std::vector<cplx> data;
        for (const auto& p : parts) data.insert(data.end(), p.cplx().values().begin(), p.cplx().values().end());
        return t.push(ComplexArray(shape, std::move(data)), "concat", ng, bw);
    }
    std::vector<double> data;
    for (const auto& p : parts) data.insert(data.end(), p.real().values().begin(), p.real().values().end());
    return t.push(RealArray(shape, std::move(data)), "concat", ng, bw);
}

Var slice(Var a, std::size_t begin, std::size_t count) {
    Tape& t = tape_of(a);
    Shape shape = a.shape();
    if (count == 0 || begin + count > shape[0]) throw std::invalid_argument("slice out of range");
    const std::size_t inner = shape_size(shape) / shape[0];
    shape[0] = count;
    const auto ia = a.id();
    const std::size_t off = begin * inner;
    auto bw = [ia, off](Tape& t, std::size_t self) {
        if (t.is_complex(self)) {
            auto& g = t.cplx_grad(ia);
            const auto& gs = t.cplx_grad(self);
            for (std::size_t k = 0; k < gs.size(); ++k) g[off + k] += gs[k];
        } else {
            auto& g = t.real_grad(ia);
            const auto& gs = t.real_grad(self);
            for (std::size_t k = 0; k < gs.size(); ++k) g[off + k] += gs[k];
        }
    };
    if (a.is_complex()) {
        const auto& v = a.cplx().values();
        return t.push(ComplexArray(shape, std::vector<cplx>(v.begin() + off, v.begin() + off + count * inner)), "slice",
                      a.needs_grad(), bw);
    }
    const auto& v = a.real().values();
    return t.push(RealArray(shape, std::vector<double>(v.begin() + off, v.begin() + off + count * inner)), "slice",
                  a.needs_grad(), bw);
}

Var sum(Var a) {
    Tape& t = tape_of(a);
    double s = 0.0;
    for (double v : a.real().values()) s += v;
    const auto ia = a.id();
    return t.push(RealArray({1}, s), "sum", a.needs_grad(), [ia](Tape& t, std::size_t self) {
        const double g = t.real_grad(self)[0];
        for (auto& v : t.real_grad(ia).values()) v += g;
    });
}

Var conv2d(Var x, Var w, Var b) {
    same_tape(x, w);
    same_tape(x, b);
    Tape& t = tape_of(x);
    RealArray y = conv2d_forward(x.real(), w.real(), b.real());
    const auto ix = x.id(), iw = w.id(), ib = b.id();
    const bool ng = x.needs_grad() || w.needs_grad() || b.needs_grad();
    return t.push(std::move(y), "conv2d", ng, [ix, iw, ib](Tape& t, std::size_t self) {
        conv2d_backward(t.real(ix), t.real(iw), t.real_grad(self), t.needs_grad(ix) ? &t.real_grad(ix) : nullptr,
                        t.needs_grad(iw) ? &t.real_grad(iw) : nullptr, t.needs_grad(ib) ? &t.real_grad(ib) : nullptr);
    });
}

Var to_channels(Var z) {
    Tape& t = tape_of(z);
    const auto& c = z.cplx();
    Shape shape = c.shape();
    const std::size_t n = shape[0], inner = c.size() / n;
    shape[0] = 2 * n;
    RealArray r(shape);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < inner; ++k) {
            r[(2 * j) * inner + k] = c[j * inner + k].real();
            r[(2 * j + 1) * inner + k] = c[j * inner + k].imag();
        }
    const auto iz = z.id();
    return t.push(std::move(r), "to_channels", z.needs_grad(), [iz, n, inner](Tape& t, std::size_t self) {
        const auto& g = t.real_grad(self);
        auto& gz = t.cplx_grad(iz);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < inner; ++k) gz[j * inner + k] += cplx(g[(2 * j) * inner + k], g[(2 * j + 1) * inner + k]);
    });
}

Var from_channels(Var rv) {
    Tape& t = tape_of(rv);
    const auto& r = rv.real();
    Shape shape = r.shape();
    if (shape[0] % 2 != 0) throw std::invalid_argument("from_channels needs an even channel count");
    const std::size_t n = shape[0] / 2, inner = r.size() / shape[0];
    shape[0] = n;
    ComplexArray c(shape);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < inner; ++k) c[j * inner + k] = cplx(r[(2 * j) * inner + k], r[(2 * j + 1) * inner + k]);
    const auto ir = rv.id();
    return t.push(std::move(c), "from_channels", rv.needs_grad(), [ir, n, inner](Tape& t, std::size_t self) {
        const auto& g = t.cplx_grad(self);
        auto& gr = t.real_grad(ir);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < inner; ++k) {
                gr[(2 * j) * inner + k] += g[j * inner + k].real();
                gr[(2 * j + 1) * inner + k] += g[j * inner + k].imag();
            }
    });
}

Var inner_re(Var a, Var b) {
    same_tape(a, b);
    same_shape(a, b, "inner_re");
    Tape& t = tape_of(a);
    const double v = mgre::inner_re(a.cplx().span(), b.cplx().span());
    const auto ia = a.id(), ib = b.id();
    return t.push(RealArray({1}, v), "inner_re", a.needs_grad() || b.needs_grad(), [ia, ib](Tape& t, std::size_t self) {
        const double g = t.real_grad(self)[0];
        // Read both values before touching gradients: ia may equal ib.
        if (t.needs_grad(ia)) add_into(t.cplx_grad(ia), t.cplx(ib), g);
        if (t.needs_grad(ib)) add_into(t.cplx_grad(ib), t.cplx(ia), g);
    });
}

Var div(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tape_of(a);
    const double va = a.real()[0], vb = b.real()[0];
    const auto ia = a.id(), ib = b.id();
    return t.push(RealArray({1}, va / vb), "div", a.needs_grad() || b.needs_grad(), [ia, ib](Tape& t, std::size_t self) {
        const double g = t.real_grad(self)[0], x = t.real(ia)[0], y = t.real(ib)[0];
        if (t.needs_grad(ia)) t.real_grad(ia)[0] += g / y;
        if (t.needs_grad(ib)) t.real_grad(ib)[0] -= g * x / (y * y);
    });
}

namespace {

Var axpy_signed(Var x, Var alpha, Var y, double sign) {
    same_tape(x, y);
    same_tape(x, alpha);
    same_shape(x, y, "axpy");
    Tape& t = tape_of(x);
    const double a = sign * alpha.real()[0];
    ComplexArray v = x.cplx();
    const auto& yv = y.cplx();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += a * yv[i];
    const auto ix = x.id(), ia = alpha.id(), iy = y.id();
    const bool ng = x.needs_grad() || alpha.needs_grad() || y.needs_grad();
    return t.push(std::move(v), sign > 0 ? "axpy" : "axmy", ng, [ix, ia, iy, sign](Tape& t, std::size_t self) {
        const auto& g = t.cplx_grad(self);
        if (t.needs_grad(ix)) add_into(t.cplx_grad(ix), g);
        if (t.needs_grad(iy)) add_into(t.cplx_grad(iy), g, sign * t.real(ia)[0]);
        if (t.needs_grad(ia)) t.real_grad(ia)[0] += sign * mgre::inner_re(t.cplx(iy).span(), g.span());
    });
}

}  // namespace

Var axpy(Var x, Var alpha, Var y) { return axpy_signed(x, alpha, y, 1.0); }
Var axmy(Var x, Var alpha, Var y) { return axpy_signed(x, alpha, y, -1.0); }

namespace {

// q[k] = F(E_k . p) for one echo plane; raw means unshifted and unnormalized.
void coil_spectra(const cplx* p, const CoilSet& coils, std::size_t ny, std::size_t nz, std::vector<cplx>& q, bool raw) {
    const std::size_t plane = ny * nz, nc = coils.count();
    q.resize(nc * plane);
    for (std::size_t k = 0; k < nc; ++k) {
        const cplx* e = coils.maps.data() + k * plane;
        cplx* out = q.data() + k * plane;
        for (std::size_t v = 0; v < plane; ++v) out[v] = e[v] * p[v];
        if (raw)
            fft2_plane_raw(out, ny, nz);
        else
            fft2c_plane(out, ny, nz);
    }
}

void check_mask(Var p, Var mask) {
    if (mask.is_complex() || mask.shape() != p.shape()) {
        throw std::invalid_argument("mask " + shape_string(mask.shape()) + " does not match image " + shape_string(p.shape()));
    }
}

}  // namespace

Var normal_op(Var p, Var mask, const CoilSet& coils) {
    same_tape(p, mask);
    check_mask(p, mask);
    Tape& t = tape_of(p);
    ComplexArray v = mgre::normal(p.cplx(), coils, mask.real());
    const auto ip = p.id(), im = mask.id();
    const CoilSet* cs = &coils;
    return t.push(std::move(v), "normal_op", p.needs_grad() || mask.needs_grad(), [ip, im, cs](Tape& t, std::size_t self) {
        const auto& g = t.cplx_grad(self);
        if (t.needs_grad(ip)) add_into(t.cplx_grad(ip), mgre::normal(g, *cs, t.real(im)));
        if (t.needs_grad(im)) {
            const auto& pv = t.cplx(ip);
            auto& gm = t.real_grad(im);
            const std::size_t nt = pv.extent(0), ny = pv.extent(1), nz = pv.extent(2), plane = ny * nz;
            const auto& mv = t.real(im);
            std::vector<cplx> qp, qg;
            std::vector<double> acc(plane);
            const double scale = 2.0 / static_cast<double>(plane);
            for (std::size_t j = 0; j < nt; ++j) {
                coil_spectra(pv.data() + j * plane, *cs, ny, nz, qp, true);
                coil_spectra(g.data() + j * plane, *cs, ny, nz, qg, true);
                // d/dU of Re<g, E^H F^H U^2 F E p>
                std::fill(acc.begin(), acc.end(), 0.0);
                for (std::size_t k = 0; k < cs->count(); ++k)
                    for (std::size_t v = 0; v < plane; ++v) {
                        const cplx a = qg[k * plane + v], b = qp[k * plane + v];
                        acc[v] += a.real() * b.real() + a.imag() * b.imag();
                    }
                for (std::size_t v = 0; v < plane; ++v) {
                    const std::size_t c = j * plane + centered_index(v, ny, nz);
                    gm[c] += scale * mv[c] * acc[v];
                }
            }
        }
    });
}

Var masked_adjoint(const ComplexArray& b, Var mask, const CoilSet& coils) {
    Tape& t = tape_of(mask);
    ComplexArray v = mgre::adjoint(b, coils, mask.real());
    const auto im = mask.id();
    const CoilSet* cs = &coils;
    const ComplexArray* bp = &b;
    return t.push(std::move(v), "masked_adjoint", mask.needs_grad(), [im, cs, bp](Tape& t, std::size_t self) {
        const auto& g = t.cplx_grad(self);
        auto& gm = t.real_grad(im);
        const std::size_t nt = g.extent(0), ny = g.extent(1), nz = g.extent(2), plane = ny * nz, nc = cs->count();
        std::vector<cplx> qg;
        for (std::size_t j = 0; j < nt; ++j) {
            coil_spectra(g.data() + j * plane, *cs, ny, nz, qg, false);
            for (std::size_t k = 0; k < nc; ++k) {
                const cplx* bk = bp->data() + (j * nc + k) * plane;
                for (std::size_t v = 0; v < plane; ++v) {
                    const cplx a = qg[k * plane + v];
                    gm[j * plane + v] += a.real() * bk[v].real() + a.imag() * bk[v].imag();
                }
            }
        }
    });
}

Var prob_pattern(Var w, double slope, double gamma, SpoMode mode) {
    Tape& t = tape_of(w);
    PatternWeights pw{w.real(), slope, gamma, mode};
    RealArray p = build_prob_pattern(pw).p;
    const auto iw = w.id();
    return t.push(std::move(p), "prob_pattern", w.needs_grad(), [iw, slope, gamma, mode](Tape& t, std::size_t self) {
        PatternWeights pw{t.real(iw), slope, gamma, mode};
        add_into(t.real_grad(iw), straight_through_grad(t.real_grad(self), pw));
    });
}

Var straight_through(Var p, const RealArray& binary) {
    Tape& t = tape_of(p);
    if (binary.shape() != p.shape()) throw std::invalid_argument("binary mask does not match probability pattern");
    const auto ip = p.id();
    return t.push(RealArray(binary), "straight_through", p.needs_grad(), [ip](Tape& t, std::size_t self) {
        add_into(t.real_grad(ip), t.real_grad(self));
    });
}

Var ssim_sum(Var x, const RealArray& ref, std::size_t window, double c1, double c2) {
    Tape& t = tape_of(x);
    const auto& xv = x.real();
    if (xv.shape() != ref.shape() || xv.ndim() != 3) {
        throw std::invalid_argument("ssim_sum: prediction " + shape_string(xv.shape()) + " vs reference " +
                                    shape_string(ref.shape()));
    }
    const std::size_t nch = xv.extent(0), h = xv.extent(1), w = xv.extent(2);
    const SsimParams params{window, c1, c2};
    double total = 0.0;
    for (std::size_t c = 0; c < nch; ++c) {
        RealArray a({h, w}, std::vector<double>(xv.slab(c).begin(), xv.slab(c).end()));
        RealArray b({h, w}, std::vector<double>(ref.slab(c).begin(), ref.slab(c).end()));
        total += ssim_map(a, b, params);
    }
    const auto ix = x.id();
    return t.push(RealArray({1}, total), "ssim_sum", x.needs_grad(), [ix, ref, params, nch, h, w](Tape& t, std::size_t self) {
        const double g = t.real_grad(self)[0];
        const auto& xv = t.real(ix);
        auto& gx = t.real_grad(ix);
        for (std::size_t c = 0; c < nch; ++c) {
            RealArray a({h, w}, std::vector<double>(xv.slab(c).begin(), xv.slab(c).end()));
            RealArray b({h, w}, std::vector<double>(ref.slab(c).begin(), ref.slab(c).end()));
            const RealArray d = ssim_grad(a, b, params);
            auto dst = gx.slab(c);
            for (std::size_t k = 0; k < d.size(); ++k) dst[k] += g * d[k];
        }
    });
}

Var opaque(Var x, const std::function<ComplexArray(const ComplexArray&)>& fn, std::string name) {
    Tape& t = tape_of(x);
    if (x.needs_grad()) throw std::invalid_argument("'" + name + "' is not differentiable but its input requires gradients");
    return t.push(fn(x.cplx()), std::move(name), false, {});
}

}  // namespace mgre::ad
