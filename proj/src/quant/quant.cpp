#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "mgre/metf.hpp"
#include "mgre/quant.hpp"

namespace mgre {

namespace {

void require_plane(const RealArray& a, const char* what) {
    if (a.ndim() != 2) throw std::invalid_argument(std::string(what) + " must be a 2-D image");
}

RealArray first_echo_validity(const ComplexArray& x, double threshold) {
    const std::size_t ny = x.extent(1), nz = x.extent(2), plane = ny * nz;
    double peak = 0.0;
    for (std::size_t i = 0; i < plane; ++i) peak = std::max(peak, std::abs(x[i]));
    RealArray valid({ny, nz}, 0.0);
    for (std::size_t i = 0; i < plane; ++i) {
        const double m = std::abs(x[i]);
        valid[i] = (m > 0.0 && m > threshold * peak) ? 1.0 : 0.0;
    }
    return valid;
}

void require_echoes(const MultiEchoImage& x) {
    if (x.echoes() < 2) throw std::invalid_argument("fit needs at least 2 echoes");
}

}  // namespace

RealArray echo_combine(const ComplexArray& x) {
    if (x.ndim() != 3) throw std::invalid_argument("echo_combine expects [N_T, N_y, N_z]");
    const std::size_t n = x.extent(0), plane = x.size() / n;
    RealArray out({x.extent(1), x.extent(2)}, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < plane; ++i) out[i] += std::norm(x[j * plane + i]);
    }
    for (auto& v : out) v = std::sqrt(v);
    return out;
}

RealArray echo_combine(const MultiEchoImage& x) { return echo_combine(x.data); }

RealArray fit_r2star(const MultiEchoImage& x, const FitOptions& opt, RealArray* valid) {
    require_echoes(x);
    const std::size_t n = x.echoes(), plane = x.ny() * x.nz();
    RealArray ok = first_echo_validity(x.data, opt.magnitude_threshold);
    RealArray out({x.ny(), x.nz()}, 0.0);
    double tbar = 0.0;
    for (double t : x.echo_times) tbar += t;
    tbar /= static_cast<double>(n);
    double stt = 0.0;
    for (double t : x.echo_times) stt += (t - tbar) * (t - tbar);
    for (std::size_t i = 0; i < plane; ++i) {
        if (ok[i] == 0.0) continue;
        double sty = 0.0;
        bool finite = true;
        for (std::size_t j = 0; j < n; ++j) {
            const double m = std::abs(x.data[j * plane + i]);
            if (!(m > 0.0)) {
                finite = false;
                break;
            }
            sty += (x.echo_times[j] - tbar) * (-std::log(m));
        }
        if (!finite) {
            ok[i] = 0.0;
            continue;
        }
        out[i] = std::max(0.0, sty / stt);
    }
    if (valid) *valid = std::move(ok);
    return out;
}

RealArray fit_field(const MultiEchoImage& x, const FitOptions& opt, RealArray* valid) {
    require_echoes(x);
    const std::size_t n = x.echoes(), plane = x.ny() * x.nz();
    RealArray ok = first_echo_validity(x.data, opt.magnitude_threshold);
    RealArray out({x.ny(), x.nz()}, 0.0);
    std::vector<double> phi(n), w(n);
    for (std::size_t i = 0; i < plane; ++i) {
        if (ok[i] == 0.0) continue;
        phi[0] = 0.0;
        w[0] = std::abs(x.data[i]);
        bool wrapped = false;
        for (std::size_t j = 1; j < n; ++j) {
            const cplx cur = x.data[j * plane + i];
            const double step = std::arg(cur * std::conj(x.data[(j - 1) * plane + i]));
            if (std::abs(step) >= opt.max_phase_step) wrapped = true;
            phi[j] = phi[j - 1] + step;
            w[j] = std::abs(cur);
        }
        double sw = 0.0, st = 0.0, sp = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            sw += w[j];
            st += w[j] * x.echo_times[j];
            sp += w[j] * phi[j];
        }
        const double tbar = st / sw, pbar = sp / sw;
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            num += w[j] * (x.echo_times[j] - tbar) * (phi[j] - pbar);
            den += w[j] * (x.echo_times[j] - tbar) * (x.echo_times[j] - tbar);
        }
        out[i] = den > 0.0 ? num / den / (2.0 * std::numbers::pi) : 0.0;
        if (wrapped || !(den > 0.0)) ok[i] = 0.0;
    }
    if (valid) *valid = std::move(ok);
    return out;
}

QuantMaps quant_maps(const MultiEchoImage& x, const FitOptions& opt) {
    QuantMaps q;
    q.magnitude = echo_combine(x);
    q.r2star = fit_r2star(x, opt, &q.r2star_valid);
    q.field = fit_field(x, opt, &q.field_valid);
    return q;
}

RealArray log_kernel(std::size_t size, double sigma) {
    if (size == 0 || size % 2 == 0) throw std::invalid_argument("LoG kernel size must be odd");
    if (!(sigma > 0.0)) throw std::invalid_argument("LoG sigma must be > 0");
    const int h = static_cast<int>(size / 2);
    RealArray g({size, size});
    double gsum = 0.0;
    for (int y = -h; y <= h; ++y) {
        for (int x = -h; x <= h; ++x) {
            const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
            g.at(y + h, x + h) = v;
            gsum += v;
        }
    }
    RealArray k({size, size});
    double ksum = 0.0;
    const double s4 = std::pow(sigma, 4);
    for (int y = -h; y <= h; ++y) {
        for (int x = -h; x <= h; ++x) {
            const double v = g.at(y + h, x + h) / gsum * (x * x + y * y - 2.0 * sigma * sigma) / s4;
            k.at(y + h, x + h) = v;
            ksum += v;
        }
    }
    const double mean = ksum / static_cast<double>(k.size());
    for (auto& v : k) v -= mean;
    return k;
}

RealArray filter_same(const RealArray& img, const RealArray& kernel) {
    require_plane(img, "image");
    require_plane(kernel, "kernel");
    const long H = static_cast<long>(img.extent(0)), W = static_cast<long>(img.extent(1));
    const long kh = static_cast<long>(kernel.extent(0)), kw = static_cast<long>(kernel.extent(1));
    const long oy = kh / 2, ox = kw / 2;
    RealArray out(img.shape(), 0.0);
    for (long y = 0; y < H; ++y) {
        for (long x = 0; x < W; ++x) {
            double acc = 0.0;
            for (long dy = 0; dy < kh; ++dy) {
                const long yy = y + dy - oy;
                if (yy < 0 || yy >= H) continue;
                for (long dx = 0; dx < kw; ++dx) {
                    const long xx = x + dx - ox;
                    if (xx < 0 || xx >= W) continue;
                    acc += kernel[dy * kw + dx] * img[yy * W + xx];
                }
            }
            out[y * W + x] = acc;
        }
    }
    return out;
}

MetricEntry compute_metrics(const RealArray& x, const RealArray& ref, const std::string& map, const SsimParams& ssim) {
    require_plane(ref, "reference");
    if (x.shape() != ref.shape()) {
        throw std::invalid_argument("metrics: shape " + shape_string(x.shape()) + " vs " + shape_string(ref.shape()));
    }
    double ref_norm2 = 0.0, err2 = 0.0, peak = -std::numeric_limits<double>::infinity(), abs_peak = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        ref_norm2 += ref[i] * ref[i];
        err2 += (x[i] - ref[i]) * (x[i] - ref[i]);
        peak = std::max(peak, ref[i]);
        abs_peak = std::max(abs_peak, std::abs(ref[i]));
    }
    if (!(ref_norm2 > 0.0)) throw std::invalid_argument("metrics: reference has zero norm");

    MetricEntry m;
    m.map = map;
    const double rms = std::sqrt(err2 / static_cast<double>(ref.size()));
    m.psnr = rms > 0.0 ? 20.0 * std::log10(peak / rms) : std::numeric_limits<double>::infinity();
    m.rmse = 100.0 * std::sqrt(err2) / std::sqrt(ref_norm2);

    RealArray xs = x, rs = ref;
    for (auto& v : xs) v /= abs_peak;
    for (auto& v : rs) v /= abs_peak;
    m.ssim = ssim_map(xs, rs, ssim);

    const RealArray k = log_kernel();
    const RealArray lx = filter_same(x, k), lr = filter_same(ref, k);
    double dn = 0.0, rn = 0.0;
    for (std::size_t i = 0; i < lr.size(); ++i) {
        dn += (lx[i] - lr[i]) * (lx[i] - lr[i]);
        rn += lr[i] * lr[i];
    }
    if (!(rn > 0.0)) throw std::invalid_argument("metrics: reference has no high-frequency content");
    m.hfen = 100.0 * std::sqrt(dn) / std::sqrt(rn);
    return m;
}

namespace {

std::string number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    return number(v);
}

}  // namespace

std::string MetricReport::to_csv() const {
    std::string s = "map,psnr,ssim,rmse,hfen\n";
    for (const auto& e : entries) {
        s += e.map + "," + number(e.psnr) + "," + number(e.ssim) + "," + number(e.rmse) + "," + number(e.hfen) + "\n";
    }
    return s;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries) {
        arr.push_back({{"map", e.map},
                       {"psnr", json_number(e.psnr)},
                       {"ssim", json_number(e.ssim)},
                       {"rmse", json_number(e.rmse)},
                       {"hfen", json_number(e.hfen)}});
    }
    return nlohmann::json{{"metrics", arr}};
}

std::pair<double, double> roi_stats(const RealArray& map, const RealArray& mask) {
    if (map.shape() != mask.shape()) throw std::invalid_argument("roi_stats: mask shape mismatch");
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (mask[i] != 0.0) {
            s += map[i];
            ++n;
        }
    }
    if (n == 0) throw std::invalid_argument("roi_stats: empty mask");
    const double mean = s / static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (mask[i] != 0.0) v += (map[i] - mean) * (map[i] - mean);
    }
    return {mean, std::sqrt(v / static_cast<double>(n))};
}

double sharpness(const RealArray& map, const RealArray& roi) {
    require_plane(map, "map");
    if (map.shape() != roi.shape()) throw std::invalid_argument("sharpness: roi shape mismatch");
    const long H = static_cast<long>(map.extent(0)), W = static_cast<long>(map.extent(1));
    RealArray ring(map.shape(), 0.0);
    bool any = false;
    for (long y = 0; y < H; ++y) {
        for (long x = 0; x < W; ++x) {
            if (roi[y * W + x] == 0.0) continue;
            any = true;
            if (y == 0 || x == 0 || y == H - 1 || x == W - 1) {
                throw std::invalid_argument("sharpness: roi touches the image border");
            }
            for (long dy = -1; dy <= 1; ++dy) {
                for (long dx = -1; dx <= 1; ++dx) {
                    const long k = (y + dy) * W + (x + dx);
                    if (roi[k] == 0.0) ring[k] = 1.0;
                }
            }
        }
    }
    if (!any) throw std::invalid_argument("sharpness: empty roi");
    bool ring_any = false;
    for (double v : ring) ring_any = ring_any || v != 0.0;
    if (!ring_any) throw std::invalid_argument("sharpness: dilation leaves an empty border set");
    return roi_stats(map, roi).first - roi_stats(map, ring).first;
}

std::string to_pgm(const RealArray& img, double lo, double hi) {
    require_plane(img, "image");
    if (!(hi > lo)) throw std::invalid_argument("pgm window needs hi > lo");
    std::string s = "P5\n" + std::to_string(img.extent(1)) + " " + std::to_string(img.extent(0)) + "\n255\n";
    for (double v : img) {
        const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        s.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
    }
    return s;
}

void write_pgm(const std::filesystem::path& path, const RealArray& img, double lo, double hi) {
    write_file_atomic(path, to_pgm(img, lo, hi));
}

}  // namespace mgre
