#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mgre/rng.hpp"
#include "mgre/signal.hpp"

namespace mgre {

MultiEchoImage::MultiEchoImage(ComplexArray d, std::vector<double> te) : data(std::move(d)), echo_times(std::move(te)) {
    if (data.ndim() != 3) throw std::invalid_argument("MultiEchoImage: expected [N_T, N_y, N_z], got " + shape_string(data.shape()));
    if (echo_times.size() != data.extent(0)) {
        throw std::invalid_argument("MultiEchoImage: " + std::to_string(echo_times.size()) + " echo times for " +
                                    std::to_string(data.extent(0)) + " echoes");
    }
    for (std::size_t j = 0; j < echo_times.size(); ++j) {
        if (!(echo_times[j] > 0.0)) throw std::invalid_argument("MultiEchoImage: echo times must be positive");
        if (j > 0 && !(echo_times[j] > echo_times[j - 1])) {
            throw std::invalid_argument("MultiEchoImage: echo times must be strictly increasing");
        }
    }
}

std::vector<double> uniform_echo_times(std::size_t n, double first, double spacing) {
    std::vector<double> te(n);
    for (std::size_t j = 0; j < n; ++j) te[j] = first + spacing * static_cast<double>(j);
    return te;
}

void validate(const PhantomSpec& spec) {
    if (spec.ellipses.empty()) throw std::invalid_argument("phantom spec has no ellipses");
    if (spec.ny == 0 || spec.nz == 0) throw std::invalid_argument("phantom shape must be positive");
    if (spec.noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
    for (std::size_t i = 0; i < spec.ellipses.size(); ++i) {
        const auto& e = spec.ellipses[i];
        if (e.m0 < 0.0) throw std::invalid_argument("ellipse " + std::to_string(i) + ": m0 must be >= 0");
        if (e.r2star < 0.0) throw std::invalid_argument("ellipse " + std::to_string(i) + ": r2star must be >= 0");
        if (!(e.axis_y > 0.0) || !(e.axis_z > 0.0)) {
            throw std::invalid_argument("ellipse " + std::to_string(i) + ": axes must be positive");
        }
    }
}

namespace {

// Normalized coordinate of grid index i on an axis of n samples.
double coord(std::size_t i, std::size_t n) {
    return (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) / (0.5 * static_cast<double>(n));
}

bool inside(const Ellipse& e, double y, double z) {
    const double th = e.rotation_deg * std::numbers::pi / 180.0;
    const double dy = y - e.center_y, dz = z - e.center_z;
    const double u = dy * std::cos(th) + dz * std::sin(th);
    const double v = -dy * std::sin(th) + dz * std::cos(th);
    return (u * u) / (e.axis_y * e.axis_y) + (v * v) / (e.axis_z * e.axis_z) <= 1.0;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec, const std::vector<double>& echo_times) {
    validate(spec);
    const std::size_t ny = spec.ny, nz = spec.nz, nt = echo_times.size();
    if (nt == 0) throw std::invalid_argument("at least one echo time is required");
    GroundTruthMaps truth{RealArray({ny, nz}), RealArray({ny, nz}), RealArray({ny, nz}), RealArray({ny, nz}),
                          NdArray<int>({ny, nz}, -1)};
    for (std::size_t i = 0; i < ny; ++i) {
        const double y = coord(i, ny);
        for (std::size_t k = 0; k < nz; ++k) {
            const double z = coord(k, nz);
            for (std::size_t e = 0; e < spec.ellipses.size(); ++e) {
                const auto& el = spec.ellipses[e];
                if (!inside(el, y, z)) continue;
                truth.m0.at(i, k) = el.m0;
                truth.r2star.at(i, k) = el.r2star;
                truth.field.at(i, k) = el.field;
                truth.phase.at(i, k) = el.phase;
                truth.label.at(i, k) = static_cast<int>(e);
            }
        }
    }
    ComplexArray data({nt, ny, nz});
    for (std::size_t j = 0; j < nt; ++j) {
        const double te = echo_times[j];
        for (std::size_t v = 0; v < ny * nz; ++v) {
            const double mag = truth.m0[v] * std::exp(-truth.r2star[v] * te);
            const double ph = 2.0 * std::numbers::pi * truth.field[v] * te + truth.phase[v];
            data[j * ny * nz + v] = std::polar(mag, ph);
        }
    }
    return Phantom{MultiEchoImage(std::move(data), echo_times), std::move(truth)};
}

PhantomSpec standard_phantom_spec(std::size_t ny, std::size_t nz) {
    // Shepp-Logan geometry; tissue values loosely follow 3T brain mGRE
    // (scalp, parenchyma, CSF, deep grey nuclei with elevated R2* and field).
    PhantomSpec s;
    s.ny = ny;
    s.nz = nz;
    s.ellipses = {
        {0.0, 0.0, 0.92, 0.69, 0.0, 0.55, 30.0, 0.0, 0.2},
        {0.0184, 0.0, 0.874, 0.6624, 0.0, 0.85, 22.0, 1.0, 0.4},
        {0.0, 0.22, 0.31, 0.11, -18.0, 1.0, 6.0, -3.0, 0.5},
        {0.0, -0.22, 0.41, 0.16, 18.0, 1.0, 6.0, -3.0, 0.5},
        {-0.35, 0.0, 0.25, 0.21, 0.0, 0.75, 28.0, 6.0, 0.3},
        {-0.1, 0.0, 0.046, 0.046, 0.0, 0.6, 55.0, 22.0, 0.4},
        {0.1, 0.0, 0.046, 0.046, 0.0, 0.6, 45.0, -14.0, 0.4},
        {0.605, -0.08, 0.023, 0.046, 0.0, 0.5, 65.0, 28.0, 0.2},
        {0.606, 0.0, 0.023, 0.023, 0.0, 0.5, 40.0, 18.0, 0.2},
        {0.605, 0.06, 0.046, 0.023, 0.0, 0.5, 50.0, -18.0, 0.2},
    };
    return s;
}

PhantomSpec random_phantom_spec(std::size_t ny, std::size_t nz, std::uint64_t seed) {
    Rng rng(seed);
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    PhantomSpec s = standard_phantom_spec(ny, nz);
    const double scale_y = uni(0.85, 1.05), scale_z = uni(0.85, 1.05);
    const double rot = uni(-12.0, 12.0) * std::numbers::pi / 180.0;
    const double shift_y = uni(-0.05, 0.05), shift_z = uni(-0.05, 0.05);
    for (auto& e : s.ellipses) {
        const double y = e.center_y * scale_y, z = e.center_z * scale_z;
        e.center_y = y * std::cos(rot) - z * std::sin(rot) + shift_y;
        e.center_z = y * std::sin(rot) + z * std::cos(rot) + shift_z;
        e.axis_y *= scale_y;
        e.axis_z *= scale_z;
        e.rotation_deg += rot * 180.0 / std::numbers::pi;
        e.m0 *= uni(0.85, 1.15);
        e.r2star *= uni(0.8, 1.2);
        e.field = e.field * uni(0.7, 1.3) + uni(-2.0, 2.0);
        e.phase += uni(-0.3, 0.3);
    }
    // Small lesion- or vessel-like inclusions inside the parenchyma.
    const auto extra = 2 + rng.below(4);
    for (std::uint64_t n = 0; n < extra; ++n) {
        Ellipse e;
        const double r = 0.55 * std::sqrt(rng.uniform());
        const double t = uni(0.0, 2.0 * std::numbers::pi);
        e.center_y = r * std::cos(t) * scale_y + shift_y;
        e.center_z = 0.8 * r * std::sin(t) * scale_z + shift_z;
        e.axis_y = uni(0.03, 0.12);
        e.axis_z = uni(0.03, 0.12);
        e.rotation_deg = uni(0.0, 180.0);
        e.m0 = uni(0.35, 1.0);
        e.r2star = uni(10.0, 80.0);
        e.field = uni(-30.0, 30.0);
        e.phase = uni(0.0, 0.8);
        s.ellipses.push_back(e);
    }
    return s;
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& doc) {
    PhantomSpec s;
    const auto& shape = doc.at("shape");
    s.ny = shape.at(0).get<std::size_t>();
    s.nz = shape.at(1).get<std::size_t>();
    s.noise_sigma = doc.value("noise_sigma", 0.0);
    for (const auto& item : doc.at("ellipses")) {
        Ellipse e;
        e.center_y = item.at("center").at(0).get<double>();
        e.center_z = item.at("center").at(1).get<double>();
        e.axis_y = item.at("axes").at(0).get<double>();
        e.axis_z = item.at("axes").at(1).get<double>();
        e.rotation_deg = item.value("rotation_deg", 0.0);
        e.m0 = item.value("m0", 1.0);
        e.r2star = item.value("r2star", 0.0);
        e.field = item.value("field", 0.0);
        e.phase = item.value("phase", 0.0);
        s.ellipses.push_back(e);
    }
    validate(s);
    return s;
}

nlohmann::json phantom_spec_to_json(const PhantomSpec& spec) {
    nlohmann::json doc;
    doc["shape"] = {spec.ny, spec.nz};
    doc["noise_sigma"] = spec.noise_sigma;
    doc["ellipses"] = nlohmann::json::array();
    for (const auto& e : spec.ellipses) {
        doc["ellipses"].push_back({{"center", {e.center_y, e.center_z}},
                                   {"axes", {e.axis_y, e.axis_z}},
                                   {"rotation_deg", e.rotation_deg},
                                   {"m0", e.m0},
                                   {"r2star", e.r2star},
                                   {"field", e.field},
                                   {"phase", e.phase}});
    }
    return doc;
}

}  // namespace mgre
