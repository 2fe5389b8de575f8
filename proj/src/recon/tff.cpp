#include <cmath>
#include <stdexcept>

#include "mgre/recon.hpp"
#include "mgre/rng.hpp"

namespace mgre {

void TffArchitecture::validate() const {
    if (echoes == 0) throw std::invalid_argument("tff: echoes must be >= 1");
    if (hidden == 0 || width == 0) throw std::invalid_argument("tff: hidden and width channels must be >= 1");
    if (layers < 2) throw std::invalid_argument("tff: the denoiser stack needs at least 2 conv layers");
    if (kernel % 2 == 0) throw std::invalid_argument("tff: kernel size must be odd");
}

namespace {

struct LayerSpec {
    std::string name;
    std::size_t cout, cin;
};

std::vector<LayerSpec> layer_specs(const TffArchitecture& a) {
    a.validate();
    std::vector<LayerSpec> specs{{"ns0", a.hidden, 2}};
    if (a.recurrent) specs.push_back({"nh", a.hidden, a.hidden});
    else specs.push_back({"ns1", a.hidden, a.hidden});
    specs.push_back({"d0", a.width, a.echoes * a.hidden});
    for (std::size_t l = 1; l + 1 < a.layers; ++l) specs.push_back({"d" + std::to_string(l), a.width, a.width});
    specs.push_back({"d" + std::to_string(a.layers - 1), 2 * a.echoes, a.width});
    return specs;
}

}  // namespace

TffWeights TffWeights::zeros(const TffArchitecture& arch) {
    TffWeights w;
    w.arch = arch;
    for (const auto& s : layer_specs(arch)) {
        w.layers.push_back({s.name, RealArray({s.cout, s.cin, arch.kernel, arch.kernel}, 0.0), RealArray({s.cout}, 0.0)});
    }
    return w;
}

TffWeights TffWeights::random(const TffArchitecture& arch, std::uint64_t seed, WeightInit init, double noise) {
    TffWeights w = zeros(arch);
    Rng rng(seed);
    const bool identity = init == WeightInit::NearIdentity && arch.hidden >= 4 && arch.width >= 4 * arch.echoes;
    const double amp = identity ? noise : 1.0;
    for (auto& layer : w.layers) {
        const double fan_in = static_cast<double>(layer.weight.extent(1) * arch.kernel * arch.kernel);
        const double std_he = std::sqrt(2.0 / fan_in);
        for (auto& v : layer.weight.values()) v = amp * std_he * rng.normal();
    }
    if (!identity) return w;

    const std::size_t c = arch.kernel / 2;
    auto tap = [&](const std::string& name, std::size_t o, std::size_t i, double v) {
        for (auto& l : w.layers)
            if (l.name == name) l.weight.at(o, i, c, c) += v;
    };
    // Hidden channels 0..3 carry (+re, -re, +im, -im) of the echo.
    tap("ns0", 0, 0, 1.0);
    tap("ns0", 1, 0, -1.0);
    tap("ns0", 2, 1, 1.0);
    tap("ns0", 3, 1, -1.0);
    if (!arch.recurrent)
        for (std::size_t q = 0; q < 4; ++q) tap("ns1", q, q, 1.0);
    for (std::size_t j = 0; j < arch.echoes; ++j)
        for (std::size_t q = 0; q < 4; ++q) tap("d0", 4 * j + q, j * arch.hidden + q, 1.0);
    for (std::size_t l = 1; l + 1 < arch.layers; ++l)
        for (std::size_t q = 0; q < 4 * arch.echoes; ++q) tap("d" + std::to_string(l), q, q, 1.0);
    const std::string last = "d" + std::to_string(arch.layers - 1);
    for (std::size_t j = 0; j < arch.echoes; ++j) {
        tap(last, 2 * j, 4 * j, 1.0);
        tap(last, 2 * j, 4 * j + 1, -1.0);
        tap(last, 2 * j + 1, 4 * j + 2, 1.0);
        tap(last, 2 * j + 1, 4 * j + 3, -1.0);
    }
    return w;
}

const ConvLayer& TffWeights::layer(const std::string& name) const {
    for (const auto& l : layers)
        if (l.name == name) return l;
    throw std::invalid_argument("tff weights have no layer '" + name + "'");
}

std::size_t TffWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
}

void TffWeights::check() const {
    const auto specs = layer_specs(arch);
    if (specs.size() != layers.size()) throw std::invalid_argument("tff weights: wrong number of layers");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        const auto& l = layers[i];
        if (l.name != s.name || l.weight.shape() != Shape{s.cout, s.cin, arch.kernel, arch.kernel} ||
            l.bias.shape() != Shape{s.cout}) {
            throw std::invalid_argument("tff weights: layer '" + l.name + "' has shape " + shape_string(l.weight.shape()) +
                                        ", expected '" + s.name + "' " +
                                        shape_string({s.cout, s.cin, arch.kernel, arch.kernel}));
        }
    }
}

Archive TffWeights::to_archive() const {
    Archive a;
    a.meta = {{"kind", "tff_weights"},
              {"echoes", arch.echoes},
              {"hidden", arch.hidden},
              {"width", arch.width},
              {"layers", arch.layers},
              {"kernel", arch.kernel},
              {"recurrent", arch.recurrent}};
    for (const auto& l : layers) {
        a.entries.emplace_back(l.name + ".weight", l.weight);
        a.entries.emplace_back(l.name + ".bias", l.bias);
    }
    return a;
}

TffWeights TffWeights::from_archive(const Archive& a) {
    TffArchitecture arch;
    arch.echoes = a.meta.at("echoes").get<std::size_t>();
    arch.hidden = a.meta.at("hidden").get<std::size_t>();
    arch.width = a.meta.at("width").get<std::size_t>();
    arch.layers = a.meta.at("layers").get<std::size_t>();
    arch.kernel = a.meta.at("kernel").get<std::size_t>();
    arch.recurrent = a.meta.at("recurrent").get<bool>();
    TffWeights w = zeros(arch);
    for (auto& l : w.layers) {
        bool found_w = false, found_b = false;
        for (const auto& [name, t] : a.entries) {
            if (name == l.name + ".weight") {
                l.weight = t.real();
                found_w = true;
            } else if (name == l.name + ".bias") {
                l.bias = t.real();
                found_b = true;
            }
        }
        if (!found_w || !found_b) throw std::invalid_argument("tff archive is missing layer '" + l.name + "'");
    }
    w.check();
    return w;
}

namespace graph {

TffVars bind(ad::Tape& tape, const TffWeights& weights, bool trainable) {
    weights.check();
    TffVars vars;
    vars.arch = weights.arch;
    for (const auto& l : weights.layers) {
        auto w = trainable ? tape.parameter(l.weight) : tape.constant(l.weight);
        auto b = trainable ? tape.parameter(l.bias) : tape.constant(l.bias);
        vars.layers.emplace(l.name, std::make_pair(w, b));
    }
    return vars;
}

ad::Var tff(ad::Var v_tilde, const TffVars& vars) {
    const auto& a = vars.arch;
    const auto& shape = v_tilde.shape();
    if (shape.size() != 3 || shape[0] != a.echoes) {
        throw std::invalid_argument("tff: input " + shape_string(shape) + " does not match " + std::to_string(a.echoes) +
                                    " echoes");
    }
    auto conv = [&](ad::Var x, const std::string& name) {
        const auto& [w, b] = vars.layers.at(name);
        return ad::conv2d(x, w, b);
    };
    ad::Tape& tape = *v_tilde.tape();
    const ad::Var channels = ad::to_channels(v_tilde);
    std::vector<ad::Var> hidden;
    ad::Var h = tape.constant(RealArray({a.hidden, shape[1], shape[2]}, 0.0));
    for (std::size_t j = 0; j < a.echoes; ++j) {
        const ad::Var x = ad::slice(channels, 2 * j, 2);
        if (a.recurrent) {
            h = ad::relu(ad::add(conv(x, "ns0"), conv(h, "nh")));
        } else {
            h = ad::relu(conv(ad::relu(conv(x, "ns0")), "ns1"));
        }
        hidden.push_back(h);
    }
    ad::Var d = ad::concat(hidden);
    for (std::size_t l = 0; l < a.layers; ++l) {
        d = conv(d, "d" + std::to_string(l));
        if (l + 1 < a.layers) d = ad::relu(d);
    }
    return ad::from_channels(d);
}

}  // namespace graph

ComplexArray tff_forward(const ComplexArray& v_tilde, const TffWeights& weights) {
    ad::Tape tape;
    const auto vars = graph::bind(tape, weights, false);
    return graph::tff(tape.constant(v_tilde), vars).cplx();
}

ComplexArray tff_ablated_forward(const ComplexArray& v_tilde, const TffWeights& weights) {
    if (weights.arch.recurrent) throw std::invalid_argument("tff_ablated_forward needs non-recurrent weights");
    return tff_forward(v_tilde, weights);
}

}  // namespace mgre
