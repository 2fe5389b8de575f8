#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "mgre/sampling.hpp"
#include "mgre/signal.hpp"
#include "mgre/tensor.hpp"

// Tape-based reverse-mode differentiation over the handful of array
// operations the reconstructor and pattern generator use.
//
// Complex values carry gradients as dL/dRe + i dL/dIm, so for a complex
// linear map y = A x the backward rule is g_x = A^H g_y and for a real
// parameter t entering as y = t x it is g_t = Re<x, g_y>.
namespace mgre::ad {

class Tape;

class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    std::size_t id() const { return id_; }
    Tape* tape() const { return tape_; }
    bool valid() const { return tape_ != nullptr; }

    bool is_complex() const;
    const Shape& shape() const;
    const RealArray& real() const;
    const ComplexArray& cplx() const;
    bool needs_grad() const;

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Var constant(RealArray v) { return push(std::move(v), {}, false, {}); }
    Var constant(ComplexArray v) { return push(std::move(v), {}, false, {}); }
    // Leaf whose gradient is accumulated by backward().
    Var parameter(RealArray v) { return push(std::move(v), {}, true, {}); }

    Var push(RealArray v, std::string op, bool needs_grad, Backward bw);
    Var push(ComplexArray v, std::string op, bool needs_grad, Backward bw);

    // Seeds dL/dloss = 1 on a real scalar and runs every recorded backward
    // rule in reverse order. Raises NumericError naming the first node whose
    // value or gradient is non-finite.
    void backward(Var loss);

    const RealArray& grad_real(Var v) const;
    const ComplexArray& grad_cplx(Var v) const;

    // Used by op implementations.
    bool is_complex(std::size_t id) const { return nodes_[id].is_complex; }
    const RealArray& real(std::size_t id) const { return nodes_[id].r; }
    const ComplexArray& cplx(std::size_t id) const { return nodes_[id].c; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    const std::string& op(std::size_t id) const { return nodes_[id].op; }
    RealArray& real_grad(std::size_t id);
    ComplexArray& cplx_grad(std::size_t id);
    bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }
    std::size_t size() const { return nodes_.size(); }

    // Raises NumericError if node `id` holds non-finite values.
    void check_finite(std::size_t id) const;

private:
    struct Node {
        bool is_complex = false;
        RealArray r;
        ComplexArray c;
        RealArray gr;
        ComplexArray gc;
        bool has_grad = false;
        bool needs_grad = false;
        std::string op;
        Backward backward;
    };
    std::deque<Node> nodes_;
};

// --- elementwise and structural ---
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var a);
// Concatenate / slice along axis 0.
Var concat(const std::vector<Var>& parts);
Var slice(Var a, std::size_t begin, std::size_t count);
Var sum(Var a);

// --- convolution: x [C_in, H, W], w [C_out, C_in, K, K], b [C_out] ---
// Stride 1, zero padding K/2, output [C_out, H, W].
Var conv2d(Var x, Var w, Var b);

// --- complex <-> real channels: [N, H, W] complex <-> [2N, H, W] real,
// channel 2j holding the real part of slice j and 2j+1 the imaginary part.
Var to_channels(Var z);
Var from_channels(Var r);

// --- scalar (shape [1]) helpers for unrolled CG ---
Var inner_re(Var a, Var b);
Var div(Var a, Var b);
// x + alpha * y with complex x, y and real scalar alpha.
Var axpy(Var x, Var alpha, Var y);
// x - alpha * y
Var axmy(Var x, Var alpha, Var y);

// --- encoding operators with a (possibly differentiable) real mask [N_T, N_y, N_z] ---
// A^H A p
Var normal_op(Var p, Var mask, const CoilSet& coils);
// A^H (mask . b) for fully sampled b [N_T, N_C, N_y, N_z].
Var masked_adjoint(const ComplexArray& b, Var mask, const CoilSet& coils);

// --- sampling pattern nodes ---
Var prob_pattern(Var w, double slope, double gamma, SpoMode mode);
// Forward value is the binary mask; the backward pass hands the incoming
// gradient to P unchanged (straight-through).
Var straight_through(Var p, const RealArray& binary);

// --- SSIM: sum over channels of the mean windowed SSIM between x and ref ---
Var ssim_sum(Var x, const RealArray& ref, std::size_t window, double c1, double c2);

// Applies a non-differentiable function; the input must not require gradients.
Var opaque(Var x, const std::function<ComplexArray(const ComplexArray&)>& fn, std::string name);

}  // namespace mgre::ad
