#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "mgre/autodiff.hpp"
#include "mgre/errors.hpp"

namespace mgre::ad {

bool Var::is_complex() const { return tape_->is_complex(id_); }
const Shape& Var::shape() const { return is_complex() ? tape_->cplx(id_).shape() : tape_->real(id_).shape(); }
const RealArray& Var::real() const {
    if (is_complex()) throw std::invalid_argument("node '" + tape_->op(id_) + "' is complex, expected real");
    return tape_->real(id_);
}
const ComplexArray& Var::cplx() const {
    if (!is_complex()) throw std::invalid_argument("node '" + tape_->op(id_) + "' is real, expected complex");
    return tape_->cplx(id_);
}
bool Var::needs_grad() const { return tape_->needs_grad(id_); }

Var Tape::push(RealArray v, std::string op, bool needs_grad, Backward bw) {
    Node n;
    n.is_complex = false;
    n.r = std::move(v);
    n.needs_grad = needs_grad;
    n.op = op.empty() ? "leaf" : std::move(op);
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::push(ComplexArray v, std::string op, bool needs_grad, Backward bw) {
    Node n;
    n.is_complex = true;
    n.c = std::move(v);
    n.needs_grad = needs_grad;
    n.op = op.empty() ? "leaf" : std::move(op);
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

RealArray& Tape::real_grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.is_complex) throw std::logic_error("real gradient requested for complex node '" + n.op + "'");
    if (!n.has_grad) {
        n.gr = RealArray(n.r.shape(), 0.0);
        n.has_grad = true;
    }
    return n.gr;
}

ComplexArray& Tape::cplx_grad(std::size_t id) {
    auto& n = nodes_[id];
    if (!n.is_complex) throw std::logic_error("complex gradient requested for real node '" + n.op + "'");
    if (!n.has_grad) {
        n.gc = ComplexArray(n.c.shape(), mgre::cplx{});
        n.has_grad = true;
    }
    return n.gc;
}

const RealArray& Tape::grad_real(Var v) const {
    const auto& n = nodes_[v.id()];
    if (n.is_complex) throw std::invalid_argument("grad_real on complex node");
    if (!n.has_grad) throw std::invalid_argument("node '" + n.op + "' received no gradient");
    return n.gr;
}

const ComplexArray& Tape::grad_cplx(Var v) const {
    const auto& n = nodes_[v.id()];
    if (!n.is_complex) throw std::invalid_argument("grad_cplx on real node");
    if (!n.has_grad) throw std::invalid_argument("node '" + n.op + "' received no gradient");
    return n.gc;
}

namespace {

// Exponent-bit test so the loop vectorizes; inf and nan have all exponent bits set.
template <typename A>
bool all_finite(const A& a) {
    const auto* p = reinterpret_cast<const double*>(a.data());
    const std::size_t n = a.size() * (std::is_same_v<typename A::value_type, double> ? 1 : 2);
    constexpr std::uint64_t exp_mask = 0x7FF0000000000000ULL;
    std::uint64_t bad = 0;
    for (std::size_t i = 0; i < n; ++i) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(p[i]) & exp_mask) == exp_mask);
    return bad == 0;
}

}  // namespace

void Tape::check_finite(std::size_t id) const {
    const auto& n = nodes_[id];
    const bool ok = n.is_complex ? all_finite(n.c) : all_finite(n.r);
    if (!ok) throw NumericError("non-finite value at node " + std::to_string(id) + " ('" + n.op + "')");
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw std::invalid_argument("loss belongs to a different tape");
    const auto id = loss.id();
    auto& ln = nodes_[id];
    if (ln.is_complex || ln.r.size() != 1) throw std::invalid_argument("backward needs a real scalar loss");
    for (std::size_t i = 0; i <= id; ++i) check_finite(i);
    real_grad(id)[0] += 1.0;
    for (std::size_t i = id + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.has_grad || !n.needs_grad || !n.backward) continue;
        const bool ok = n.is_complex ? all_finite(n.gc) : all_finite(n.gr);
        if (!ok) throw NumericError("non-finite gradient at node " + std::to_string(i) + " ('" + n.op + "')");
        n.backward(*this, i);
    }
}

}  // namespace mgre::ad
