#include "mgre/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mgre {

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

const Shape& Tensor::shape() const {
    return std::visit([](const auto& a) -> const Shape& { return a.shape(); }, value_);
}

const RealArray& Tensor::real() const {
    if (!is_real()) throw std::invalid_argument("tensor is complex128, expected real64");
    return std::get<RealArray>(value_);
}
const ComplexArray& Tensor::complex() const {
    if (!is_complex()) throw std::invalid_argument("tensor is real64, expected complex128");
    return std::get<ComplexArray>(value_);
}
RealArray& Tensor::real() {
    if (!is_real()) throw std::invalid_argument("tensor is complex128, expected real64");
    return std::get<RealArray>(value_);
}
ComplexArray& Tensor::complex() {
    if (!is_complex()) throw std::invalid_argument("tensor is real64, expected complex128");
    return std::get<ComplexArray>(value_);
}

RealArray abs(const ComplexArray& x) {
    RealArray out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::abs(x[i]);
    return out;
}

RealArray real_part(const ComplexArray& x) {
    RealArray out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i].real();
    return out;
}

RealArray imag_part(const ComplexArray& x) {
    RealArray out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i].imag();
    return out;
}

ComplexArray to_complex(const RealArray& x) {
    ComplexArray out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
    return out;
}

double norm2(std::span<const cplx> x) {
    double s = 0.0;
    for (const auto& v : x) s += std::norm(v);
    return std::sqrt(s);
}

double norm2(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double inner_re(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) throw std::invalid_argument("inner_re: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return s;
}

cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) throw std::invalid_argument("inner: length mismatch");
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double max_abs_diff(const ComplexArray& a, const ComplexArray& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs_diff(const RealArray& a, const RealArray& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace mgre
