#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <functional>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mgre {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape);

// Dense row-major array. Extents are always >= 1.
template <typename T>
class NdArray {
public:
    using value_type = T;

    NdArray() = default;

    explicit NdArray(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
        validate();
        data_.assign(shape_size(shape_), fill);
    }

    NdArray(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate();
        if (data_.size() != shape_size(shape_)) {
            throw std::invalid_argument("NdArray: data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_string(shape_));
        }
    }

    const Shape& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }
    std::span<T> span() { return data_; }
    std::span<const T> span() const { return data_; }
    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // Contiguous sub-block for a fixed leading index.
    std::size_t slab_size() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }
    std::span<T> slab(std::size_t i) { return std::span<T>(data_).subspan(i * slab_size(), slab_size()); }
    std::span<const T> slab(std::size_t i) const {
        return std::span<const T>(data_).subspan(i * slab_size(), slab_size());
    }

    T& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    T& at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
    const T& at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    const T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    NdArray reshaped(Shape shape) const {
        return NdArray(std::move(shape), data_);
    }

    bool operator==(const NdArray&) const = default;

private:
    void validate() const {
        for (auto e : shape_) {
            if (e == 0) throw std::invalid_argument("NdArray: zero extent in shape " + shape_string(shape_));
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

using RealArray = NdArray<double>;
using ComplexArray = NdArray<cplx>;

enum class DType : std::uint32_t { Real64 = 1, Complex128 = 2 };

// Either dtype; the unit exchanged through tensor files.
class Tensor {
public:
    Tensor() = default;
    Tensor(RealArray a) : value_(std::move(a)) {}
    Tensor(ComplexArray a) : value_(std::move(a)) {}

    DType dtype() const { return value_.index() == 0 ? DType::Real64 : DType::Complex128; }
    const Shape& shape() const;
    bool is_real() const { return dtype() == DType::Real64; }
    bool is_complex() const { return dtype() == DType::Complex128; }

    const RealArray& real() const;
    const ComplexArray& complex() const;
    RealArray& real();
    ComplexArray& complex();

    bool operator==(const Tensor&) const = default;

private:
    std::variant<RealArray, ComplexArray> value_;
};

// Elementwise helpers used across modules.
RealArray abs(const ComplexArray& x);
RealArray real_part(const ComplexArray& x);
RealArray imag_part(const ComplexArray& x);
ComplexArray to_complex(const RealArray& x);
double norm2(std::span<const cplx> x);
double norm2(std::span<const double> x);
// Re <a, b> = Re sum conj(a) b
double inner_re(std::span<const cplx> a, std::span<const cplx> b);
cplx inner(std::span<const cplx> a, std::span<const cplx> b);
double max_abs_diff(const ComplexArray& a, const ComplexArray& b);
double max_abs_diff(const RealArray& a, const RealArray& b);

}  // namespace mgre
