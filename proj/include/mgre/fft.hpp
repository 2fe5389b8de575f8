#pragma once

#include <vector>

#include "mgre/tensor.hpp"

namespace mgre {

// Unitary centered DFT along the given axes: DC sits at index n/2 on every
// transformed axis and both directions scale by 1/sqrt(n).
ComplexArray fft_centered(const ComplexArray& x, const std::vector<std::size_t>& axes);
ComplexArray ifft_centered(const ComplexArray& x, const std::vector<std::size_t>& axes);

// In-place variants over the trailing two axes of a [..., H, W] array.
void fft2c_inplace(ComplexArray& x);
void ifft2c_inplace(ComplexArray& x);

// Same, for a single contiguous H x W plane.
void fft2c_plane(cplx* plane, std::size_t h, std::size_t w);
void ifft2c_plane(cplx* plane, std::size_t h, std::size_t w);
// Unnormalized, unshifted DFT of one plane. Inside F^H D F the centering
// shifts cancel, so only the diagonal needs reindexing via centered_index.
void fft2_plane_raw(cplx* plane, std::size_t h, std::size_t w);
void ifft2_plane_raw(cplx* plane, std::size_t h, std::size_t w);
// Centered position of the raw DFT index of an h x w plane.
std::size_t centered_index(std::size_t raw, std::size_t h, std::size_t w);

}  // namespace mgre
