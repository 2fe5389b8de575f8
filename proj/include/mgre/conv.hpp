#pragma once

#include "mgre/tensor.hpp"

namespace mgre {

// 2D cross-correlation, stride 1, zero "same" padding.
// x [C_in, H, W], w [C_out, C_in, K, K] with K odd, bias [C_out].
RealArray conv2d_forward(const RealArray& x, const RealArray& w, const RealArray& bias);

// Accumulates into dx, dw, dbias (any may be null).
void conv2d_backward(const RealArray& x, const RealArray& w, const RealArray& dy, RealArray* dx, RealArray* dw,
                     RealArray* dbias);

}  // namespace mgre
