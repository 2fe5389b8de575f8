#pragma once

#include "mgre/tensor.hpp"

namespace mgre {

struct SsimParams {
    std::size_t window = 10;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

// Mean over all valid window positions (unit stride, uniform weights) of
//   (2 mu_x mu_y + c1)(2 s_xy + c2) / ((mu_x^2 + mu_y^2 + c1)(s_x^2 + s_y^2 + c2))
// with population (1/N) window statistics. x and y are [H, W].
double ssim_map(const RealArray& x, const RealArray& y, const SsimParams& params = {});

// Gradient of ssim_map with respect to x.
RealArray ssim_grad(const RealArray& x, const RealArray& y, const SsimParams& params = {});

}  // namespace mgre
