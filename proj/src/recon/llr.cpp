#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "mgre/recon.hpp"

namespace mgre {

ComplexArray llr_denoise(const ComplexArray& x, const LlrParams& params) {
    if (params.lambda < 0.0) throw std::invalid_argument("llr lambda must be >= 0");
    if (params.patch == 0) throw std::invalid_argument("llr patch size must be >= 1");
    if (x.ndim() != 3) throw std::invalid_argument("llr input must be [N_T, N_y, N_z]");
    if (params.lambda == 0.0) return x;
    const std::size_t nt = x.extent(0), ny = x.extent(1), nz = x.extent(2), b = params.patch;
    ComplexArray out(x.shape());
    Eigen::MatrixXcd casorati(static_cast<Eigen::Index>(b * b), static_cast<Eigen::Index>(nt));
    for (std::size_t y0 = 0; y0 < ny; y0 += b)
        for (std::size_t z0 = 0; z0 < nz; z0 += b) {
            // Rows outside the image stay zero: the implicit zero padding.
            casorati.setZero();
            for (std::size_t dy = 0; dy < b && y0 + dy < ny; ++dy)
                for (std::size_t dz = 0; dz < b && z0 + dz < nz; ++dz)
                    for (std::size_t j = 0; j < nt; ++j)
                        casorati(static_cast<Eigen::Index>(dy * b + dz), static_cast<Eigen::Index>(j)) = x.at(j, y0 + dy, z0 + dz);
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(casorati, Eigen::ComputeThinU | Eigen::ComputeThinV);
            Eigen::VectorXd s = svd.singularValues();
            for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::max(0.0, s(i) - params.lambda);
            const Eigen::MatrixXcd low = svd.matrixU() * s.cast<cplx>().asDiagonal() * svd.matrixV().adjoint();
            for (std::size_t dy = 0; dy < b && y0 + dy < ny; ++dy)
                for (std::size_t dz = 0; dz < b && z0 + dz < nz; ++dz)
                    for (std::size_t j = 0; j < nt; ++j)
                        out.at(j, y0 + dy, z0 + dz) = low(static_cast<Eigen::Index>(dy * b + dz), static_cast<Eigen::Index>(j));
        }
    return out;
}

double llr_lambda_for_noise(double sigma, std::size_t patch, std::size_t echoes) {
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    return std::sqrt(2.0) * (static_cast<double>(patch) + std::sqrt(static_cast<double>(echoes))) * sigma;
}

}  // namespace mgre
