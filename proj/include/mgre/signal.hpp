#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "mgre/tensor.hpp"

namespace mgre {

// Complex image stack [N_T, N_y, N_z] with its echo times in seconds.
struct MultiEchoImage {
    ComplexArray data;
    std::vector<double> echo_times;

    MultiEchoImage() = default;
    MultiEchoImage(ComplexArray data, std::vector<double> echo_times);

    std::size_t echoes() const { return data.extent(0); }
    std::size_t ny() const { return data.extent(1); }
    std::size_t nz() const { return data.extent(2); }
};

// Sensitivity maps [N_C, N_y, N_z], root-sum-of-squares normalized.
struct CoilSet {
    ComplexArray maps;
    std::size_t count() const { return maps.extent(0); }
};

// k-space samples [N_T, N_C, N_y, N_z].
struct KSpaceData {
    ComplexArray data;
};

struct Ellipse {
    double center_y = 0.0, center_z = 0.0;  // normalized to [-1, 1]
    double axis_y = 0.5, axis_z = 0.5;
    double rotation_deg = 0.0;
    double m0 = 1.0;     // a.u.
    double r2star = 0.0; // 1/s
    double field = 0.0;  // Hz
    double phase = 0.0;  // rad
};

struct PhantomSpec {
    std::size_t ny = 64, nz = 64;
    std::vector<Ellipse> ellipses;
    double noise_sigma = 0.0;
};

struct GroundTruthMaps {
    RealArray m0, r2star, field, phase;
    // Index of the ellipse that owns each voxel, -1 for background.
    NdArray<int> label;
};

struct Phantom {
    MultiEchoImage image;
    GroundTruthMaps truth;
};

void validate(const PhantomSpec& spec);
Phantom generate_phantom(const PhantomSpec& spec, const std::vector<double>& echo_times);

// Head-like ellipse table with mGRE tissue parameters on the given grid.
PhantomSpec standard_phantom_spec(std::size_t ny, std::size_t nz);
// Standard phantom with seeded geometric and parametric perturbations.
PhantomSpec random_phantom_spec(std::size_t ny, std::size_t nz, std::uint64_t seed);

PhantomSpec phantom_spec_from_json(const nlohmann::json& doc);
nlohmann::json phantom_spec_to_json(const PhantomSpec& spec);

// Echo times te0, te0 + dte, ...
std::vector<double> uniform_echo_times(std::size_t n, double first, double spacing);

CoilSet generate_coils(std::size_t n_coils, std::size_t ny, std::size_t nz, std::uint64_t seed);

// b[j,k] = U_j . F(E_k . s_j). masks is [N_T, N_y, N_z], any real weights.
KSpaceData encode(const MultiEchoImage& x, const CoilSet& coils, const RealArray& masks);
ComplexArray encode(const ComplexArray& x, const CoilSet& coils, const RealArray& masks);
// x[j] = sum_k conj(E_k) . F^-1(U_j . b[j,k])
ComplexArray adjoint(const KSpaceData& b, const CoilSet& coils, const RealArray& masks);
ComplexArray adjoint(const ComplexArray& b, const CoilSet& coils, const RealArray& masks);
// A^H A x, computed per echo without materializing all coils.
ComplexArray normal(const ComplexArray& x, const CoilSet& coils, const RealArray& masks);

// Complex Gaussian noise (std sigma per component) at locations where
// masks != 0; draws are indexed by flat location so results do not depend
// on evaluation order. An empty masks array means every location.
KSpaceData add_noise(const KSpaceData& b, double sigma, std::uint64_t seed, const RealArray& masks = {});

// Per-component sigma for which 20 log10(||b|| / ||noise||) equals snr_db
// in expectation, with noise on every entry of b.
double noise_sigma_for_snr(const KSpaceData& b, double snr_db);

RealArray full_masks(std::size_t echoes, std::size_t ny, std::size_t nz);

}  // namespace mgre
