#pragma once

#include <string>
#include <vector>

#include "mgre/tensor.hpp"

namespace mgre {

// k-space location as signed offsets from the centre index (n/2) per axis.
struct KLocation {
    int ky = 0;
    int kz = 0;

    double radius() const;
    // Angle to the positive k_y axis in [0, 2*pi); the centre maps to 0.
    double angle() const;
    bool operator==(const KLocation&) const = default;
    auto operator<=>(const KLocation&) const = default;
};

using Segment = std::vector<KLocation>;

std::vector<KLocation> sampled_locations(const RealArray& mask_plane);

// Sort by angle and cut into n_segments contiguous runs. When the count is
// not divisible, the last (count mod n_segments) runs get one extra location.
std::vector<Segment> segment_locations(const RealArray& mask_plane, std::size_t n_segments);
std::vector<Segment> segment_locations(std::vector<KLocation> locations, std::size_t n_segments);

// Ascending distance to centre; ties by angle, then k_y, then k_z.
Segment order_within_segment(Segment segment);

struct AcquisitionSchedule {
    std::size_t n_tr = 0;
    std::size_t n_echoes = 0;
    std::size_t n_segments = 0;
    std::vector<std::size_t> segment_sizes;
    // sequence[j][t]: location acquired at echo j during TR t.
    std::vector<std::vector<KLocation>> sequence;

    // Largest segment size.
    std::size_t n_ind() const;
};

// masks: [N_T, N_y, N_z] with equal per-echo counts.
AcquisitionSchedule build_schedule(const RealArray& masks, std::size_t n_segments);

struct JumpStats {
    double intra_mean = 0.0, intra_max = 0.0;
    double inter_mean = 0.0, inter_max = 0.0;
};

JumpStats encoding_jump_metric(const AcquisitionSchedule& schedule);

// Header line then one "tr echo ky kz" row per (TR, echo), LF endings.
std::string schedule_to_text(const AcquisitionSchedule& schedule);

}  // namespace mgre
