#include "mgre/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mgre {

double KLocation::radius() const { return std::hypot(static_cast<double>(ky), static_cast<double>(kz)); }

double KLocation::angle() const {
    if (ky == 0 && kz == 0) return 0.0;
    double a = std::atan2(static_cast<double>(kz), static_cast<double>(ky));
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    return a;
}

std::vector<KLocation> sampled_locations(const RealArray& mask_plane) {
    if (mask_plane.ndim() != 2) throw std::invalid_argument("mask plane must be [N_y, N_z]");
    const std::size_t ny = mask_plane.extent(0), nz = mask_plane.extent(1);
    std::vector<KLocation> out;
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t z = 0; z < nz; ++z)
            if (mask_plane.at(y, z) != 0.0) {
                out.push_back({static_cast<int>(y) - static_cast<int>(ny / 2), static_cast<int>(z) - static_cast<int>(nz / 2)});
            }
    return out;
}

std::vector<Segment> segment_locations(std::vector<KLocation> locations, std::size_t n_segments) {
    if (n_segments == 0) throw std::invalid_argument("n_segments must be positive");
    std::sort(locations.begin(), locations.end(), [](const KLocation& a, const KLocation& b) {
        const double ta = a.angle(), tb = b.angle();
        if (ta != tb) return ta < tb;
        const double ra = a.radius(), rb = b.radius();
        if (ra != rb) return ra < rb;
        return a < b;
    });
    const std::size_t n = locations.size(), base = n / n_segments, extra = n % n_segments;
    std::vector<Segment> segments;
    segments.reserve(n_segments);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < n_segments; ++s) {
        const std::size_t size = base + (s >= n_segments - extra ? 1 : 0);
        segments.emplace_back(locations.begin() + static_cast<std::ptrdiff_t>(pos),
                              locations.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return segments;
}

std::vector<Segment> segment_locations(const RealArray& mask_plane, std::size_t n_segments) {
    return segment_locations(sampled_locations(mask_plane), n_segments);
}

Segment order_within_segment(Segment segment) {
    std::sort(segment.begin(), segment.end(), [](const KLocation& a, const KLocation& b) {
        const double ra = a.radius(), rb = b.radius();
        if (ra != rb) return ra < rb;
        const double ta = a.angle(), tb = b.angle();
        if (ta != tb) return ta < tb;
        return a < b;
    });
    return segment;
}

std::size_t AcquisitionSchedule::n_ind() const {
    return segment_sizes.empty() ? 0 : *std::max_element(segment_sizes.begin(), segment_sizes.end());
}

AcquisitionSchedule build_schedule(const RealArray& masks, std::size_t n_segments) {
    if (masks.ndim() != 3) throw std::invalid_argument("masks must be [N_T, N_y, N_z]");
    if (n_segments == 0) throw std::invalid_argument("n_segments must be positive");
    const std::size_t nt = masks.extent(0), ny = masks.extent(1), nz = masks.extent(2);
    AcquisitionSchedule sched;
    sched.n_echoes = nt;
    sched.n_segments = n_segments;
    for (std::size_t j = 0; j < nt; ++j) {
        RealArray plane({ny, nz}, std::vector<double>(masks.slab(j).begin(), masks.slab(j).end()));
        const auto segments = segment_locations(plane, n_segments);
        std::vector<KLocation> seq;
        std::vector<std::size_t> sizes;
        for (const auto& seg : segments) {
            const auto ordered = order_within_segment(seg);
            seq.insert(seq.end(), ordered.begin(), ordered.end());
            sizes.push_back(seg.size());
        }
        if (j == 0) {
            sched.n_tr = seq.size();
            sched.segment_sizes = sizes;
        } else if (seq.size() != sched.n_tr) {
            throw std::invalid_argument("echo " + std::to_string(j) + " samples " + std::to_string(seq.size()) +
                                        " locations but echo 0 samples " + std::to_string(sched.n_tr));
        }
        sched.sequence.push_back(std::move(seq));
    }
    return sched;
}

JumpStats encoding_jump_metric(const AcquisitionSchedule& s) {
    JumpStats st;
    if (s.n_tr == 0) return st;
    auto dist = [](const KLocation& a, const KLocation& b) {
        return std::hypot(static_cast<double>(a.ky - b.ky), static_cast<double>(a.kz - b.kz));
    };
    double intra_sum = 0.0, inter_sum = 0.0;
    for (std::size_t t = 0; t < s.n_tr; ++t) {
        double jump = 0.0;
        for (std::size_t j = 1; j < s.n_echoes; ++j) jump += dist(s.sequence[j][t], s.sequence[j - 1][t]);
        intra_sum += jump;
        st.intra_max = std::max(st.intra_max, jump);
        if (t + 1 < s.n_tr) {
            const double d = dist(s.sequence[s.n_echoes - 1][t], s.sequence[0][t + 1]);
            inter_sum += d;
            st.inter_max = std::max(st.inter_max, d);
        }
    }
    st.intra_mean = intra_sum / static_cast<double>(s.n_tr);
    st.inter_mean = s.n_tr > 1 ? inter_sum / static_cast<double>(s.n_tr - 1) : 0.0;
    return st;
}

std::string schedule_to_text(const AcquisitionSchedule& s) {
    std::ostringstream os;
    os << "# N_s " << s.n_segments << " N_ind " << s.n_ind() << " N_T " << s.n_echoes << " N_TR " << s.n_tr
       << " segment_sizes";
    for (auto sz : s.segment_sizes) os << ' ' << sz;
    os << '\n';
    for (std::size_t t = 0; t < s.n_tr; ++t)
        for (std::size_t j = 0; j < s.n_echoes; ++j)
            os << t << ' ' << j << ' ' << s.sequence[j][t].ky << ' ' << s.sequence[j][t].kz << '\n';
    return os.str();
}

}  // namespace mgre
