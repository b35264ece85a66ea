#include "kslab/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "kslab/rng.hpp"

namespace kslab {
namespace {

constexpr double kPi = 3.14159265358979323846;
// Golden angle in radians, pi * (3 - sqrt(5)); about 111.2462 degrees.
const double kGoldenAngle = kPi * (3.0 - std::sqrt(5.0));
constexpr int kAcsDiskRadius = 8;
constexpr double kAccelTolerance = 0.05;

AcsRegion central_band(int width, int band) {
    AcsRegion acs;
    acs.kind = AcsRegion::Kind::ColumnBand;
    acs.col_begin = width / 2 - (band + 1) / 2;
    acs.col_end = width / 2 + band / 2;
    return acs;
}

double accel_of(int height, int width, size_t ones) {
    return static_cast<double>(height) * width / static_cast<double>(ones);
}

/** Marks the pixel chain of an edge-to-edge line through (cy, cx) at angle theta. */
void paint_spoke(std::vector<uint8_t>& on, int h, int w, double cy, double cx, double theta) {
    const double dy = std::sin(theta), dx = std::cos(theta);
    if (std::abs(dx) >= std::abs(dy)) {
        const double slope = dy / dx;
        for (int c = 0; c < w; ++c) {
            const int r = static_cast<int>(std::lround(cy + (c - cx) * slope));
            if (r >= 0 && r < h) on[static_cast<size_t>(r) * w + c] = 1;
        }
    } else {
        const double slope = dx / dy;
        for (int r = 0; r < h; ++r) {
            const int c = static_cast<int>(std::lround(cx + (r - cy) * slope));
            if (c >= 0 && c < w) on[static_cast<size_t>(r) * w + c] = 1;
        }
    }
}

}  // namespace

size_t SamplingMask::ones() const {
    size_t n = 0;
    for (uint8_t b : on) n += b;
    return n;
}

double achieved_acceleration(const SamplingMask& m) {
    const size_t n = m.ones();
    if (n == 0) throw std::invalid_argument("achieved_acceleration: mask has no sampled points");
    return accel_of(m.height, m.width, n);
}

SamplingMask make_full_mask(int height, int width) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("make_full_mask: bad shape");
    SamplingMask m;
    m.scheme = MaskScheme::Full;
    m.height = height;
    m.width = width;
    m.target_acceleration = 1.0;
    m.acs = central_band(width, (width + 1) / 2);
    m.on.assign(static_cast<size_t>(height) * width, 1);
    return m;
}

SamplingMask make_rectilinear_mask(int height, int width, double target_r, uint64_t seed) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("make_rectilinear_mask: bad shape");
    if (target_r < 1.0) throw std::invalid_argument("make_rectilinear_mask: target below 1");

    const int band = static_cast<int>(std::ceil(width * 0.5 / target_r));
    SamplingMask m;
    m.scheme = MaskScheme::Rectilinear;
    m.height = height;
    m.width = width;
    m.target_acceleration = target_r;
    m.seed = seed;
    m.acs = central_band(width, std::min(band, width));
    m.on.assign(static_cast<size_t>(height) * width, 0);

    std::vector<uint8_t> col_on(width, 0);
    int n_cols = 0;
    for (int c = m.acs.col_begin; c < m.acs.col_end; ++c) {
        col_on[c] = 1;
        ++n_cols;
    }

    // Column count closest to the budget; the ACS band is a hard floor.
    const int want = std::clamp(static_cast<int>(std::ceil(width / target_r)), 1, width);
    int best = std::max(want, n_cols);
    if (want - 1 >= n_cols && want - 1 >= 1) {
        const double over = std::abs(static_cast<double>(width) / (want - 1) - target_r);
        const double under = std::abs(static_cast<double>(width) / want - target_r);
        if (over < under) best = want - 1;
    }
    if (n_cols > 0) {
        const double acs_only = static_cast<double>(width) / n_cols;
        if (acs_only < target_r * (1.0 - kAccelTolerance) && n_cols >= best)
            throw infeasible_acceleration(
                "make_rectilinear_mask: calibration band alone exceeds the sampling budget",
                acs_only);
    }

    Rng rng(splitmix64(seed));
    while (n_cols < best) {
        const int c = static_cast<int>(rng.below(width));
        if (!col_on[c]) {
            col_on[c] = 1;
            ++n_cols;
        }
    }
    for (int c = 0; c < width; ++c) {
        if (!col_on[c]) continue;
        for (int r = 0; r < height; ++r) m.at(r, c) = 1;
    }
    return m;
}

SamplingMask make_radial_mask(int height, int width, double target_r, uint64_t seed) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("make_radial_mask: bad shape");
    if (target_r < 1.0) throw std::invalid_argument("make_radial_mask: target below 1");

    SamplingMask m;
    m.scheme = MaskScheme::Radial;
    m.height = height;
    m.width = width;
    m.target_acceleration = target_r;
    m.seed = seed;
    m.acs.kind = AcsRegion::Kind::Disk;
    m.acs.center_row = height / 2;
    m.acs.center_col = width / 2;
    m.acs.radius = kAcsDiskRadius;

    std::vector<uint8_t> disk(static_cast<size_t>(height) * width, 0);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            if (m.acs.contains(r, c)) disk[static_cast<size_t>(r) * width + c] = 1;

    const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
    const double lo = target_r * (1.0 - kAccelTolerance), hi = target_r * (1.0 + kAccelTolerance);
    const int max_spokes = 4 * (height + width);
    const int max_attempts = 64;

    Rng rng(splitmix64(seed ^ 0x5261444d41534bull));
    double nearest = 0.0;
    double nearest_gap = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const double theta0 = rng.uniform01() * 2.0 * kPi;
        std::vector<uint8_t> on = disk;
        size_t ones = 0;
        for (uint8_t b : on) ones += b;
        for (int n = 0; n <= max_spokes; ++n) {
            if (n > 0) {
                paint_spoke(on, height, width, cy, cx, theta0 + (n - 1) * kGoldenAngle);
                ones = 0;
                for (uint8_t b : on) ones += b;
            }
            const double r = accel_of(height, width, ones);
            const double gap = std::abs(r - target_r);
            if (gap < nearest_gap) {
                nearest_gap = gap;
                nearest = r;
            }
            if (r >= lo && r <= hi) {
                m.on = std::move(on);
                return m;
            }
            if (r < lo) break;  // more spokes only lower the acceleration
        }
    }
    throw infeasible_acceleration("make_radial_mask: no spoke count lands within tolerance",
                                  nearest);
}

ComplexImage apply_mask(const ComplexImage& kspace, const SamplingMask& m) {
    if (kspace.height() != m.height || kspace.width() != m.width)
        throw std::invalid_argument("apply_mask: shape mismatch");
    ComplexImage out(kspace.height(), kspace.width());
    for (size_t i = 0; i < out.size(); ++i) out[i] = m.on[i] ? kspace[i] : cplx{0.0, 0.0};
    return out;
}

CoilStack apply_mask(const CoilStack& kspace, const SamplingMask& m) {
    require_coherent_stack(kspace, "apply_mask");
    CoilStack out;
    out.reserve(kspace.size());
    for (const auto& coil : kspace) out.push_back(apply_mask(coil, m));
    return out;
}

SamplingMask extract_acs(const SamplingMask& m) {
    SamplingMask out = m;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (!m.acs.contains(r, c)) out.at(r, c) = 0;
    return out;
}

}  // namespace kslab
