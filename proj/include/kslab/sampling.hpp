#pragma once

#include <cstdint>
#include <optional>

#include "kslab/errors.hpp"
#include "kslab/image.hpp"

namespace kslab {

enum class MaskScheme { Full, Rectilinear, Radial };

/** Autocalibration region: a central column band or a central disk. */
struct AcsRegion {
    enum class Kind { ColumnBand, Disk } kind = Kind::ColumnBand;
    int col_begin = 0, col_end = 0;  // [begin, end) for ColumnBand
    int center_row = 0, center_col = 0, radius = 0;  // for Disk
    bool contains(int r, int c) const {
        if (kind == Kind::ColumnBand) return c >= col_begin && c < col_end;
        const long dr = r - center_row, dc = c - center_col;
        return dr * dr + dc * dc <= static_cast<long>(radius) * radius;
    }
};

/** Binary k-space sampling pattern with its provenance. */
struct SamplingMask {
    MaskScheme scheme = MaskScheme::Full;
    int height = 0, width = 0;
    double target_acceleration = 1.0;
    uint64_t seed = 0;
    AcsRegion acs;
    std::vector<uint8_t> on;  // row-major, 1 = sampled

    uint8_t at(int r, int c) const { return on[static_cast<size_t>(r) * width + c]; }
    uint8_t& at(int r, int c) { return on[static_cast<size_t>(r) * width + c]; }
    size_t ones() const;
};

/** N*M / ones with exact integer counting; throws on an all-zero mask. */
double achieved_acceleration(const SamplingMask& m);

/** Every column sampled; ACS band covers the central half. */
SamplingMask make_full_mask(int height, int width);

/**
 * Full-column random mask. The central ceil(width * 0.5 / target_R) columns
 * are always on and recorded as the ACS band; further columns are drawn
 * uniformly without replacement, and the final column count is the one whose
 * acceleration is nearest the target.
 */
SamplingMask make_rectilinear_mask(int height, int width, double target_r, uint64_t seed);

/**
 * Golden-angle spoke mask: edge-to-edge lines through the grid center at
 * approximately 111.246 degree increments from a seed-dependent start, plus a
 * forced central ACS disk (radius 8). The spoke count (and, if needed, a
 * redrawn starting angle) is searched so the achieved acceleration lands
 * within 5% of the target; otherwise throws infeasible_acceleration.
 */
SamplingMask make_radial_mask(int height, int width, double target_r, uint64_t seed);

/** Element-wise U * k for one coil plane. */
ComplexImage apply_mask(const ComplexImage& kspace, const SamplingMask& m);

/** Per-coil apply_mask. */
CoilStack apply_mask(const CoilStack& kspace, const SamplingMask& m);

/** Keeps only the ACS region of the mask (used for sensitivity calibration). */
SamplingMask extract_acs(const SamplingMask& m);

}  // namespace kslab
