#pragma once

#include "kslab/image.hpp"
#include "kslab/sampling.hpp"

namespace kslab {

/**
 * Synthetic receive sensitivities: Gaussian magnitude profiles centered at
 * equiangular points on a circle of radius 0.6 * min(h,w)/2 around the image
 * center, profile sigma 0.5 * min(h,w), each with a smooth linear phase ramp.
 * Jointly normalized so sum_k |S_k|^2 = 1 at every pixel.
 */
CoilStack simulate_sensitivities(int height, int width, int n_coils);

/**
 * Autocalibration estimate: per coil, the k-space is windowed to the ACS
 * region (tapered Hann weighting, zero elsewhere) and inverse-transformed to a
 * low-resolution image c_k; S_k = c_k / (RSS(c) + 1e-12), with pixels whose
 * RSS falls below 1e-6 of its maximum zeroed. Guarantees sum_k |S_k|^2 <= 1.
 */
CoilStack estimate_sensitivities_from_acs(const CoilStack& masked_kspace,
                                          const SamplingMask& acs);

/** Root-sum-of-squares combination of coil images. */
RealImage rss(const CoilStack& coil_images);

}  // namespace kslab
