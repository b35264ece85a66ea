#pragma once

#include <cstdint>

#include "kslab/image.hpp"

namespace kslab {

/** Modified Shepp-Logan head phantom on [-1,1]^2, clamped to [0,1]. */
RealImage shepp_logan_phantom(int height, int width);

/**
 * Shepp-Logan variant with seeded jitter of ellipse intensity, position, axes,
 * and tilt; used to synthesize distinct volumes. Values stay in [0,1].
 */
RealImage perturbed_shepp_logan(int height, int width, uint64_t seed);

}  // namespace kslab
