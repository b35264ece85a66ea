#pragma once

#include <cstdint>

#include "kslab/coils.hpp"
#include "kslab/image.hpp"
#include "kslab/sampling.hpp"

namespace kslab {

/** Gaussian noise model for the data term. */
struct NllConfig {
    double sigma2 = 1.0;
};

/** Per-coil acquisition: y_k = F(S_k * x). */
CoilStack forward_model(const ComplexImage& x, const CoilStack& sens);

/** Adjoint of the (optionally masked) acquisition: sum_k conj(S_k) * Finv(y_k). */
ComplexImage adjoint_model(const CoilStack& kspace, const CoilStack& sens);

/**
 * Data-term value (1/sigma^2) sum_k ||U * F(S_k x) - y_k||^2 for masked
 * measurements y.
 */
double nll(const ComplexImage& x, const CoilStack& sens, const CoilStack& masked_kspace,
           const SamplingMask& mask, const NllConfig& cfg = {});

/**
 * Data-term gradient (1/sigma^2) sum_k conj(S_k) * Finv(U * (U * F(S_k x) - y_k)).
 * A real-part finite-difference probe of nll recovers twice this field.
 */
ComplexImage nll_gradient(const ComplexImage& x, const CoilStack& sens,
                          const CoilStack& masked_kspace, const SamplingMask& mask,
                          const NllConfig& cfg = {});

/**
 * Full (unmasked) noisy acquisition of a real source image: per coil
 * F(S_k * x) plus i.i.d. circularly-symmetric Gaussian noise with the given
 * per-component standard deviation.
 */
CoilStack simulate_acquisition(const RealImage& source, const CoilStack& sens,
                               double noise_std, uint64_t seed);

}  // namespace kslab
