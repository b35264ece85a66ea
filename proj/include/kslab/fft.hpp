#pragma once

#include "kslab/image.hpp"

namespace kslab {

/**
 * Centered orthonormal 2D DFT: fftshift(FFT(ifftshift(x))) / sqrt(h*w).
 * Zero frequency of the result sits at (h/2, w/2) (floor division).
 * Supports arbitrary sizes; non-power-of-two lengths go through Bluestein's
 * chirp-z algorithm.
 */
ComplexImage fft2c(const ComplexImage& x);

/** Exact inverse of fft2c, also orthonormal and centered. */
ComplexImage ifft2c(const ComplexImage& x);

/** Circular roll moving index 0 to floor(n/2) along both axes. */
ComplexImage fftshift2(const ComplexImage& x);

/** Inverse roll of fftshift2 (exact for odd sizes as well). */
ComplexImage ifftshift2(const ComplexImage& x);

namespace detail {
/** Unnormalized 1D DFT (forward: exp(-2*pi*i*jk/n)); length = a.size(). */
void fft_1d(std::vector<cplx>& a, bool inverse);
}  // namespace detail

}  // namespace kslab
