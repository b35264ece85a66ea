#pragma once

#include <string>
#include <vector>

#include "kslab/image.hpp"

namespace kslab {

/** Normalized 1D Gaussian taps; the separable factor of the metric windows. */
std::vector<double> gaussian_kernel_1d(int n, double sigma);

/** Valid-mode separable Gaussian filtering (output shrinks by n-1 per axis). */
RealImage gaussian_filter_valid(const RealImage& x, int n, double sigma);

/**
 * 10*log10(range^2 / MSE) with range = max(target). Identical images return
 * +infinity.
 */
double psnr(const RealImage& pred, const RealImage& target);

/**
 * Mean structural similarity over an 11x11 Gaussian window (sigma 1.5),
 * K1 = 0.01, K2 = 0.03, no padding. The two-argument form takes the dynamic
 * range from max(target).
 */
double ssim(const RealImage& pred, const RealImage& target);
double ssim(const RealImage& pred, const RealImage& target, double data_range);

/**
 * Pixel-domain visual information fidelity over four dyadic scales (Gaussian
 * windows 17/9/5/3, sigma n/5, filter-then-decimate between scales), scalar
 * Gaussian channel with noise variance 2. Identical images score 1.
 */
double vif_p(const RealImage& pred, const RealImage& target);

struct SliceMetrics {
    std::string slice_id;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double vif = 0.0;
};

struct MetricAggregate {
    double mean = 0.0;
    double stddev = 0.0;  // population convention
};

struct MetricsReport {
    std::vector<SliceMetrics> per_slice;
    MetricAggregate psnr, ssim, vif;
};

/** Per-pair metrics plus population mean/std aggregates. */
MetricsReport evaluate_pair_set(const std::vector<RealImage>& preds,
                                const std::vector<RealImage>& targets,
                                const std::vector<std::string>* slice_ids = nullptr);

/** CSV: header, one row per slice, then mean and std rows; LF endings. */
std::string metrics_csv(const MetricsReport& report);

}  // namespace kslab
