#include "kslab/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace kslab {
namespace {

constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kVifNoiseVar = 2.0;
constexpr double kVifTinyVar = 1e-10;
constexpr double kVifEps = 1e-12;

double max_value(const RealImage& x) {
    double m = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < x.size(); ++i) m = std::max(m, x[i]);
    return m;
}

RealImage multiply(const RealImage& a, const RealImage& b) {
    RealImage out(a.height(), a.width());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

/** Keep every second sample per axis, starting at index 0. */
RealImage decimate2(const RealImage& x) {
    const int h = (x.height() + 1) / 2, w = (x.width() + 1) / 2;
    RealImage out(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out.at(r, c) = x.at(2 * r, 2 * c);
    return out;
}

}  // namespace

std::vector<double> gaussian_kernel_1d(int n, double sigma) {
    if (n < 1 || sigma <= 0.0) throw std::invalid_argument("gaussian_kernel_1d: bad shape");
    std::vector<double> k(n);
    const double c = (n - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = i - c;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

RealImage gaussian_filter_valid(const RealImage& x, int n, double sigma) {
    if (x.height() < n || x.width() < n)
        throw std::invalid_argument("gaussian_filter_valid: image smaller than window");
    const std::vector<double> k = gaussian_kernel_1d(n, sigma);
    RealImage rows(x.height(), x.width() - n + 1);
    for (int r = 0; r < rows.height(); ++r)
        for (int c = 0; c < rows.width(); ++c) {
            double acc = 0.0;
            for (int t = 0; t < n; ++t) acc += k[t] * x.at(r, c + t);
            rows.at(r, c) = acc;
        }
    RealImage out(x.height() - n + 1, rows.width());
    for (int r = 0; r < out.height(); ++r)
        for (int c = 0; c < out.width(); ++c) {
            double acc = 0.0;
            for (int t = 0; t < n; ++t) acc += k[t] * rows.at(r + t, c);
            out.at(r, c) = acc;
        }
    return out;
}

double psnr(const RealImage& pred, const RealImage& target) {
    require_same_shape(pred, target, "psnr");
    double mse = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        mse += d * d;
    }
    mse /= double(pred.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    const double range = max_value(target);
    return 10.0 * std::log10(range * range / mse);
}

double ssim(const RealImage& pred, const RealImage& target) {
    return ssim(pred, target, max_value(target));
}

double ssim(const RealImage& pred, const RealImage& target, double data_range) {
    require_same_shape(pred, target, "ssim");
    if (pred.height() < kSsimWindow || pred.width() < kSsimWindow)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    if (data_range <= 0.0) throw std::invalid_argument("ssim: nonpositive data range");
    const double c1 = kSsimK1 * data_range * kSsimK1 * data_range;
    const double c2 = kSsimK2 * data_range * kSsimK2 * data_range;

    RealImage mu1 = gaussian_filter_valid(pred, kSsimWindow, kSsimSigma);
    RealImage mu2 = gaussian_filter_valid(target, kSsimWindow, kSsimSigma);
    RealImage e11 = gaussian_filter_valid(multiply(pred, pred), kSsimWindow, kSsimSigma);
    RealImage e22 = gaussian_filter_valid(multiply(target, target), kSsimWindow, kSsimSigma);
    RealImage e12 = gaussian_filter_valid(multiply(pred, target), kSsimWindow, kSsimSigma);

    double acc = 0.0;
    for (size_t i = 0; i < mu1.size(); ++i) {
        const double m1 = mu1[i], m2 = mu2[i];
        const double v1 = e11[i] - m1 * m1;
        const double v2 = e22[i] - m2 * m2;
        const double cov = e12[i] - m1 * m2;
        acc += ((2.0 * m1 * m2 + c1) * (2.0 * cov + c2)) /
               ((m1 * m1 + m2 * m2 + c1) * (v1 + v2 + c2));
    }
    return acc / double(mu1.size());
}

double vif_p(const RealImage& pred, const RealImage& target) {
    require_same_shape(pred, target, "vif_p");
    if (pred.height() < 32 || pred.width() < 32)
        throw std::invalid_argument("vif_p: image smaller than 32 per axis");

    RealImage ref = target, dist = pred;
    double num = 0.0, den = 0.0;
    for (int scale = 1; scale <= 4; ++scale) {
        const int n = (1 << (4 - scale + 1)) + 1;  // 17, 9, 5, 3
        const double sigma = n / 5.0;
        if (scale > 1) {
            if (ref.height() < n || ref.width() < n) break;
            ref = decimate2(gaussian_filter_valid(ref, n, sigma));
            dist = decimate2(gaussian_filter_valid(dist, n, sigma));
        }
        if (ref.height() < n || ref.width() < n) break;
        RealImage mu1 = gaussian_filter_valid(ref, n, sigma);
        RealImage mu2 = gaussian_filter_valid(dist, n, sigma);
        RealImage e11 = gaussian_filter_valid(multiply(ref, ref), n, sigma);
        RealImage e22 = gaussian_filter_valid(multiply(dist, dist), n, sigma);
        RealImage e12 = gaussian_filter_valid(multiply(ref, dist), n, sigma);

        for (size_t i = 0; i < mu1.size(); ++i) {
            double s1 = std::max(0.0, e11[i] - mu1[i] * mu1[i]);
            double s2 = std::max(0.0, e22[i] - mu2[i] * mu2[i]);
            const double s12 = e12[i] - mu1[i] * mu2[i];
            double g, sv;
            if (s1 < kVifTinyVar || s2 < kVifTinyVar) {
                // A flat patch on either side carries no transmissible signal.
                g = 0.0;
                sv = s2;
                if (s1 < kVifTinyVar) s1 = 0.0;
            } else if (s12 < 0.0) {
                g = 0.0;
                sv = s2;
            } else {
                g = s12 / s1;  // exact, so identical signals give ratio 1
                sv = std::max(s2 - g * s12, kVifEps);
            }
            num += std::log10(1.0 + g * g * s1 / (sv + kVifNoiseVar));
            den += std::log10(1.0 + s1 / kVifNoiseVar);
        }
    }
    return den > 0.0 ? num / den : 0.0;
}

MetricsReport evaluate_pair_set(const std::vector<RealImage>& preds,
                                const std::vector<RealImage>& targets,
                                const std::vector<std::string>* slice_ids) {
    if (preds.empty() || preds.size() != targets.size())
        throw std::invalid_argument("evaluate_pair_set: mismatched or empty pair lists");
    if (slice_ids && slice_ids->size() != preds.size())
        throw std::invalid_argument("evaluate_pair_set: slice id count mismatch");

    MetricsReport report;
    for (size_t i = 0; i < preds.size(); ++i) {
        SliceMetrics m;
        m.slice_id = slice_ids ? (*slice_ids)[i] : "slice" + std::to_string(i);
        m.psnr_db = psnr(preds[i], targets[i]);
        m.ssim = ssim(preds[i], targets[i]);
        m.vif = vif_p(preds[i], targets[i]);
        report.per_slice.push_back(std::move(m));
    }
    auto aggregate = [&](auto field) {
        MetricAggregate agg;
        for (const auto& m : report.per_slice) agg.mean += field(m);
        agg.mean /= double(report.per_slice.size());
        for (const auto& m : report.per_slice) {
            const double d = field(m) - agg.mean;
            agg.stddev += d * d;
        }
        agg.stddev = std::sqrt(agg.stddev / double(report.per_slice.size()));
        return agg;
    };
    report.psnr = aggregate([](const SliceMetrics& m) { return m.psnr_db; });
    report.ssim = aggregate([](const SliceMetrics& m) { return m.ssim; });
    report.vif = aggregate([](const SliceMetrics& m) { return m.vif; });
    return report;
}

std::string metrics_csv(const MetricsReport& report) {
    auto fmt = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string out = "slice_id,psnr_db,ssim,vif\n";
    for (const auto& m : report.per_slice)
        out += m.slice_id + "," + fmt(m.psnr_db) + "," + fmt(m.ssim) + "," + fmt(m.vif) + "\n";
    out += "mean," + fmt(report.psnr.mean) + "," + fmt(report.ssim.mean) + "," +
           fmt(report.vif.mean) + "\n";
    out += "std," + fmt(report.psnr.stddev) + "," + fmt(report.ssim.stddev) + "," +
           fmt(report.vif.stddev) + "\n";
    return out;
}

}  // namespace kslab
