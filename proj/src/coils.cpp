#include "kslab/coils.hpp"

#include <cmath>

#include "kslab/fft.hpp"

namespace kslab {
namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

CoilStack simulate_sensitivities(int height, int width, int n_coils) {
    if (n_coils <= 0) throw std::invalid_argument("simulate_sensitivities: need a coil");
    const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
    const double ring = 0.6 * std::min(height, width) / 2.0;
    const double sigma = 0.5 * std::min(height, width);
    const double ramp = 1.0 / std::max(height, width);

    CoilStack maps;
    maps.reserve(n_coils);
    for (int k = 0; k < n_coils; ++k) {
        const double theta = 2.0 * kPi * k / n_coils;
        const double oy = cy + ring * std::sin(theta), ox = cx + ring * std::cos(theta);
        ComplexImage s(height, width);
        for (int r = 0; r < height; ++r) {
            for (int c = 0; c < width; ++c) {
                const double d2 = (r - oy) * (r - oy) + (c - ox) * (c - ox);
                const double mag = std::exp(-d2 / (2.0 * sigma * sigma));
                const double phase =
                    kPi * ramp * ((c - cx) * std::cos(theta) + (r - cy) * std::sin(theta));
                s.at(r, c) = std::polar(mag, phase);
            }
        }
        maps.push_back(std::move(s));
    }
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double sum = 0.0;
            for (const auto& s : maps) sum += std::norm(s.at(r, c));
            const double inv = 1.0 / std::sqrt(sum);
            for (auto& s : maps) s.at(r, c) *= inv;
        }
    }
    return maps;
}

CoilStack estimate_sensitivities_from_acs(const CoilStack& masked_kspace,
                                          const SamplingMask& acs) {
    require_coherent_stack(masked_kspace, "estimate_sensitivities_from_acs");
    const int h = masked_kspace.front().height(), w = masked_kspace.front().width();
    if (h != acs.height || w != acs.width)
        throw std::invalid_argument("estimate_sensitivities_from_acs: shape mismatch");

    // Taper weights over the calibration region; positive inside, zero outside.
    RealImage win(h, w, 0.0);
    if (acs.acs.kind == AcsRegion::Kind::ColumnBand) {
        const int n = acs.acs.col_end - acs.acs.col_begin;
        for (int c = acs.acs.col_begin; c < acs.acs.col_end; ++c) {
            const double t = std::sin(kPi * (c - acs.acs.col_begin + 1) / (n + 1));
            for (int r = 0; r < h; ++r) win.at(r, c) = t * t;
        }
    } else {
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (!acs.acs.contains(r, c)) continue;
                const double d = std::hypot(r - acs.acs.center_row, c - acs.acs.center_col);
                win.at(r, c) = 0.5 * (1.0 + std::cos(kPi * d / (acs.acs.radius + 1.0)));
            }
        }
    }

    CoilStack lowres;
    lowres.reserve(masked_kspace.size());
    for (const auto& coil : masked_kspace) {
        ComplexImage k(h, w);
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) k.at(r, c) = coil.at(r, c) * win.at(r, c);
        lowres.push_back(ifft2c(k));
    }

    RealImage combined = rss(lowres);
    double peak = 0.0;
    for (size_t i = 0; i < combined.size(); ++i) peak = std::max(peak, combined[i]);
    const double support = 1e-6 * peak;

    CoilStack maps;
    maps.reserve(lowres.size());
    for (const auto& c : lowres) {
        ComplexImage s(h, w);
        for (size_t i = 0; i < s.size(); ++i)
            s[i] = combined[i] < support ? cplx{0.0, 0.0} : c[i] / (combined[i] + 1e-12);
        maps.push_back(std::move(s));
    }
    return maps;
}

RealImage rss(const CoilStack& coil_images) {
    require_coherent_stack(coil_images, "rss");
    RealImage out(coil_images.front().height(), coil_images.front().width());
    for (size_t i = 0; i < out.size(); ++i) {
        double s = 0.0;
        for (const auto& c : coil_images) s += std::norm(c[i]);
        out[i] = std::sqrt(s);
    }
    return out;
}

}  // namespace kslab
