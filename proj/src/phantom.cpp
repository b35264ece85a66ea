#include "kslab/phantom.hpp"

#include <array>
#include <cmath>

#include "kslab/rng.hpp"

namespace kslab {
namespace {

constexpr double kPi = 3.14159265358979323846;

// intensity, semi-axis a, semi-axis b, center x, center y, tilt in degrees
using Ellipse = std::array<double, 6>;

constexpr std::array<Ellipse, 10> kModifiedSheppLogan = {{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
    {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
    {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
    {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
}};

RealImage rasterize(int height, int width, const std::array<Ellipse, 10>& ellipses) {
    RealImage img(height, width);
    const double sy = height > 1 ? 2.0 / (height - 1) : 0.0;
    const double sx = width > 1 ? 2.0 / (width - 1) : 0.0;
    for (int r = 0; r < height; ++r) {
        const double y = 1.0 - r * sy;
        for (int c = 0; c < width; ++c) {
            const double x = -1.0 + c * sx;
            double v = 0.0;
            for (const Ellipse& e : ellipses) {
                const double phi = e[5] * kPi / 180.0;
                const double dx = x - e[3], dy = y - e[4];
                const double xr = dx * std::cos(phi) + dy * std::sin(phi);
                const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
                const double q = (xr * xr) / (e[1] * e[1]) + (yr * yr) / (e[2] * e[2]);
                if (q <= 1.0) v += e[0];
            }
            img.at(r, c) = std::min(1.0, std::max(0.0, v));
        }
    }
    return img;
}

}  // namespace

RealImage shepp_logan_phantom(int height, int width) {
    return rasterize(height, width, kModifiedSheppLogan);
}

RealImage perturbed_shepp_logan(int height, int width, uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x5048414e544f4dull));
    auto jitter = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform01(); };
    std::array<Ellipse, 10> ellipses = kModifiedSheppLogan;
    for (Ellipse& e : ellipses) {
        e[0] *= jitter(0.9, 1.1);
        e[1] *= jitter(0.95, 1.05);
        e[2] *= jitter(0.95, 1.05);
        e[3] += jitter(-0.04, 0.04);
        e[4] += jitter(-0.04, 0.04);
        e[5] += jitter(-5.0, 5.0);
    }
    return rasterize(height, width, ellipses);
}

}  // namespace kslab
