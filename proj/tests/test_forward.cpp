#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "kslab/coils.hpp"
#include "kslab/fft.hpp"
#include "kslab/forward.hpp"
#include "kslab/phantom.hpp"
#include "kslab/rng.hpp"
#include "kslab/sampling.hpp"
#include "oracles.hpp"

using namespace kslab;

namespace {

ComplexImage random_complex(int h, int w, Rng& rng) {
    ComplexImage x(h, w);
    for (size_t i = 0; i < x.size(); ++i) x[i] = {rng.normal(), rng.normal()};
    return x;
}

cplx dot(const ComplexImage& a, const ComplexImage& b) {
    cplx acc{0.0, 0.0};
    for (size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
    return acc;
}

cplx dot(const CoilStack& a, const CoilStack& b) {
    cplx acc{0.0, 0.0};
    for (size_t k = 0; k < a.size(); ++k) acc += dot(a[k], b[k]);
    return acc;
}

SamplingMask scatter_mask(int h, int w, Rng& rng) {
    SamplingMask m;
    m.height = h;
    m.width = w;
    m.on.assign(size_t(h) * w, 0);
    for (auto& v : m.on) v = rng.uniform01() < 0.5 ? 1 : 0;
    m.on[0] = 1;  // never all-zero
    return m;
}

}  // namespace

TEST_CASE("phantom hits the known tissue plateaus") {
    RealImage p = shepp_logan_phantom(65, 65);
    // Grid center maps to the continuous origin: skull 1.0 minus brain 0.8.
    CHECK(p.at(32, 32) == doctest::Approx(0.2).epsilon(1e-12));
    double lo = 1e9, hi = -1e9;
    size_t support = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        lo = std::min(lo, p[i]);
        hi = std::max(hi, p[i]);
        if (p[i] > 0.0) ++support;
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
    const double frac = double(support) / double(p.size());
    CHECK(frac > 0.3);
    CHECK(frac < 0.8);
}

TEST_CASE("perturbed phantom is seed-deterministic and seed-sensitive") {
    RealImage a = perturbed_shepp_logan(64, 64, 7);
    RealImage b = perturbed_shepp_logan(64, 64, 7);
    RealImage c = perturbed_shepp_logan(64, 64, 8);
    double diff_ab = 0.0, diff_ac = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        diff_ab += std::abs(a[i] - b[i]);
        diff_ac += std::abs(a[i] - c[i]);
        CHECK(a[i] >= 0.0);
        CHECK(a[i] <= 1.0);
    }
    CHECK(diff_ab == 0.0);
    CHECK(diff_ac > 0.0);
}

TEST_CASE("simulated sensitivities are jointly normalized") {
    for (int n : {1, 4, 12}) {
        CoilStack s = simulate_sensitivities(64, 64, n);
        REQUIRE(s.size() == size_t(n));
        for (size_t i = 0; i < s.front().size(); ++i) {
            double acc = 0.0;
            for (const auto& coil : s) acc += std::norm(coil[i]);
            CHECK(acc == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    // A single coil reduces to unit magnitude everywhere.
    CoilStack one = simulate_sensitivities(48, 40, 1);
    for (size_t i = 0; i < one.front().size(); ++i)
        CHECK(std::abs(one.front()[i]) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coil array is balanced around the image center") {
    const int h = 64, w = 64;
    CoilStack s = simulate_sensitivities(h, w, 12);
    double mr = 0.0, mc = 0.0;
    for (const auto& coil : s) {
        double wsum = 0.0, rsum = 0.0, csum = 0.0;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double m = std::norm(coil.at(r, c));
                wsum += m;
                rsum += m * r;
                csum += m * c;
            }
        mr += rsum / wsum;
        mc += csum / wsum;
    }
    mr /= 12.0;
    mc /= 12.0;
    // Per-coil centroids sit on a ring; their mean collapses to the center.
    CHECK(std::abs(mr - (h - 1) / 2.0) < 1.0);
    CHECK(std::abs(mc - (w - 1) / 2.0) < 1.0);
}

TEST_CASE("calibration recovers simulated sensitivities on the support") {
    const int h = 64, w = 64;
    RealImage src = shepp_logan_phantom(h, w);
    SamplingMask full = make_full_mask(h, w);

    // Single coil: the estimate is the coil image over its own magnitude.
    CoilStack s1 = simulate_sensitivities(h, w, 1);
    CoilStack y1 = apply_mask(simulate_acquisition(src, s1, 0.0, 1), full);
    CoilStack e1 = estimate_sensitivities_from_acs(y1, extract_acs(full));
    double mad = 0.0;
    size_t n_sup = 0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (src.at(r, c) < 0.1) continue;
            mad += std::abs(std::abs(e1.front().at(r, c)) - 1.0);
            ++n_sup;
        }
    CHECK(mad / double(n_sup) < 0.05);

    // Four coils: estimated magnitudes track the simulated ones.
    CoilStack s4 = simulate_sensitivities(h, w, 4);
    CoilStack y4 = apply_mask(simulate_acquisition(src, s4, 0.0, 2), full);
    CoilStack e4 = estimate_sensitivities_from_acs(y4, extract_acs(full));
    for (size_t k = 0; k < 4; ++k)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                if (src.at(r, c) < 0.1) continue;
                CHECK(std::abs(std::abs(e4[k].at(r, c)) - std::abs(s4[k].at(r, c))) < 0.1);
            }
}

TEST_CASE("masked forward and adjoint satisfy the dot-product identity") {
    Rng rng(20240517);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 16 + int(rng.below(3)) * 8;   // 16, 24, 32
        const int w = 16 + int(rng.below(3)) * 12;  // 16, 28, 40
        const int n_coils = 1 + int(rng.below(6));
        CoilStack sens = simulate_sensitivities(h, w, n_coils);
        SamplingMask mask;
        switch (trial % 3) {
            case 0: mask = make_full_mask(h, w); break;
            case 1: mask = make_rectilinear_mask(h, w, 2.0, rng.next_u64()); break;
            default: mask = scatter_mask(h, w, rng); break;
        }
        ComplexImage x = random_complex(h, w, rng);
        CoilStack y;
        for (int k = 0; k < n_coils; ++k) y.push_back(random_complex(h, w, rng));

        CoilStack ax = apply_mask(forward_model(x, sens), mask);
        ComplexImage aty = adjoint_model(apply_mask(y, mask), sens);
        const cplx lhs = dot(ax, y), rhs = dot(x, aty);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("data term vanishes at the noiseless source") {
    const int h = 32, w = 32;
    RealImage src = shepp_logan_phantom(h, w);
    CoilStack sens = simulate_sensitivities(h, w, 4);
    SamplingMask mask = make_rectilinear_mask(h, w, 2.0, 5);
    CoilStack y = apply_mask(simulate_acquisition(src, sens, 0.0, 0), mask);
    CHECK(nll(to_complex(src), sens, y, mask) == 0.0);
    // Perturbing the source makes it strictly positive.
    ComplexImage x = to_complex(src);
    x.at(h / 2, w / 2) += 0.1;
    CHECK(nll(x, sens, y, mask) > 0.0);
}

TEST_CASE("finite differences recover twice the reported gradient") {
    Rng rng(991);
    const double step = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        const int h = 16, w = 16;
        const int n_coils = 1 + int(rng.below(4));
        CoilStack sens = simulate_sensitivities(h, w, n_coils);
        SamplingMask mask = (trial % 2) ? scatter_mask(h, w, rng)
                                        : make_rectilinear_mask(h, w, 2.0, rng.next_u64());
        NllConfig cfg;
        cfg.sigma2 = 0.25 + rng.uniform01();
        ComplexImage x = random_complex(h, w, rng);
        CoilStack y;
        for (int k = 0; k < n_coils; ++k) y.push_back(random_complex(h, w, rng));
        y = apply_mask(y, mask);

        ComplexImage g = nll_gradient(x, sens, y, mask, cfg);
        for (int probe = 0; probe < 6; ++probe) {
            const int r = int(rng.below(uint64_t(h))), c = int(rng.below(uint64_t(w)));
            for (int comp = 0; comp < 2; ++comp) {
                const cplx delta = comp == 0 ? cplx{step, 0.0} : cplx{0.0, step};
                ComplexImage xp = x, xm = x;
                xp.at(r, c) += delta;
                xm.at(r, c) -= delta;
                const double fd =
                    (nll(xp, sens, y, mask, cfg) - nll(xm, sens, y, mask, cfg)) / (2.0 * step);
                const double got = comp == 0 ? 2.0 * g.at(r, c).real() : 2.0 * g.at(r, c).imag();
                CHECK(std::abs(fd - got) <= 1e-5 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("acquisition noise matches the requested level") {
    const int h = 64, w = 64;
    RealImage src = shepp_logan_phantom(h, w);
    CoilStack sens = simulate_sensitivities(h, w, 4);
    CoilStack clean = simulate_acquisition(src, sens, 0.0, 0);
    const double noise_std = 0.01;
    double acc = 0.0;
    size_t n = 0;
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        CoilStack noisy = simulate_acquisition(src, sens, noise_std, seed);
        for (size_t k = 0; k < noisy.size(); ++k)
            for (size_t i = 0; i < noisy[k].size(); ++i) {
                acc += std::norm(noisy[k][i] - clean[k][i]);
                n += 2;  // two real components per sample
            }
    }
    const double per_component = std::sqrt(acc / double(n));
    CHECK(per_component == doctest::Approx(noise_std).epsilon(0.1));
    // Same seed reproduces the draw bit for bit.
    CoilStack a = simulate_acquisition(src, sens, noise_std, 3);
    CoilStack b = simulate_acquisition(src, sens, noise_std, 3);
    for (size_t k = 0; k < a.size(); ++k)
        for (size_t i = 0; i < a[k].size(); ++i) CHECK(a[k][i] == b[k][i]);
}

TEST_CASE("root-sum-of-squares combines quadrature pairs") {
    ComplexImage a(4, 4), b(4, 4);
    for (size_t i = 0; i < a.size(); ++i) {
        a[i] = {3.0, 0.0};
        b[i] = {0.0, 4.0};
    }
    RealImage m = rss({a, b});
    for (size_t i = 0; i < m.size(); ++i) CHECK(m[i] == doctest::Approx(5.0).epsilon(1e-15));
}
