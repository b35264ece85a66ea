#include <cmath>
#include <vector>

#include "doctest.h"
#include "kslab/coils.hpp"
#include "kslab/forward.hpp"
#include "kslab/metrics.hpp"
#include "kslab/phantom.hpp"
#include "kslab/rng.hpp"
#include "kslab/sampling.hpp"
#include "kslab/tape.hpp"

using namespace kslab;

namespace {

Tensor random_tensor(int a, int b, int h, int w, Rng& rng, double scale = 1.0) {
    Tensor t(a, b, h, w);
    for (double& v : t.v) v = scale * rng.normal();
    return t;
}

/** Quadruple-loop same-padded convolution with explicit bounds checks. */
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int ci = x.d1, h = x.d2, wd = x.d3, co = w.d0, k = w.d2, p = k / 2;
    Tensor out(1, co, h, wd);
    for (int oc = 0; oc < co; ++oc)
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < wd; ++c) {
                double acc = b.v[size_t(oc)];
                for (int icc = 0; icc < ci; ++icc)
                    for (int u = 0; u < k; ++u)
                        for (int v = 0; v < k; ++v) {
                            const int rr = r + u - p, cc = c + v - p;
                            if (rr < 0 || rr >= h || cc < 0 || cc >= wd) continue;
                            acc += w.at(oc, icc, u, v) * x.at(0, icc, rr, cc);
                        }
                out.at(0, oc, r, c) = acc;
            }
    return out;
}

double rel_gap(double a, double n) { return std::abs(a - n) / std::max(1.0, std::abs(n)); }

}  // namespace

TEST_CASE("same-padded convolution matches the quadruple-loop reference") {
    Rng rng(77);
    for (auto [ci, co, k, h, w] : {std::array<int, 5>{1, 1, 3, 8, 8},
                                   std::array<int, 5>{2, 16, 5, 12, 10},
                                   std::array<int, 5>{32, 16, 3, 9, 14},
                                   std::array<int, 5>{16, 2, 3, 16, 16}}) {
        Tensor x = random_tensor(1, ci, h, w, rng);
        Tensor wt = random_tensor(co, ci, k, k, rng);
        Tensor b = random_tensor(co, 1, 1, 1, rng);
        Tensor fast = nn::conv2d_same(x, wt, b);
        Tensor ref = naive_conv(x, wt, b);
        for (size_t i = 0; i < fast.size(); ++i)
            CHECK(std::abs(fast.v[i] - ref.v[i]) <= 1e-12 * std::max(1.0, std::abs(ref.v[i])));
    }
}

TEST_CASE("convolution gradients agree with finite differences") {
    Rng rng(78);
    const int ci = 3, co = 4, k = 3, h = 7, w = 6;
    Tensor x0 = random_tensor(1, ci, h, w, rng);
    Tensor w0 = random_tensor(co, ci, k, k, rng);
    Tensor b0 = random_tensor(co, 1, 1, 1, rng);
    Tensor probe = random_tensor(1, co, h, w, rng);  // fixed cotangent field

    auto loss_of = [&](const Tensor& x, const Tensor& wt, const Tensor& b) {
        Tensor y = nn::conv2d_same(x, wt, b);
        double acc = 0.0;
        for (size_t i = 0; i < y.size(); ++i) acc += probe.v[i] * y.v[i];
        return acc;
    };

    Tape tape;
    Tape::Id xi = tape.leaf(x0, true);
    Tape::Id wi = tape.leaf(w0, true);
    Tape::Id bi = tape.leaf(b0, true);
    Tape::Id yi = tape.conv2d(xi, wi, bi);
    Tape::Id prod = tape.mul(yi, tape.leaf(probe));
    double direct = 0.0;
    for (size_t i = 0; i < tape.value(prod).size(); ++i) direct += tape.value(prod).v[i];
    CHECK(direct == doctest::Approx(loss_of(x0, w0, b0)).epsilon(1e-12));

    // Fold channels with a ones 1x1 kernel, then fold space through the sum
    // of deviations from a target far below every value: the distance is
    // always value - target, so its gradient is exactly one per entry.
    Tensor ones_w(1, co, 1, 1);
    for (double& v : ones_w.v) v = 1.0;
    Tensor zero_b(1, 1, 1, 1);
    Tape::Id folded = tape.conv2d(prod, tape.leaf(ones_w), tape.leaf(zero_b));
    RealImage low(h, w, -1e9);
    Tape::Id total = tape.l1_against(folded, &low);
    tape.backward(total);

    const double step = 1e-6;
    auto check_fd = [&](Tensor& host, const Tensor& grad, int count, auto apply) {
        Rng pick(91);
        for (int t = 0; t < count; ++t) {
            const size_t i = pick.below(host.v.size());
            const double keep = host.v[i];
            host.v[i] = keep + step;
            const double hi = apply();
            host.v[i] = keep - step;
            const double lo = apply();
            host.v[i] = keep;
            const double fd = (hi - lo) / (2.0 * step);
            CHECK(rel_gap(grad.v[i], fd) < 1e-6);
        }
    };
    check_fd(x0, tape.grad(xi), 24, [&] { return loss_of(x0, w0, b0); });
    check_fd(w0, tape.grad(wi), 24, [&] { return loss_of(x0, w0, b0); });
    check_fd(b0, tape.grad(bi), co, [&] { return loss_of(x0, w0, b0); });
}

TEST_CASE("elementwise graph gradients agree with finite differences") {
    Rng rng(79);
    const int c = 2, h = 6, w = 5;
    Tensor a0 = random_tensor(1, c, h, w, rng);
    Tensor b0 = random_tensor(1, c, h, w, rng);
    RealImage zero(h, w);

    struct Handles {
        Tape::Id a, b, loss;
    };
    // Fold to a scalar by summing a sigmoid plane: values stay positive and
    // order one, so the distance to zero is smooth and finite differences
    // keep full precision.
    auto build = [&](Tape& tape, const Tensor& a, const Tensor& b) {
        Handles h2{};
        h2.a = tape.leaf(a, true);
        h2.b = tape.leaf(b, true);
        Tape::Id mix = tape.mul(tape.sigmoid(h2.a), tape.tanh_(h2.b));
        Tape::Id gate = tape.relu(tape.sub(mix, tape.affine(h2.b, 0.25, 0.1)));
        Tape::Id both = tape.concat_c(gate, tape.add(mix, h2.a));
        Tensor fold_w(1, 2 * c, 1, 1);
        for (size_t i = 0; i < fold_w.v.size(); ++i) fold_w.v[i] = 0.5 + 0.1 * double(i);
        Tensor fold_b(1, 1, 1, 1);
        Tape::Id plane = tape.conv2d(both, tape.leaf(fold_w), tape.leaf(fold_b));
        h2.loss = tape.l1_against(tape.sigmoid(plane), &zero);
        return h2;
    };
    auto eval = [&](const Tensor& a, const Tensor& b) {
        Tape fresh;
        return fresh.value(build(fresh, a, b).loss).v[0];
    };

    Tape tape;
    Handles hs = build(tape, a0, b0);
    tape.backward(hs.loss);

    const double step = 1e-6;
    Rng pick(17);
    for (int t = 0; t < 30; ++t) {
        Tensor* host = (t % 2 == 0) ? &a0 : &b0;
        const Tensor& g = tape.grad(t % 2 == 0 ? hs.a : hs.b);
        const size_t i = pick.below(host->v.size());
        const double keep = host->v[i];
        host->v[i] = keep + step;
        const double hi = eval(a0, b0);
        host->v[i] = keep - step;
        const double lo = eval(a0, b0);
        host->v[i] = keep;
        CHECK(rel_gap(g.v[i], (hi - lo) / (2.0 * step)) < 1e-5);
    }
}

TEST_CASE("gradients accumulate across shared subexpressions") {
    Tensor x(1, 1, 1, 1);
    x.v[0] = 3.0;
    RealImage low(1, 1, -1e9);
    Tape tape;
    Tape::Id xi = tape.leaf(x, true);
    Tape::Id sq = tape.mul(xi, xi);
    Tape::Id sum = tape.add(sq, xi);  // f = x^2 + x, f' = 2x + 1
    Tape::Id loss = tape.l1_against(sum, &low);
    tape.backward(loss);
    CHECK(tape.grad(xi).v[0] == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("modulus node value and gradient are exact") {
    Rng rng(80);
    const int h = 5, w = 4;
    Tensor x0 = random_tensor(1, 2, h, w, rng);
    for (double& v : x0.v) v += (v >= 0.0 ? 0.5 : -0.5);  // keep away from the origin
    RealImage zero(h, w);  // moduli stay positive, so the distance sum is just their sum

    auto eval = [&](const Tensor& x) {
        Tape tape;
        Tape::Id xi = tape.leaf(x, true);
        Tape::Id m = tape.magnitude_pair(xi);
        return tape.value(tape.l1_against(m, &zero)).v[0];
    };

    Tape tape;
    Tape::Id xi = tape.leaf(x0, true);
    Tape::Id m = tape.magnitude_pair(xi);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double re = x0.at(0, 0, r, c), im = x0.at(0, 1, r, c);
            CHECK(tape.value(m).at(0, 0, r, c) ==
                  doctest::Approx(std::hypot(re, im)).epsilon(1e-14));
        }
    Tape::Id loss = tape.l1_against(m, &zero);
    tape.backward(loss);
    const double step = 1e-7;
    for (size_t i = 0; i < x0.v.size(); i += 3) {
        const double keep = x0.v[i];
        x0.v[i] = keep + step;
        const double hi = eval(x0);
        x0.v[i] = keep - step;
        const double lo = eval(x0);
        x0.v[i] = keep;
        CHECK(rel_gap(tape.grad(xi).v[i], (hi - lo) / (2.0 * step)) < 1e-6);
    }
}

TEST_CASE("similarity node shares the metric value and differentiates cleanly") {
    const int h = 24, w = 24;
    RealImage target = shepp_logan_phantom(h, w);
    Rng rng(81);
    Tensor pred(1, 1, h, w);
    for (size_t i = 0; i < pred.v.size(); ++i) pred.v[i] = target[i] + 0.05 * rng.normal();
    const double range = 1.0;

    Tape tape;
    Tape::Id pi = tape.leaf(pred, true);
    Tape::Id s = tape.ssim_against(pi, &target, range);
    RealImage pred_img(h, w);
    for (size_t i = 0; i < pred_img.size(); ++i) pred_img[i] = pred.v[i];
    CHECK(tape.value(s).v[0] == ssim(pred_img, target, range));  // same code path

    tape.backward(s);
    const double step = 1e-6;
    Rng pick(19);
    for (int t = 0; t < 20; ++t) {
        const size_t i = pick.below(pred.v.size());
        const double keep = pred.v[i];
        auto eval = [&] {
            RealImage img(h, w);
            for (size_t j = 0; j < img.size(); ++j) img[j] = pred.v[j];
            return ssim(img, target, range);
        };
        pred.v[i] = keep + step;
        const double hi = eval();
        pred.v[i] = keep - step;
        const double lo = eval();
        pred.v[i] = keep;
        const double fd = (hi - lo) / (2.0 * step);
        CHECK(std::abs(tape.grad(pi).v[i] - fd) <= 1e-5 * std::max(1e-3, std::abs(fd)));
    }
}

TEST_CASE("data-term gradient node matches the forward library and self-transposes") {
    const int h = 16, w = 16;
    RealImage src = shepp_logan_phantom(h, w);
    CoilStack sens = simulate_sensitivities(h, w, 3);
    SamplingMask mask = make_rectilinear_mask(h, w, 2.0, 5);
    CoilStack y = apply_mask(simulate_acquisition(src, sens, 0.01, 2), mask);
    NllConfig cfg;
    cfg.sigma2 = 0.5;

    Rng rng(83);
    Tensor x0 = random_tensor(1, 2, h, w, rng, 0.3);
    Tape tape;
    Tape::Id xi = tape.leaf(x0, true);
    Tape::Id gi = tape.likelihood_gradient(xi, &sens, &y, &mask, cfg.sigma2);
    ComplexImage direct = nll_gradient(complex_from_tensor(x0), sens, y, mask, cfg);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            CHECK(tape.value(gi).at(0, 0, r, c) == direct.at(r, c).real());
            CHECK(tape.value(gi).at(0, 1, r, c) == direct.at(r, c).imag());
        }

    // Scalar probe loss: contract the gradient field with a fixed pattern.
    Tensor probe = random_tensor(1, 2, h, w, rng);
    Tape::Id prod = tape.mul(gi, tape.leaf(probe));
    Tensor fold_w(1, 2, 1, 1);
    fold_w.v = {1.0, 1.0};
    Tensor fold_b(1, 1, 1, 1);
    Tape::Id plane = tape.conv2d(prod, tape.leaf(fold_w), tape.leaf(fold_b));
    RealImage low(h, w, -1e9);
    Tape::Id loss = tape.l1_against(plane, &low);
    tape.backward(loss);

    auto eval = [&](const Tensor& x) {
        ComplexImage g = nll_gradient(complex_from_tensor(x), sens, y, mask, cfg);
        double acc = 0.0;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c)
                acc += probe.at(0, 0, r, c) * g.at(r, c).real() +
                       probe.at(0, 1, r, c) * g.at(r, c).imag();
        return acc;
    };
    const double step = 1e-6;
    Rng pick(23);
    for (int t = 0; t < 16; ++t) {
        const size_t i = pick.below(x0.v.size());
        const double keep = x0.v[i];
        x0.v[i] = keep + step;
        const double hi = eval(x0);
        x0.v[i] = keep - step;
        const double lo = eval(x0);
        x0.v[i] = keep;
        CHECK(rel_gap(tape.grad(xi).v[i], (hi - lo) / (2.0 * step)) < 1e-6);
    }
}

TEST_CASE("scalar folds combine and backpropagate linearly") {
    Tensor a(1, 1, 1, 1), b(1, 1, 1, 1);
    a.v[0] = 2.0;
    b.v[0] = -3.0;
    Tape tape;
    Tape::Id ai = tape.leaf(a, true);
    Tape::Id bi = tape.leaf(b, true);
    Tape::Id s = tape.weighted_sum({ai, bi}, {0.5, -2.0}, 7.0);
    CHECK(tape.value(s).v[0] == doctest::Approx(0.5 * 2.0 + 6.0 + 7.0).epsilon(1e-15));
    tape.backward(s);
    CHECK(tape.grad(ai).v[0] == 0.5);
    CHECK(tape.grad(bi).v[0] == -2.0);
}
