#include "kslab/recon.hpp"

#include <cmath>
#include <stdexcept>

#include "kslab/errors.hpp"
#include "kslab/fft.hpp"

namespace kslab {
namespace {

constexpr int kRestartStride = 10;

double re_dot(const ComplexImage& a, const ComplexImage& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        acc += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return acc;
}

void require_finite(const ComplexImage& x, const char* what) {
    for (size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i].real()) || !std::isfinite(x[i].imag()))
            throw divergence_error(std::string(what) + ": non-finite value");
}

}  // namespace

RealImage zero_filled_rss(const CoilStack& masked_kspace) {
    require_coherent_stack(masked_kspace, "zero_filled_rss");
    CoilStack images;
    images.reserve(masked_kspace.size());
    for (const auto& coil : masked_kspace) images.push_back(ifft2c(coil));
    return rss(images);
}

ComplexImage zero_filled_sense(const CoilStack& masked_kspace, const CoilStack& sens) {
    return adjoint_model(masked_kspace, sens);
}

ComplexImage solve_map_cg(const CoilStack& masked_kspace, const CoilStack& sens,
                          const SamplingMask& mask, const MapObjective& obj,
                          CgReport* report) {
    if (obj.reg_lambda < 0.0) throw std::invalid_argument("solve_map_cg: negative lambda");
    if (obj.tol <= 0.0) throw std::invalid_argument("solve_map_cg: tol must be positive");
    if (obj.max_iters < 1) throw std::invalid_argument("solve_map_cg: max_iters must be >= 1");

    const double inv_s2 = 1.0 / obj.data_term.sigma2;
    auto normal_op = [&](const ComplexImage& v) {
        ComplexImage out = adjoint_model(apply_mask(forward_model(v, sens), mask), sens);
        for (size_t i = 0; i < out.size(); ++i)
            out[i] = inv_s2 * out[i] + obj.reg_lambda * v[i];
        return out;
    };
    auto objective = [&](const ComplexImage& v) {
        double ridge = 0.0;
        for (size_t i = 0; i < v.size(); ++i) ridge += std::norm(v[i]);
        return nll(v, sens, masked_kspace, mask, obj.data_term) + obj.reg_lambda * ridge;
    };

    ComplexImage x = zero_filled_sense(masked_kspace, sens);
    ComplexImage b = x;
    for (size_t i = 0; i < b.size(); ++i) b[i] *= inv_s2;

    CgReport trace;
    ComplexImage r(x.height(), x.width()), p(x.height(), x.width());
    ComplexImage mr(x.height(), x.width()), mp(x.height(), x.width());
    double r_dot_mr = 0.0;
    auto restart = [&] {
        ComplexImage mx = normal_op(x);
        for (size_t i = 0; i < r.size(); ++i) r[i] = b[i] - mx[i];
        p = r;
        mr = normal_op(r);
        mp = mr;
        r_dot_mr = re_dot(r, mr);
        trace.objectives.push_back(objective(x));
    };

    restart();
    trace.initial_residual = std::sqrt(re_dot(r, r));
    trace.residual_norms.push_back(trace.initial_residual);
    const double stop = obj.tol * std::sqrt(re_dot(b, b));

    int iter = 0;
    for (; iter < obj.max_iters; ++iter) {
        const double rn = std::sqrt(re_dot(r, r));
        if (!std::isfinite(rn)) throw divergence_error("solve_map_cg: residual diverged");
        if (rn <= stop) {
            trace.converged = true;
            break;
        }
        if (iter > 0 && iter % kRestartStride == 0) restart();
        const double denom = re_dot(mp, mp);
        if (denom <= 0.0) break;  // stagnated search direction
        const double alpha = r_dot_mr / denom;
        for (size_t i = 0; i < x.size(); ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * mp[i];
        }
        ComplexImage mr_next = normal_op(r);
        const double r_dot_mr_next = re_dot(r, mr_next);
        const double beta = r_dot_mr > 0.0 ? r_dot_mr_next / r_dot_mr : 0.0;
        for (size_t i = 0; i < p.size(); ++i) {
            p[i] = r[i] + beta * p[i];
            mp[i] = mr_next[i] + beta * mp[i];
        }
        mr = mr_next;
        r_dot_mr = r_dot_mr_next;
        trace.residual_norms.push_back(std::sqrt(re_dot(r, r)));
    }
    require_finite(x, "solve_map_cg");

    trace.iterations = iter;
    trace.final_residual = std::sqrt(re_dot(r, r));
    trace.objectives.push_back(objective(x));
    if (report) *report = std::move(trace);
    return x;
}

}  // namespace kslab
