#include "kslab/forward.hpp"

#include "kslab/fft.hpp"
#include "kslab/rng.hpp"

namespace kslab {
namespace {

void require_setup(const CoilStack& sens, const ComplexImage& x, const char* what) {
    require_coherent_stack(sens, what);
    require_same_shape(sens.front(), x, what);
}

}  // namespace

CoilStack forward_model(const ComplexImage& x, const CoilStack& sens) {
    require_setup(sens, x, "forward_model");
    CoilStack out;
    out.reserve(sens.size());
    for (const auto& s : sens) {
        ComplexImage weighted(x.height(), x.width());
        for (size_t i = 0; i < x.size(); ++i) weighted[i] = s[i] * x[i];
        out.push_back(fft2c(weighted));
    }
    return out;
}

ComplexImage adjoint_model(const CoilStack& kspace, const CoilStack& sens) {
    require_coherent_stack(kspace, "adjoint_model");
    require_coherent_stack(sens, "adjoint_model");
    if (kspace.size() != sens.size())
        throw std::invalid_argument("adjoint_model: coil count mismatch");
    require_same_shape(kspace.front(), sens.front(), "adjoint_model");
    ComplexImage acc(kspace.front().height(), kspace.front().width());
    for (size_t k = 0; k < kspace.size(); ++k) {
        ComplexImage img = ifft2c(kspace[k]);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += std::conj(sens[k][i]) * img[i];
    }
    return acc;
}

double nll(const ComplexImage& x, const CoilStack& sens, const CoilStack& masked_kspace,
           const SamplingMask& mask, const NllConfig& cfg) {
    require_setup(sens, x, "nll");
    if (sens.size() != masked_kspace.size()) throw std::invalid_argument("nll: coil mismatch");
    double acc = 0.0;
    for (size_t k = 0; k < sens.size(); ++k) {
        ComplexImage weighted(x.height(), x.width());
        for (size_t i = 0; i < x.size(); ++i) weighted[i] = sens[k][i] * x[i];
        ComplexImage f = fft2c(weighted);
        for (size_t i = 0; i < f.size(); ++i) {
            if (!mask.on[i]) continue;
            acc += std::norm(f[i] - masked_kspace[k][i]);
        }
    }
    return acc / cfg.sigma2;
}

ComplexImage nll_gradient(const ComplexImage& x, const CoilStack& sens,
                          const CoilStack& masked_kspace, const SamplingMask& mask,
                          const NllConfig& cfg) {
    require_setup(sens, x, "nll_gradient");
    if (sens.size() != masked_kspace.size())
        throw std::invalid_argument("nll_gradient: coil mismatch");
    ComplexImage acc(x.height(), x.width());
    for (size_t k = 0; k < sens.size(); ++k) {
        ComplexImage weighted(x.height(), x.width());
        for (size_t i = 0; i < x.size(); ++i) weighted[i] = sens[k][i] * x[i];
        ComplexImage f = fft2c(weighted);
        // Residual with the mask applied on both terms.
        for (size_t i = 0; i < f.size(); ++i)
            f[i] = mask.on[i] ? f[i] - masked_kspace[k][i] : cplx{0.0, 0.0};
        ComplexImage img = ifft2c(f);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += std::conj(sens[k][i]) * img[i];
    }
    const double inv = 1.0 / cfg.sigma2;
    for (size_t i = 0; i < acc.size(); ++i) acc[i] *= inv;
    return acc;
}

CoilStack simulate_acquisition(const RealImage& source, const CoilStack& sens,
                               double noise_std, uint64_t seed) {
    require_coherent_stack(sens, "simulate_acquisition");
    if (sens.front().height() != source.height() || sens.front().width() != source.width())
        throw std::invalid_argument("simulate_acquisition: shape mismatch");
    if (noise_std < 0.0) throw std::invalid_argument("simulate_acquisition: negative noise");
    CoilStack out = forward_model(to_complex(source), sens);
    if (noise_std > 0.0) {
        Rng rng(splitmix64(seed ^ 0x4e4f495345ull));
        for (auto& coil : out)
            for (size_t i = 0; i < coil.size(); ++i)
                coil[i] += cplx{noise_std * rng.normal(), noise_std * rng.normal()};
    }
    return out;
}

}  // namespace kslab
