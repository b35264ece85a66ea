#include "kslab/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "kslab/metrics.hpp"

namespace kslab {
namespace {

void require_activation(const Tensor& x, const char* what) {
    if (x.d0 != 1 || x.d1 < 1 || x.d2 < 1 || x.d3 < 1)
        throw std::invalid_argument(std::string(what) + ": expected (1,C,H,W) tensor");
}

/** Copy (1,Ci,H,W) planes into zero-padded (H+2p)x(W+2p) buffers. */
std::vector<double> pad_planes(const Tensor& x, int p) {
    const int ci = x.d1, h = x.d2, w = x.d3;
    const int hp = h + 2 * p, wp = w + 2 * p;
    std::vector<double> pad(size_t(ci) * hp * wp, 0.0);
    for (int c = 0; c < ci; ++c)
        for (int r = 0; r < h; ++r) {
            const double* src = &x.v[(size_t(c) * h + r) * w];
            double* dst = &pad[(size_t(c) * hp + r + p) * wp + p];
            for (int j = 0; j < w; ++j) dst[j] = src[j];
        }
    return pad;
}

RealImage plane_to_image(const Tensor& t) {
    RealImage img(t.d2, t.d3);
    for (size_t i = 0; i < img.size(); ++i) img[i] = t.v[i];
    return img;
}

}  // namespace

Tensor tensor_from_complex(const ComplexImage& x) {
    Tensor t(1, 2, x.height(), x.width());
    for (int r = 0; r < x.height(); ++r)
        for (int c = 0; c < x.width(); ++c) {
            t.at(0, 0, r, c) = x.at(r, c).real();
            t.at(0, 1, r, c) = x.at(r, c).imag();
        }
    return t;
}

ComplexImage complex_from_tensor(const Tensor& t) {
    if (t.d0 != 1 || t.d1 != 2) throw std::invalid_argument("expected (1,2,H,W) tensor");
    ComplexImage x(t.d2, t.d3);
    for (int r = 0; r < t.d2; ++r)
        for (int c = 0; c < t.d3; ++c) x.at(r, c) = {t.at(0, 0, r, c), t.at(0, 1, r, c)};
    return x;
}

namespace nn {

Tensor conv2d_same(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_activation(x, "conv2d_same");
    const int ci = x.d1, h = x.d2, wd = x.d3;
    const int co = w.d0, k = w.d2;
    if (w.d1 != ci || w.d3 != k || k % 2 == 0)
        throw std::invalid_argument("conv2d_same: weight shape mismatch");
    if (b.d0 != co || b.size() != size_t(co))
        throw std::invalid_argument("conv2d_same: bias shape mismatch");
    const int p = k / 2, wp = wd + 2 * p;
    const std::vector<double> pad = pad_planes(x, p);

    Tensor out(1, co, h, wd);
    for (int oc = 0; oc < co; ++oc) {
        double* plane = &out.v[size_t(oc) * h * wd];
        const double bias = b.v[size_t(oc)];
        for (size_t i = 0; i < size_t(h) * wd; ++i) plane[i] = bias;
        for (int icc = 0; icc < ci; ++icc)
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                    const double wv = w.at(oc, icc, u, v);
                    for (int r = 0; r < h; ++r) {
                        const double* src = &pad[(size_t(icc) * (h + 2 * p) + r + u) * wp + v];
                        double* dst = plane + size_t(r) * wd;
                        for (int c = 0; c < wd; ++c) dst[c] += wv * src[c];
                    }
                }
    }
    return out;
}

Tensor conv2d_same_grad_input(const Tensor& gout, const Tensor& w) {
    // Transposed convolution: same-padded conv with the flipped, swapped kernel.
    const int co = w.d0, ci = w.d1, k = w.d2;
    Tensor wt(ci, co, k, k);
    for (int oc = 0; oc < co; ++oc)
        for (int icc = 0; icc < ci; ++icc)
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v)
                    wt.at(icc, oc, k - 1 - u, k - 1 - v) = w.at(oc, icc, u, v);
    Tensor zero_bias(ci, 1, 1, 1);
    return conv2d_same(gout, wt, zero_bias);
}

void conv2d_same_grad_params(const Tensor& gout, const Tensor& x, Tensor* gw, Tensor* gb) {
    const int ci = x.d1, h = x.d2, wd = x.d3;
    const int co = gw->d0, k = gw->d2;
    const int p = k / 2, wp = wd + 2 * p;
    const std::vector<double> pad = pad_planes(x, p);
    for (int oc = 0; oc < co; ++oc) {
        const double* gplane = &gout.v[size_t(oc) * h * wd];
        double bacc = 0.0;
        for (size_t i = 0; i < size_t(h) * wd; ++i) bacc += gplane[i];
        gb->v[size_t(oc)] += bacc;
        for (int icc = 0; icc < ci; ++icc)
            for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                    double acc = 0.0;
                    for (int r = 0; r < h; ++r) {
                        const double* g = gplane + size_t(r) * wd;
                        const double* s = &pad[(size_t(icc) * (h + 2 * p) + r + u) * wp + v];
                        for (int c = 0; c < wd; ++c) acc += g[c] * s[c];
                    }
                    gw->at(oc, icc, u, v) += acc;
                }
    }
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

Tensor tanh_t(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.v) v = std::tanh(v);
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_activation(a, "concat_channels");
    if (a.d0 != b.d0 || a.d2 != b.d2 || a.d3 != b.d3)
        throw std::invalid_argument("concat_channels: spatial shape mismatch");
    Tensor out(1, a.d1 + b.d1, a.d2, a.d3);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mul: shape mismatch");
    Tensor out = a;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.v[i];
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    Tensor out = a;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("sub: shape mismatch");
    Tensor out = a;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b.v[i];
    return out;
}

Tensor affine(const Tensor& x, double scale, double shift) {
    Tensor out = x;
    for (double& v : out.v) v = scale * v + shift;
    return out;
}

Tensor gaussian_valid(const Tensor& x, int n, double sigma) {
    if (x.d0 != 1 || x.d1 != 1) throw std::invalid_argument("gaussian_valid: expected one plane");
    RealImage filtered = gaussian_filter_valid(plane_to_image(x), n, sigma);
    Tensor out(1, 1, filtered.height(), filtered.width());
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = filtered[i];
    return out;
}

}  // namespace nn

Tape::Id Tape::push(Tensor val, bool needs_grad, std::function<void()> back) {
    Node node;
    node.val = std::move(val);
    node.needs_grad = needs_grad;
    if (needs_grad) {
        node.grad = node.val;
        std::fill(node.grad.v.begin(), node.grad.v.end(), 0.0);
        node.back = std::move(back);
    }
    nodes_.push_back(std::move(node));
    return Id(nodes_.size() - 1);
}

Tape::Id Tape::leaf(Tensor v, bool needs_grad) {
    return push(std::move(v), needs_grad, nullptr);
}

Tape::Id Tape::conv2d(Id x, Id w, Id b) {
    Tensor out = nn::conv2d_same(value(x), value(w), value(b));
    const bool ng = needs_grad(x) || needs_grad(w) || needs_grad(b);
    Id id = push(std::move(out), ng, nullptr);
    if (ng)
        nodes_[size_t(id)].back = [this, id, x, w, b] {
            const Tensor& gout = grad_ref(id);
            if (needs_grad(x)) {
                Tensor gx = nn::conv2d_same_grad_input(gout, value(w));
                Tensor& dst = grad_ref(x);
                for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += gx.v[i];
            }
            if (needs_grad(w) || needs_grad(b)) {
                Tensor gw(value(w).d0, value(w).d1, value(w).d2, value(w).d3);
                Tensor gb(value(b).d0, 1, 1, 1);
                nn::conv2d_same_grad_params(gout, value(x), &gw, &gb);
                if (needs_grad(w)) {
                    Tensor& dw = grad_ref(w);
                    for (size_t i = 0; i < dw.v.size(); ++i) dw.v[i] += gw.v[i];
                }
                if (needs_grad(b)) {
                    Tensor& db = grad_ref(b);
                    for (size_t i = 0; i < db.v.size(); ++i) db.v[i] += gb.v[i];
                }
            }
        };
    return id;
}

Tape::Id Tape::relu(Id x) {
    Id id = push(nn::relu(value(x)), needs_grad(x), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, x] {
            const Tensor& gout = grad_ref(id);
            const Tensor& in = value(x);
            Tensor& dst = grad_ref(x);
            for (size_t i = 0; i < dst.v.size(); ++i)
                if (in.v[i] > 0.0) dst.v[i] += gout.v[i];
        };
    return id;
}

Tape::Id Tape::sigmoid(Id x) {
    Id id = push(nn::sigmoid(value(x)), needs_grad(x), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, x] {
            const Tensor& gout = grad_ref(id);
            const Tensor& s = value(id);
            Tensor& dst = grad_ref(x);
            for (size_t i = 0; i < dst.v.size(); ++i)
                dst.v[i] += gout.v[i] * s.v[i] * (1.0 - s.v[i]);
        };
    return id;
}

Tape::Id Tape::tanh_(Id x) {
    Id id = push(nn::tanh_t(value(x)), needs_grad(x), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, x] {
            const Tensor& gout = grad_ref(id);
            const Tensor& t = value(id);
            Tensor& dst = grad_ref(x);
            for (size_t i = 0; i < dst.v.size(); ++i)
                dst.v[i] += gout.v[i] * (1.0 - t.v[i] * t.v[i]);
        };
    return id;
}

Tape::Id Tape::concat_c(Id a, Id b) {
    Id id = push(nn::concat_channels(value(a), value(b)), needs_grad(a) || needs_grad(b),
                 nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, a, b] {
            const Tensor& gout = grad_ref(id);
            const size_t na = value(a).size();
            if (needs_grad(a)) {
                Tensor& dst = grad_ref(a);
                for (size_t i = 0; i < na; ++i) dst.v[i] += gout.v[i];
            }
            if (needs_grad(b)) {
                Tensor& dst = grad_ref(b);
                for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += gout.v[na + i];
            }
        };
    return id;
}

Tape::Id Tape::mul(Id a, Id b) {
    Id id = push(nn::mul(value(a), value(b)), needs_grad(a) || needs_grad(b), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, a, b] {
            const Tensor& gout = grad_ref(id);
            if (needs_grad(a)) {
                Tensor& dst = grad_ref(a);
                const Tensor& vb = value(b);
                for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += gout.v[i] * vb.v[i];
            }
            if (needs_grad(b)) {
                Tensor& dst = grad_ref(b);
                const Tensor& va = value(a);
                for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += gout.v[i] * va.v[i];
            }
        };
    return id;
}

Tape::Id Tape::add(Id a, Id b) {
    Id id = push(nn::add(value(a), value(b)), needs_grad(a) || needs_grad(b), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, a, b] {
            const Tensor& gout = grad_ref(id);
            for (Id src : {a, b})
                if (needs_grad(src)) {
                    Tensor& dst = grad_ref(src);
                    for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += gout.v[i];
                }
        };
    return id;
}

Tape::Id Tape::sub(Id a, Id b) {
    Id id = push(nn::sub(value(a), value(b)), needs_grad(a) || needs_grad(b), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, a, b] {
            const Tensor& gout = grad_ref(id);
            if (needs_grad(a)) {
                Tensor& dst = grad_ref(a);
                for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += gout.v[i];
            }
            if (needs_grad(b)) {
                Tensor& dst = grad_ref(b);
                for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] -= gout.v[i];
            }
        };
    return id;
}

Tape::Id Tape::affine(Id x, double scale, double shift) {
    Id id = push(nn::affine(value(x), scale, shift), needs_grad(x), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, x, scale] {
            const Tensor& gout = grad_ref(id);
            Tensor& dst = grad_ref(x);
            for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += scale * gout.v[i];
        };
    return id;
}

Tape::Id Tape::likelihood_gradient(Id x, const CoilStack* sens, const CoilStack* masked_kspace,
                                   const SamplingMask* mask, double sigma2) {
    NllConfig cfg;
    cfg.sigma2 = sigma2;
    ComplexImage xc = complex_from_tensor(value(x));
    Tensor out = tensor_from_complex(nll_gradient(xc, *sens, *masked_kspace, *mask, cfg));
    Id id = push(std::move(out), needs_grad(x), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, x, sens, mask, sigma2] {
            // The linear part is A^H U A / sigma^2, which is Hermitian, so the
            // pullback reapplies it to the cotangent.
            ComplexImage u = complex_from_tensor(grad_ref(id));
            ComplexImage pulled = adjoint_model(apply_mask(forward_model(u, *sens), *mask), *sens);
            Tensor& dst = grad_ref(x);
            const double inv = 1.0 / sigma2;
            for (int r = 0; r < pulled.height(); ++r)
                for (int c = 0; c < pulled.width(); ++c) {
                    dst.at(0, 0, r, c) += inv * pulled.at(r, c).real();
                    dst.at(0, 1, r, c) += inv * pulled.at(r, c).imag();
                }
        };
    return id;
}

Tape::Id Tape::magnitude_pair(Id x) {
    const Tensor& in = value(x);
    if (in.d0 != 1 || in.d1 != 2)
        throw std::invalid_argument("magnitude_pair: expected (1,2,H,W)");
    Tensor out(1, 1, in.d2, in.d3);
    const size_t plane = out.size();
    for (size_t i = 0; i < plane; ++i)
        out.v[i] = std::sqrt(in.v[i] * in.v[i] + in.v[plane + i] * in.v[plane + i]);
    Id id = push(std::move(out), needs_grad(x), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, x, plane] {
            const Tensor& gout = grad_ref(id);
            const Tensor& m = value(id);
            const Tensor& in2 = value(x);
            Tensor& dst = grad_ref(x);
            for (size_t i = 0; i < plane; ++i) {
                if (m.v[i] <= 0.0) continue;  // subgradient 0 at the origin
                const double s = gout.v[i] / m.v[i];
                dst.v[i] += s * in2.v[i];
                dst.v[plane + i] += s * in2.v[plane + i];
            }
        };
    return id;
}

Tape::Id Tape::l1_against(Id pred, const RealImage* target) {
    const Tensor& p = value(pred);
    if (p.d0 != 1 || p.d1 != 1 || p.d2 != target->height() || p.d3 != target->width())
        throw std::invalid_argument("l1_against: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) acc += std::abs(p.v[i] - (*target)[i]);
    Tensor out(1, 1, 1, 1);
    out.v[0] = acc;
    Id id = push(std::move(out), needs_grad(pred), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, pred, target] {
            const double up = grad_ref(id).v[0];
            const Tensor& pv = value(pred);
            Tensor& dst = grad_ref(pred);
            for (size_t i = 0; i < pv.size(); ++i) {
                const double d = pv.v[i] - (*target)[i];
                if (d > 0.0)
                    dst.v[i] += up;
                else if (d < 0.0)
                    dst.v[i] -= up;
            }
        };
    return id;
}

Tape::Id Tape::ssim_against(Id pred, const RealImage* target, double data_range) {
    const Tensor& p = value(pred);
    if (p.d0 != 1 || p.d1 != 1 || p.d2 != target->height() || p.d3 != target->width())
        throw std::invalid_argument("ssim_against: shape mismatch");
    Tensor out(1, 1, 1, 1);
    out.v[0] = ssim(plane_to_image(p), *target, data_range);
    Id id = push(std::move(out), needs_grad(pred), nullptr);
    if (needs_grad(id))
        nodes_[size_t(id)].back = [this, id, pred, target, data_range] {
            const double up = grad_ref(id).v[0];
            const int n = 11;
            const double sg = 1.5;
            const RealImage pi = plane_to_image(value(pred));
            const RealImage& ti = *target;
            const double c1 = 0.01 * data_range * 0.01 * data_range;
            const double c2 = 0.03 * data_range * 0.03 * data_range;
            RealImage mu1 = gaussian_filter_valid(pi, n, sg);
            RealImage mu2 = gaussian_filter_valid(ti, n, sg);
            RealImage e11(pi.height(), pi.width()), e22(pi.height(), pi.width()),
                e12(pi.height(), pi.width());
            for (size_t i = 0; i < e11.size(); ++i) {
                e11[i] = pi[i] * pi[i];
                e22[i] = ti[i] * ti[i];
                e12[i] = pi[i] * ti[i];
            }
            e11 = gaussian_filter_valid(e11, n, sg);
            e22 = gaussian_filter_valid(e22, n, sg);
            e12 = gaussian_filter_valid(e12, n, sg);

            // Per-window sensitivities of the local score S to (mean, variance,
            // covariance) of the prediction; alpha folds the mean-shift parts.
            RealImage alpha(mu1.height(), mu1.width()), beta(mu1.height(), mu1.width()),
                gamma(mu1.height(), mu1.width());
            for (size_t i = 0; i < mu1.size(); ++i) {
                const double m1 = mu1[i], m2 = mu2[i];
                const double v1 = e11[i] - m1 * m1, v2 = e22[i] - m2 * m2;
                const double cov = e12[i] - m1 * m2;
                const double n1 = 2.0 * m1 * m2 + c1, n2 = 2.0 * cov + c2;
                const double d1 = m1 * m1 + m2 * m2 + c1, d2 = v1 + v2 + c2;
                const double s = (n1 * n2) / (d1 * d2);
                const double ds_dm1 = 2.0 * m2 * n2 / (d1 * d2) - s * 2.0 * m1 / d1;
                const double ds_dv1 = -s / d2;
                const double ds_dcov = 2.0 * n1 / (d1 * d2);
                alpha[i] = ds_dm1 - 2.0 * ds_dv1 * m1 - ds_dcov * m2;
                beta[i] = ds_dv1;
                gamma[i] = ds_dcov;
            }

            // Transpose of the valid filtering: scatter window fields back.
            const std::vector<double> k = gaussian_kernel_1d(n, sg);
            auto scatter = [&](const RealImage& f) {
                RealImage cols(pi.height(), f.width());
                for (int r = 0; r < f.height(); ++r)
                    for (int c = 0; c < f.width(); ++c)
                        for (int t = 0; t < n; ++t) cols.at(r + t, c) += k[t] * f.at(r, c);
                RealImage full(pi.height(), pi.width());
                for (int r = 0; r < cols.height(); ++r)
                    for (int c = 0; c < cols.width(); ++c)
                        for (int t = 0; t < n; ++t) full.at(r, c + t) += k[t] * cols.at(r, c);
                return full;
            };
            RealImage sa = scatter(alpha), sb = scatter(beta), sc = scatter(gamma);
            const double norm = up / double(mu1.size());
            Tensor& dst = grad_ref(pred);
            for (size_t i = 0; i < sa.size(); ++i)
                dst.v[i] += norm * (sa[i] + 2.0 * pi[i] * sb[i] + ti[i] * sc[i]);
        };
    return id;
}

Tape::Id Tape::weighted_sum(const std::vector<Id>& xs, const std::vector<double>& coef,
                            double constant) {
    if (xs.size() != coef.size() || xs.empty())
        throw std::invalid_argument("weighted_sum: arity mismatch");
    double acc = constant;
    bool ng = false;
    for (size_t i = 0; i < xs.size(); ++i) {
        const Tensor& t = value(xs[i]);
        if (t.size() != 1) throw std::invalid_argument("weighted_sum: non-scalar input");
        acc += coef[i] * t.v[0];
        ng = ng || needs_grad(xs[i]);
    }
    Tensor out(1, 1, 1, 1);
    out.v[0] = acc;
    Id id = push(std::move(out), ng, nullptr);
    if (ng)
        nodes_[size_t(id)].back = [this, id, xs, coef] {
            const double up = grad_ref(id).v[0];
            for (size_t i = 0; i < xs.size(); ++i)
                if (needs_grad(xs[i])) grad_ref(xs[i]).v[0] += coef[i] * up;
        };
    return id;
}

void Tape::backward(Id root) {
    Node& r = nodes_[size_t(root)];
    if (r.val.size() != 1) throw std::invalid_argument("backward: root must be scalar");
    if (!r.needs_grad) return;  // constant graph
    r.grad.v[0] = 1.0;
    for (size_t i = nodes_.size(); i-- > 0;) {
        if (size_t(root) < i) continue;  // nodes after the root cannot influence it
        Node& node = nodes_[i];
        if (node.needs_grad && node.back) node.back();
    }
}

}  // namespace kslab
