#pragma once

#include <functional>
#include <vector>

#include "kslab/forward.hpp"
#include "kslab/image.hpp"
#include "kslab/sampling.hpp"

namespace kslab {

/**
 * Dense little 4D array: activations are (1, channels, H, W), convolution
 * weights (out_ch, in_ch, k, k), biases (out_ch, 1, 1, 1), scalars
 * (1, 1, 1, 1). Flat row-major storage, last axis fastest.
 */
struct Tensor {
    int d0 = 0, d1 = 0, d2 = 0, d3 = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int a, int b, int h, int w)
        : d0(a), d1(b), d2(h), d3(w), v(size_t(a) * b * h * w, 0.0) {}

    size_t size() const { return v.size(); }
    double& at(int a, int b, int r, int c) {
        return v[((size_t(a) * d1 + b) * d2 + r) * d3 + c];
    }
    double at(int a, int b, int r, int c) const {
        return v[((size_t(a) * d1 + b) * d2 + r) * d3 + c];
    }
    bool same_shape(const Tensor& o) const {
        return d0 == o.d0 && d1 == o.d1 && d2 == o.d2 && d3 == o.d3;
    }
};

Tensor tensor_from_complex(const ComplexImage& x);  // (1, 2, H, W) re/im planes
ComplexImage complex_from_tensor(const Tensor& t);

namespace nn {

/** Same-padded stride-1 convolution; x (1,Ci,H,W), w (Co,Ci,k,k), b (Co,1,1,1). */
Tensor conv2d_same(const Tensor& x, const Tensor& w, const Tensor& b);

/** Gradient pieces of conv2d_same; exposed for direct kernel tests. */
Tensor conv2d_same_grad_input(const Tensor& gout, const Tensor& w);
void conv2d_same_grad_params(const Tensor& gout, const Tensor& x, Tensor* gw, Tensor* gb);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh_t(const Tensor& x);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& x, double scale, double shift);

/** Valid-mode separable Gaussian stats filter on one plane of a (1,1,H,W) tensor. */
Tensor gaussian_valid(const Tensor& x, int n, double sigma);

}  // namespace nn

/**
 * Reverse-mode graph over Tensors. Nodes are appended in evaluation order;
 * backward() walks them in reverse, accumulating into preallocated gradient
 * buffers. Values are computed eagerly through the same nn:: kernels the
 * untraced paths use.
 */
class Tape {
public:
    using Id = int;

    Tape() = default;
    // Back-closures capture the owning tape, so the object must stay put.
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /** New leaf holding v; set needs_grad for trainable parameters. */
    Id leaf(Tensor v, bool needs_grad = false);

    Id conv2d(Id x, Id w, Id b);
    Id relu(Id x);
    Id sigmoid(Id x);
    Id tanh_(Id x);
    Id concat_c(Id a, Id b);
    Id mul(Id a, Id b);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id affine(Id x, double scale, double shift);

    /**
     * The data-term gradient field as a graph node: value is
     * nll_gradient(x) as a (1,2,H,W) tensor. The map is affine with a
     * Hermitian linear part, so the pullback applies the same masked
     * normal operator to the cotangent. Referenced buffers must outlive
     * the tape.
     */
    Id likelihood_gradient(Id x, const CoilStack* sens, const CoilStack* masked_kspace,
                           const SamplingMask* mask, double sigma2);

    /** (1,2,H,W) -> (1,1,H,W) pointwise complex modulus. */
    Id magnitude_pair(Id x);

    /** Scalar sum of absolute deviations from a fixed target. */
    Id l1_against(Id pred, const RealImage* target);

    /**
     * Scalar structural similarity against a fixed target; forward value is
     * exactly metrics::ssim(pred, target, data_range).
     */
    Id ssim_against(Id pred, const RealImage* target, double data_range);

    /** Scalar linear combination sum_i coef[i]*xs[i] + constant. */
    Id weighted_sum(const std::vector<Id>& xs, const std::vector<double>& coef, double constant);

    const Tensor& value(Id id) const { return nodes_[size_t(id)].val; }
    const Tensor& grad(Id id) const { return nodes_[size_t(id)].grad; }
    bool needs_grad(Id id) const { return nodes_[size_t(id)].needs_grad; }
    size_t node_count() const { return nodes_.size(); }

    /** Seeds d(root)=1 and accumulates gradients; root must be scalar-shaped. */
    void backward(Id root);

private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
        std::function<void()> back;
    };

    Id push(Tensor val, bool needs_grad, std::function<void()> back);
    Tensor& grad_ref(Id id) { return nodes_[size_t(id)].grad; }

    std::vector<Node> nodes_;
};

}  // namespace kslab
