#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kslab/forward.hpp"
#include "kslab/image.hpp"
#include "kslab/sampling.hpp"
#include "kslab/tape.hpp"

namespace kslab {

/**
 * Recurrent inference machine hyperparameters. Desk-scale defaults; the
 * reference configuration in the literature uses T=16 with 128 hidden
 * channels and is reachable by overriding these fields.
 */
struct RimConfig {
    int time_steps = 8;
    int hidden_channels = 16;
    int kernel_in = 5;   // image/gradient stack -> hidden
    int kernel_mid = 3;  // hidden -> hidden between the recurrent blocks
    int kernel_out = 3;  // hidden -> 2-channel complex update
    // Divide the 4-channel network input by a recorded constant (the running
    // standard deviation of training starts); keeps activations in range.
    bool standardize_input = true;
};

struct Filter {
    Tensor w, b;
};

/** Gate filters of one convolutional GRU; all 3x3 on (input, state) concat. */
struct ConvGru {
    Filter z, r, h;
};

/**
 * Weight-shared recurrence cell: the parameter set is a pure function of the
 * config and independent of the number of time steps.
 */
struct RimModel {
    RimConfig config;
    Filter conv_in;   // kernel_in x kernel_in, 4 -> hidden
    ConvGru gru1;     // 3x3, 2*hidden -> hidden
    Filter conv_mid;  // kernel_mid x kernel_mid, hidden -> hidden
    ConvGru gru2;     // 3x3, 2*hidden -> hidden
    Filter conv_out;  // kernel_out x kernel_out, hidden -> 2, zero-initialized
    double input_scale = 1.0;
};

/** Hidden states carried across time steps; zero at t = 0. */
struct RimState {
    Tensor s1, s2;  // (1, hidden, H, W)
};

/**
 * Fresh model: kernels uniform in +-sqrt(1/fan_in); the output filter starts
 * at zero so an untrained network reproduces its input image.
 */
RimModel make_rim_model(const RimConfig& cfg, uint64_t seed);

RimState make_rim_state(const RimConfig& cfg, int height, int width);

/** Total number of trainable scalars for this configuration. */
size_t rim_parameter_count(const RimConfig& cfg);

/** Every parameter tensor in checkpoint order, with stable names. */
std::vector<std::pair<std::string, Tensor*>> rim_named_parameters(RimModel& model);
std::vector<std::pair<std::string, const Tensor*>> rim_named_parameters(const RimModel& model);

/**
 * One recurrence application: stacks (Re x, Im x, Re grad, Im grad), runs
 * conv -> ReLU -> GRU -> conv -> ReLU -> GRU -> conv, and returns the complex
 * update along with the advanced states.
 */
ComplexImage rim_step(const RimModel& model, const ComplexImage& x, const ComplexImage& grad,
                      RimState& state);

/**
 * Unrolled reconstruction from masked measurements: x0 is the coil-combined
 * adjoint image, each step recomputes the data-term gradient at the current
 * iterate, and the returned trajectory holds x_1..x_T. Throws
 * divergence_error if any iterate goes non-finite.
 */
std::vector<ComplexImage> rim_infer(const RimModel& model, const CoilStack& masked_kspace,
                                    const CoilStack& sens, const SamplingMask& mask,
                                    const NllConfig& cfg = {});

/**
 * Trajectory loss: mean over steps of the sum-of-absolute-deviations between
 * |x_t| and the target plus (1 - similarity), similarity computed by the
 * metrics module with the target's peak as data range.
 */
double rim_loss(const std::vector<ComplexImage>& trajectory, const RealImage& target);

/** One training example: ground truth plus its full noisy acquisition. */
struct TrainSample {
    RealImage target;       // noiseless root-sum-of-squares reference
    CoilStack full_kspace;  // unmasked noisy acquisition
    CoilStack sens;
};

struct TrainSchedule {
    int iterations = 2000;
    int batch_size = 1;
    double lr = 1e-4;
    int warmup_iters = 100;    // linear ramp from lr/warmup_iters to lr
    int decay_every = 1000;    // then multiply by 0.2 at each boundary
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> accelerations = {5.0, 10.0};  // drawn uniformly per iteration
    MaskScheme scheme = MaskScheme::Rectilinear;
    double sigma2 = 1.0;  // data-term weight fed to the network gradient
    uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> losses;       // one entry per iteration
    std::vector<double> input_scales; // recorded standardization constants
};

/**
 * Everything the optimizer carries between iterations besides the weights.
 * A default-constructed value starts from scratch; after rim_train returns
 * it points at the next iteration of the same schedule, so feeding it back
 * (with the returned model) continues exactly where the run stopped.
 */
struct TrainState {
    int next_iter = 0;
    std::vector<Tensor> m1, m2;  // Adam moments in checkpoint parameter order
    double scale_sum = 0.0;      // running total of standardization constants
};

/**
 * Tape-built training graph for one batch under one mask. Owns the masked
 * k-space buffers the graph nodes reference, so it must outlive backward().
 */
struct RimGraphBindings {
    std::vector<CoilStack> masked;
    std::vector<std::pair<std::string, Tape::Id>> params;
    std::vector<std::vector<Tape::Id>> step_images;  // per sample, x_1..x_T
    Tape::Id loss = -1;
    double used_input_scale = 1.0;  // the constant this graph divided inputs by
};

RimGraphBindings build_rim_graph(Tape& tape, const RimModel& model,
                                 const std::vector<const TrainSample*>& batch,
                                 const SamplingMask& mask, double sigma2);

/**
 * Adam training loop. Each iteration draws an acceleration and a fresh mask
 * (shared across the batch), builds the graph, and applies bias-corrected
 * updates. Throws divergence_error (with the partial report stored) when the
 * loss goes non-finite. The per-iteration hook, when set, runs after the
 * update with the current model. Every random draw is keyed to the absolute
 * iteration index, so a run split across calls via the optional state is
 * bit-identical to an uninterrupted one.
 */
RimModel rim_train(RimModel model, const std::vector<TrainSample>& data,
                   const TrainSchedule& sched, TrainReport* report = nullptr,
                   const std::function<void(int, const RimModel&, double)>& hook = {},
                   TrainState* state = nullptr);

/**
 * Worst relative disagreement between tape gradients and central finite
 * differences (step 1e-4) of the trajectory loss over every parameter.
 * Intended for small instances (<= 16x16, few steps). The loss is only
 * piecewise smooth (absolute deviations, ReLU): when the probe interval of
 * some parameter straddles a crease, the difference quotient reports the
 * slope jump rather than a gradient defect, so outliers warrant a re-probe
 * at a smaller step before being read as errors.
 */
double tape_gradcheck(const RimModel& model, const TrainSample& sample,
                      const SamplingMask& mask, double sigma2 = 1.0);

/** Versioned binary checkpoint: magic, config integers, named tensors. */
void save_rim_checkpoint(const std::string& path, const RimModel& model);
RimModel load_rim_checkpoint(const std::string& path);

}  // namespace kslab
