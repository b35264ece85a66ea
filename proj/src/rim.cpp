#include "kslab/rim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "kslab/errors.hpp"
#include "kslab/io.hpp"
#include "kslab/metrics.hpp"
#include "kslab/recon.hpp"
#include "kslab/rng.hpp"

namespace kslab {
namespace {

constexpr int kGruKernel = 3;
constexpr const char kCheckpointMagic[8] = {'R', 'I', 'M', 'C', 'K', 'P', 'T', '1'};

void validate_config(const RimConfig& cfg) {
    if (cfg.time_steps < 1) throw std::invalid_argument("time_steps must be >= 1");
    if (cfg.hidden_channels < 1) throw std::invalid_argument("hidden_channels must be >= 1");
    for (int k : {cfg.kernel_in, cfg.kernel_mid, cfg.kernel_out})
        if (k < 1 || k % 2 == 0) throw std::invalid_argument("kernel sizes must be odd");
}

Filter make_filter(int out_ch, int in_ch, int k, Rng& rng, bool zero) {
    Filter f;
    f.w = Tensor(out_ch, in_ch, k, k);
    f.b = Tensor(out_ch, 1, 1, 1);
    if (!zero) {
        const double bound = std::sqrt(1.0 / (double(in_ch) * k * k));
        for (double& v : f.w.v) v = bound * (2.0 * rng.uniform01() - 1.0);
        for (double& v : f.b.v) v = bound * (2.0 * rng.uniform01() - 1.0);
    }
    return f;
}

ConvGru make_gru(int hidden, Rng& rng) {
    ConvGru g;
    g.z = make_filter(hidden, 2 * hidden, kGruKernel, rng, false);
    g.r = make_filter(hidden, 2 * hidden, kGruKernel, rng, false);
    g.h = make_filter(hidden, 2 * hidden, kGruKernel, rng, false);
    return g;
}

/** 4-channel network input: real/imaginary planes of the image and gradient. */
Tensor stack_inputs(const ComplexImage& x, const ComplexImage& grad) {
    require_same_shape(x, grad, "rim input stack");
    const int h = x.height(), w = x.width();
    Tensor t(1, 4, h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            t.at(0, 0, r, c) = x.at(r, c).real();
            t.at(0, 1, r, c) = x.at(r, c).imag();
            t.at(0, 2, r, c) = grad.at(r, c).real();
            t.at(0, 3, r, c) = grad.at(r, c).imag();
        }
    return t;
}

/** h' = s + z*(cand - s), algebraically (1-z)*s + z*cand. */
Tensor gru_plain(const ConvGru& g, const Tensor& u, const Tensor& s) {
    Tensor us = nn::concat_channels(u, s);
    Tensor z = nn::sigmoid(nn::conv2d_same(us, g.z.w, g.z.b));
    Tensor r = nn::sigmoid(nn::conv2d_same(us, g.r.w, g.r.b));
    Tensor urs = nn::concat_channels(u, nn::mul(r, s));
    Tensor cand = nn::tanh_t(nn::conv2d_same(urs, g.h.w, g.h.b));
    return nn::add(s, nn::mul(z, nn::sub(cand, s)));
}

bool finite_image(const ComplexImage& x) {
    for (size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i].real()) || !std::isfinite(x[i].imag())) return false;
    return true;
}

/** Population standard deviation of all start-image components in a batch. */
double start_component_std(const std::vector<Tensor>& starts) {
    double sum = 0.0, sq = 0.0;
    size_t n = 0;
    for (const Tensor& t : starts) {
        for (double v : t.v) {
            sum += v;
            sq += v * v;
        }
        n += t.size();
    }
    const double mean = sum / double(n);
    const double var = std::max(0.0, sq / double(n) - mean * mean);
    return std::sqrt(var);
}

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw format_error("checkpoint truncated");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
    return v;
}

TensorData tensor_to_data(const Tensor& t) {
    TensorData d;
    d.dtype = TensorData::Dtype::F64;
    d.dims = {uint64_t(t.d0), uint64_t(t.d1), uint64_t(t.d2), uint64_t(t.d3)};
    d.f64 = t.v;
    return d;
}

Tensor tensor_from_data(const TensorData& d, const char* name) {
    if (d.dtype != TensorData::Dtype::F64 || d.dims.size() != 4)
        throw format_error(std::string("checkpoint tensor ") + name + ": bad layout");
    Tensor t(int(d.dims[0]), int(d.dims[1]), int(d.dims[2]), int(d.dims[3]));
    if (t.size() != d.f64.size())
        throw format_error(std::string("checkpoint tensor ") + name + ": bad payload");
    t.v = d.f64;
    return t;
}

/** Zero-valued model with the shapes the config dictates. */
RimModel shaped_model(const RimConfig& cfg) {
    Rng unused(0);
    RimModel m;
    m.config = cfg;
    const int hc = cfg.hidden_channels;
    m.conv_in = make_filter(hc, 4, cfg.kernel_in, unused, true);
    m.gru1.z = make_filter(hc, 2 * hc, kGruKernel, unused, true);
    m.gru1.r = make_filter(hc, 2 * hc, kGruKernel, unused, true);
    m.gru1.h = make_filter(hc, 2 * hc, kGruKernel, unused, true);
    m.conv_mid = make_filter(hc, hc, cfg.kernel_mid, unused, true);
    m.gru2.z = make_filter(hc, 2 * hc, kGruKernel, unused, true);
    m.gru2.r = make_filter(hc, 2 * hc, kGruKernel, unused, true);
    m.gru2.h = make_filter(hc, 2 * hc, kGruKernel, unused, true);
    m.conv_out = make_filter(2, hc, cfg.kernel_out, unused, true);
    return m;
}

}  // namespace

RimModel make_rim_model(const RimConfig& cfg, uint64_t seed) {
    validate_config(cfg);
    Rng rng(splitmix64(seed ^ 0x52494dull));
    RimModel m;
    m.config = cfg;
    const int hc = cfg.hidden_channels;
    m.conv_in = make_filter(hc, 4, cfg.kernel_in, rng, false);
    m.gru1 = make_gru(hc, rng);
    m.conv_mid = make_filter(hc, hc, cfg.kernel_mid, rng, false);
    m.gru2 = make_gru(hc, rng);
    // Zero output filter: the first update is exactly zero, so training
    // starts from the coil-combined adjoint image.
    m.conv_out = make_filter(2, hc, cfg.kernel_out, rng, true);
    return m;
}

RimState make_rim_state(const RimConfig& cfg, int height, int width) {
    RimState s;
    s.s1 = Tensor(1, cfg.hidden_channels, height, width);
    s.s2 = Tensor(1, cfg.hidden_channels, height, width);
    return s;
}

std::vector<std::pair<std::string, Tensor*>> rim_named_parameters(RimModel& m) {
    return {
        {"conv_in.w", &m.conv_in.w},   {"conv_in.b", &m.conv_in.b},
        {"gru1.z.w", &m.gru1.z.w},     {"gru1.z.b", &m.gru1.z.b},
        {"gru1.r.w", &m.gru1.r.w},     {"gru1.r.b", &m.gru1.r.b},
        {"gru1.h.w", &m.gru1.h.w},     {"gru1.h.b", &m.gru1.h.b},
        {"conv_mid.w", &m.conv_mid.w}, {"conv_mid.b", &m.conv_mid.b},
        {"gru2.z.w", &m.gru2.z.w},     {"gru2.z.b", &m.gru2.z.b},
        {"gru2.r.w", &m.gru2.r.w},     {"gru2.r.b", &m.gru2.r.b},
        {"gru2.h.w", &m.gru2.h.w},     {"gru2.h.b", &m.gru2.h.b},
        {"conv_out.w", &m.conv_out.w}, {"conv_out.b", &m.conv_out.b},
    };
}

std::vector<std::pair<std::string, const Tensor*>> rim_named_parameters(const RimModel& m) {
    // Read-only view over the same list; nothing is written through it.
    auto v = rim_named_parameters(const_cast<RimModel&>(m));
    return {v.begin(), v.end()};
}

size_t rim_parameter_count(const RimConfig& cfg) {
    RimModel m = shaped_model(cfg);
    size_t n = 0;
    for (auto& [name, t] : rim_named_parameters(m)) n += t->size();
    return n;
}

ComplexImage rim_step(const RimModel& model, const ComplexImage& x, const ComplexImage& grad,
                      RimState& state) {
    const int hc = model.config.hidden_channels;
    Tensor in = stack_inputs(x, grad);
    if (state.s1.d1 != hc || state.s1.d2 != x.height() || state.s1.d3 != x.width() ||
        !state.s1.same_shape(state.s2))
        throw std::invalid_argument("rim_step: state shape mismatch");
    if (model.config.standardize_input)
        in = nn::affine(in, 1.0 / model.input_scale, 0.0);
    Tensor a = nn::relu(nn::conv2d_same(in, model.conv_in.w, model.conv_in.b));
    state.s1 = gru_plain(model.gru1, a, state.s1);
    Tensor mid = nn::relu(nn::conv2d_same(state.s1, model.conv_mid.w, model.conv_mid.b));
    state.s2 = gru_plain(model.gru2, mid, state.s2);
    Tensor delta = nn::conv2d_same(state.s2, model.conv_out.w, model.conv_out.b);
    return complex_from_tensor(delta);
}

std::vector<ComplexImage> rim_infer(const RimModel& model, const CoilStack& masked_kspace,
                                    const CoilStack& sens, const SamplingMask& mask,
                                    const NllConfig& cfg) {
    ComplexImage x = adjoint_model(masked_kspace, sens);
    RimState state = make_rim_state(model.config, x.height(), x.width());
    std::vector<ComplexImage> trajectory;
    trajectory.reserve(size_t(model.config.time_steps));
    for (int t = 0; t < model.config.time_steps; ++t) {
        ComplexImage grad = nll_gradient(x, sens, masked_kspace, mask, cfg);
        ComplexImage delta = rim_step(model, x, grad, state);
        for (size_t i = 0; i < x.size(); ++i) x[i] += delta[i];
        if (!finite_image(x))
            throw divergence_error("reconstruction diverged at step " + std::to_string(t + 1));
        trajectory.push_back(x);
    }
    return trajectory;
}

double rim_loss(const std::vector<ComplexImage>& trajectory, const RealImage& target) {
    if (trajectory.empty()) throw std::invalid_argument("rim_loss: empty trajectory");
    double range = 0.0;
    for (size_t i = 0; i < target.size(); ++i) range = std::max(range, target[i]);
    double acc = 0.0;
    for (const ComplexImage& x : trajectory) {
        RealImage mag = magnitude(x);
        require_same_shape(mag, target, "rim_loss");
        double l1 = 0.0;
        for (size_t i = 0; i < mag.size(); ++i) l1 += std::abs(mag[i] - target[i]);
        acc += l1 + (1.0 - ssim(mag, target, range));
    }
    return acc / double(trajectory.size());
}

RimGraphBindings build_rim_graph(Tape& tape, const RimModel& model,
                                 const std::vector<const TrainSample*>& batch,
                                 const SamplingMask& mask, double sigma2) {
    if (batch.empty()) throw std::invalid_argument("build_rim_graph: empty batch");
    RimGraphBindings out;
    out.masked.reserve(batch.size());  // node pointers into this stay valid

    auto& params = out.params;
    for (auto& [name, t] : rim_named_parameters(model))
        params.emplace_back(name, tape.leaf(*t, true));
    struct GruIds {
        Tape::Id zw, zb, rw, rb, hw, hb;
    };
    auto pid = [&](const char* name) {
        for (auto& [n, id] : params)
            if (n == name) return id;
        throw std::logic_error("unknown parameter");
    };
    const GruIds g1{pid("gru1.z.w"), pid("gru1.z.b"), pid("gru1.r.w"),
                    pid("gru1.r.b"), pid("gru1.h.w"), pid("gru1.h.b")};
    const GruIds g2{pid("gru2.z.w"), pid("gru2.z.b"), pid("gru2.r.w"),
                    pid("gru2.r.b"), pid("gru2.h.w"), pid("gru2.h.b")};

    auto gru_traced = [&](const GruIds& g, Tape::Id u, Tape::Id s) {
        Tape::Id us = tape.concat_c(u, s);
        Tape::Id z = tape.sigmoid(tape.conv2d(us, g.zw, g.zb));
        Tape::Id r = tape.sigmoid(tape.conv2d(us, g.rw, g.rb));
        Tape::Id urs = tape.concat_c(u, tape.mul(r, s));
        Tape::Id cand = tape.tanh_(tape.conv2d(urs, g.hw, g.hb));
        return tape.add(s, tape.mul(z, tape.sub(cand, s)));
    };

    // Start images first: the standardization constant pools over the batch.
    std::vector<Tensor> starts;
    starts.reserve(batch.size());
    for (const TrainSample* s : batch) {
        out.masked.push_back(apply_mask(s->full_kspace, mask));
        starts.push_back(tensor_from_complex(adjoint_model(out.masked.back(), s->sens)));
    }
    out.used_input_scale = 1.0;
    if (model.config.standardize_input) {
        const double sd = start_component_std(starts);
        out.used_input_scale = sd > 1e-12 ? sd : 1.0;
    }

    std::vector<Tape::Id> terms;
    std::vector<double> coefs;
    const double share = 1.0 / (double(batch.size()) * model.config.time_steps);
    for (size_t bi = 0; bi < batch.size(); ++bi) {
        const TrainSample* s = batch[bi];
        double range = 0.0;
        for (size_t i = 0; i < s->target.size(); ++i) range = std::max(range, s->target[i]);
        const int h = s->target.height(), w = s->target.width();
        Tape::Id x = tape.leaf(starts[bi]);
        Tape::Id s1 = tape.leaf(Tensor(1, model.config.hidden_channels, h, w));
        Tape::Id s2 = tape.leaf(Tensor(1, model.config.hidden_channels, h, w));
        std::vector<Tape::Id> steps;
        for (int t = 0; t < model.config.time_steps; ++t) {
            Tape::Id grad =
                tape.likelihood_gradient(x, &s->sens, &out.masked[bi], &mask, sigma2);
            Tape::Id in = tape.concat_c(x, grad);
            if (model.config.standardize_input)
                in = tape.affine(in, 1.0 / out.used_input_scale, 0.0);
            Tape::Id a = tape.relu(tape.conv2d(in, pid("conv_in.w"), pid("conv_in.b")));
            s1 = gru_traced(g1, a, s1);
            Tape::Id mid =
                tape.relu(tape.conv2d(s1, pid("conv_mid.w"), pid("conv_mid.b")));
            s2 = gru_traced(g2, mid, s2);
            Tape::Id delta = tape.conv2d(s2, pid("conv_out.w"), pid("conv_out.b"));
            x = tape.add(x, delta);
            steps.push_back(x);
            Tape::Id mag = tape.magnitude_pair(x);
            terms.push_back(tape.l1_against(mag, &s->target));
            coefs.push_back(share);
            terms.push_back(tape.ssim_against(mag, &s->target, range));
            coefs.push_back(-share);
        }
        out.step_images.push_back(std::move(steps));
    }
    out.loss = tape.weighted_sum(terms, coefs, 1.0);
    return out;
}

RimModel rim_train(RimModel model, const std::vector<TrainSample>& data,
                   const TrainSchedule& sched, TrainReport* report,
                   const std::function<void(int, const RimModel&, double)>& hook,
                   TrainState* state) {
    if (data.empty()) throw std::invalid_argument("rim_train: empty dataset");
    if (sched.iterations < 0 || sched.batch_size < 1 || sched.accelerations.empty())
        throw std::invalid_argument("rim_train: bad schedule");
    const int h = data.front().target.height(), w = data.front().target.width();
    for (const TrainSample& s : data)
        if (s.target.height() != h || s.target.width() != w)
            throw std::invalid_argument("rim_train: non-uniform image sizes");

    auto named = rim_named_parameters(model);
    TrainState fresh;
    TrainState& st = state ? *state : fresh;
    if (st.m1.empty()) {
        st.m1.clear();
        st.m2.clear();
        for (auto& [name, t] : named) {
            st.m1.emplace_back(t->d0, t->d1, t->d2, t->d3);
            st.m2.emplace_back(t->d0, t->d1, t->d2, t->d3);
        }
    } else if (st.m1.size() != named.size() || st.m2.size() != named.size()) {
        throw std::invalid_argument("rim_train: optimizer state does not match the model");
    }
    std::vector<Tensor>& m1 = st.m1;
    std::vector<Tensor>& m2 = st.m2;
    for (size_t p = 0; p < named.size(); ++p)
        if (!m1[p].same_shape(*named[p].second) || !m2[p].same_shape(*named[p].second))
            throw std::invalid_argument("rim_train: optimizer state does not match the model");
    if (st.next_iter < 0) throw std::invalid_argument("rim_train: negative start iteration");

    TrainReport local;
    TrainReport& rep = report ? *report : local;
    double& scale_sum = st.scale_sum;

    for (int iter = st.next_iter; iter < sched.iterations; ++iter) {
        Rng draw(mix_seed(sched.seed, uint64_t(iter)));
        const double r = sched.accelerations[draw.below(sched.accelerations.size())];
        const uint64_t mask_seed = draw.next_u64();
        SamplingMask mask = sched.scheme == MaskScheme::Radial
                                ? make_radial_mask(h, w, r, mask_seed)
                                : make_rectilinear_mask(h, w, r, mask_seed);
        std::vector<const TrainSample*> batch;
        for (int b = 0; b < sched.batch_size; ++b)
            batch.push_back(&data[draw.below(data.size())]);

        Tape tape;
        RimGraphBindings graph = build_rim_graph(tape, model, batch, mask, sched.sigma2);
        const double loss = tape.value(graph.loss).v[0];
        rep.losses.push_back(loss);
        rep.input_scales.push_back(graph.used_input_scale);
        if (!std::isfinite(loss))
            throw divergence_error("training diverged at iteration " + std::to_string(iter));
        tape.backward(graph.loss);

        const double warm = sched.warmup_iters > 0
                                ? std::min(1.0, double(iter + 1) / sched.warmup_iters)
                                : 1.0;
        const double decay =
            sched.decay_every > 0 ? std::pow(0.2, double(iter / sched.decay_every)) : 1.0;
        const double lr = sched.lr * warm * decay;
        const double t = double(iter + 1);
        const double bc1 = 1.0 - std::pow(sched.beta1, t);
        const double bc2 = 1.0 - std::pow(sched.beta2, t);
        for (size_t p = 0; p < named.size(); ++p) {
            const Tensor& g = tape.grad(graph.params[p].second);
            Tensor& theta = *named[p].second;
            for (size_t i = 0; i < theta.size(); ++i) {
                m1[p].v[i] = sched.beta1 * m1[p].v[i] + (1.0 - sched.beta1) * g.v[i];
                m2[p].v[i] = sched.beta2 * m2[p].v[i] + (1.0 - sched.beta2) * g.v[i] * g.v[i];
                theta.v[i] -= lr * (m1[p].v[i] / bc1) /
                              (std::sqrt(m2[p].v[i] / bc2) + sched.eps);
            }
        }

        // Inference standardizes by the running mean of the batch constants.
        scale_sum += graph.used_input_scale;
        if (model.config.standardize_input) model.input_scale = scale_sum / double(iter + 1);
        st.next_iter = iter + 1;
        if (hook) hook(iter, model, loss);
    }
    return model;
}

double tape_gradcheck(const RimModel& model, const TrainSample& sample,
                      const SamplingMask& mask, double sigma2) {
    const std::vector<const TrainSample*> batch{&sample};
    Tape tape;
    RimGraphBindings graph = build_rim_graph(tape, model, batch, mask, sigma2);
    tape.backward(graph.loss);

    RimModel probe = model;
    auto named = rim_named_parameters(probe);
    const double step = 1e-4;
    double worst = 0.0;
    for (size_t p = 0; p < named.size(); ++p) {
        const Tensor& g = tape.grad(graph.params[p].second);
        Tensor& theta = *named[p].second;
        for (size_t i = 0; i < theta.size(); ++i) {
            const double keep = theta.v[i];
            auto value_at = [&](double v) {
                theta.v[i] = v;
                Tape fd;
                RimGraphBindings gb = build_rim_graph(fd, probe, batch, mask, sigma2);
                return fd.value(gb.loss).v[0];
            };
            const double hi = value_at(keep + step);
            const double lo = value_at(keep - step);
            theta.v[i] = keep;
            const double numeric = (hi - lo) / (2.0 * step);
            const double rel =
                std::abs(g.v[i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

void save_rim_checkpoint(const std::string& path, const RimModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw format_error("cannot open checkpoint for write: " + path);
    os.write(kCheckpointMagic, 8);
    write_u32(os, uint32_t(model.config.time_steps));
    write_u32(os, uint32_t(model.config.hidden_channels));
    write_u32(os, uint32_t(model.config.kernel_in));
    write_u32(os, uint32_t(model.config.kernel_mid));
    write_u32(os, uint32_t(model.config.kernel_out));
    write_u32(os, model.config.standardize_input ? 1u : 0u);

    auto named = rim_named_parameters(model);
    write_u32(os, uint32_t(named.size()) + 1u);
    auto entry = [&](const std::string& name, const Tensor& t) {
        write_u32(os, uint32_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        write_tensor_stream(os, tensor_to_data(t));
    };
    for (auto& [name, t] : named) entry(name, *t);
    Tensor scale(1, 1, 1, 1);
    scale.v[0] = model.input_scale;
    entry("input_scale", scale);
    if (!os) throw format_error("checkpoint write failed: " + path);
}

RimModel load_rim_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw format_error("not a model checkpoint: " + path);
    RimConfig cfg;
    cfg.time_steps = int(read_u32(is));
    cfg.hidden_channels = int(read_u32(is));
    cfg.kernel_in = int(read_u32(is));
    cfg.kernel_mid = int(read_u32(is));
    cfg.kernel_out = int(read_u32(is));
    cfg.standardize_input = read_u32(is) != 0;
    validate_config(cfg);

    RimModel model = shaped_model(cfg);
    auto named = rim_named_parameters(model);
    std::vector<bool> seen(named.size(), false);
    bool scale_seen = false;
    const uint32_t entries = read_u32(is);
    if (entries != named.size() + 1)
        throw format_error("checkpoint parameter count mismatch: " + path);
    for (uint32_t e = 0; e < entries; ++e) {
        const uint32_t len = read_u32(is);
        if (len > 256) throw format_error("checkpoint name too long: " + path);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw format_error("checkpoint truncated: " + path);
        Tensor t = tensor_from_data(read_tensor_stream(is), name.c_str());
        if (name == "input_scale") {
            if (t.size() != 1) throw format_error("bad input_scale record: " + path);
            model.input_scale = t.v[0];
            scale_seen = true;
            continue;
        }
        bool matched = false;
        for (size_t p = 0; p < named.size(); ++p)
            if (named[p].first == name) {
                if (seen[p]) throw format_error("duplicate tensor " + name + ": " + path);
                if (!named[p].second->same_shape(t))
                    throw format_error("tensor " + name + " shape mismatch: " + path);
                *named[p].second = std::move(t);
                seen[p] = true;
                matched = true;
                break;
            }
        if (!matched) throw format_error("unknown tensor " + name + ": " + path);
    }
    if (!scale_seen) throw format_error("missing input_scale record: " + path);
    for (size_t p = 0; p < named.size(); ++p)
        if (!seen[p]) throw format_error("missing tensor " + named[p].first + ": " + path);
    return model;
}

}  // namespace kslab
