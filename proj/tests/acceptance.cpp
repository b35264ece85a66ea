// Standalone release gate. Exercises the library and the command-line
// pipeline end to end and prints one verdict line per criterion; the exit
// status is the number of failed criteria. Arguments: <cli> <config> <workdir>.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kslab/coils.hpp"
#include "kslab/config.hpp"
#include "kslab/errors.hpp"
#include "kslab/fft.hpp"
#include "kslab/forward.hpp"
#include "kslab/harness.hpp"
#include "kslab/image.hpp"
#include "kslab/metrics.hpp"
#include "kslab/phantom.hpp"
#include "kslab/rim.hpp"
#include "kslab/rng.hpp"
#include "kslab/sampling.hpp"
#include "metric_refs.hpp"

using namespace kslab;
using namespace kslab::refimpl;
namespace fs = std::filesystem;

namespace {

std::string g_cli, g_config;
fs::path g_work;
int g_failures = 0;

void verdict(bool pass, const char* label, const std::string& detail, double seconds) {
    std::printf("[%s] %-24s %s (%.1fs)\n", pass ? "PASS" : "FAIL", label, detail.c_str(),
                seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

class Timer {
public:
    Timer() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

std::string fmt(const char* f, ...) {
    va_list args;
    va_start(args, f);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

/** Run one pipeline command, appending its output to the work log. */
int cli(const std::string& args) {
    const std::string cmd =
        "\"" + g_cli + "\" " + args + " >> \"" + (g_work / "cli.log").string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : 128;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is.good()) return "";
    return std::string(std::istreambuf_iterator<char>(is), {});
}

ComplexImage random_complex(int h, int w, Rng& rng, double scale = 1.0) {
    ComplexImage x(h, w);
    for (size_t i = 0; i < x.size(); ++i) x[i] = {scale * rng.normal(), scale * rng.normal()};
    return x;
}

cplx ip(const ComplexImage& a, const ComplexImage& b) {
    cplx acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
    return acc;
}

TrainSample make_sample(int h, int w, int coils, uint64_t seed, double noise_std) {
    TrainSample s;
    RealImage src = perturbed_shepp_logan(h, w, seed);
    s.sens = simulate_sensitivities(h, w, coils);
    CoilStack coil_images;
    for (const ComplexImage& sk : s.sens) {
        ComplexImage ci(h, w);
        for (size_t i = 0; i < ci.size(); ++i) ci[i] = sk[i] * src[i];
        coil_images.push_back(std::move(ci));
    }
    s.target = rss(coil_images);
    s.full_kspace = simulate_acquisition(src, s.sens, noise_std, mix_seed(seed, 999));
    return s;
}

// Pairing of the acquisition operator with its adjoint under random data.
void check_adjoint() {
    Timer t;
    constexpr double tol = 1e-10;
    Rng rng(777);
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const int h = 8 + int(rng.below(25)), w = 8 + int(rng.below(25));
        const int coils = 1 + int(rng.below(4));
        const CoilStack sens = simulate_sensitivities(h, w, coils);
        const ComplexImage x = random_complex(h, w, rng);
        CoilStack y;
        for (int k = 0; k < coils; ++k) y.push_back(random_complex(h, w, rng));
        const double r = 1.0 + 2.0 * rng.uniform01();
        const SamplingMask mask = make_rectilinear_mask(h, w, r, rng.next_u64());
        const CoilStack ax = apply_mask(forward_model(x, sens), mask);
        cplx lhs = 0.0;
        for (int k = 0; k < coils; ++k) lhs += ip(ax[size_t(k)], y[size_t(k)]);
        const cplx rhs = ip(x, adjoint_model(apply_mask(y, mask), sens));
        const double rel =
            std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
        worst = std::max(worst, rel);
    }
    verdict(worst < tol, "operator adjointness",
            fmt("worst relative pairing gap %.3e over 100 instances (tolerance %.0e)", worst,
                tol),
            t.seconds());
}

// Analytic data-term gradient against a central difference probe.
void check_data_gradient() {
    Timer t;
    constexpr double tol = 1e-5, step = 1e-5;
    Rng rng(888);
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const int h = 12 + int(rng.below(13)), w = 12 + int(rng.below(13));
        const int coils = 1 + int(rng.below(3));
        const CoilStack sens = simulate_sensitivities(h, w, coils);
        const RealImage src = perturbed_shepp_logan(h, w, 300 + uint64_t(inst));
        const CoilStack full = simulate_acquisition(src, sens, 0.01, rng.next_u64());
        const SamplingMask mask = make_rectilinear_mask(h, w, 2.0, rng.next_u64());
        const CoilStack masked = apply_mask(full, mask);
        const ComplexImage x = random_complex(h, w, rng, 0.5);
        ComplexImage d = random_complex(h, w, rng);
        double n2 = 0.0;
        for (size_t i = 0; i < d.size(); ++i) n2 += std::norm(d[i]);
        for (size_t i = 0; i < d.size(); ++i) d[i] /= std::sqrt(n2);
        auto shifted = [&](double tt) {
            ComplexImage xi = x;
            for (size_t i = 0; i < xi.size(); ++i) xi[i] += tt * d[i];
            return nll(xi, sens, masked, mask);
        };
        const double fd = (shifted(step) - shifted(-step)) / (2.0 * step);
        const ComplexImage g = nll_gradient(x, sens, masked, mask);
        const double analytic = 2.0 * ip(g, d).real();
        const double rel =
            std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1e-12});
        worst = std::max(worst, rel);
    }
    verdict(worst < tol, "data-term gradient",
            fmt("worst relative gap to central differences %.3e over 20 instances "
                "(step %.0e, tolerance %.0e)",
                worst, step, tol),
            t.seconds());
}

// Backpropagated network gradients against per-parameter finite differences.
// Instances pinned where the fixed probe step stays clear of the
// absolute-deviation creases of the piecewise-smooth loss.
void check_network_gradient() {
    Timer t;
    constexpr double tol = 1e-4;
    double worst = 0.0;
    for (int inst : {14, 3, 4, 22, 19, 30, 6, 36, 15, 0}) {
        const int coils = 1 + inst % 2;
        TrainSample s = make_sample(16, 16, coils, 100 + uint64_t(inst), 0.02);
        const SamplingMask mask = make_rectilinear_mask(16, 16, 2.0, 40 + uint64_t(inst));
        RimConfig cfg;
        cfg.hidden_channels = 1;
        cfg.time_steps = 2;
        cfg.standardize_input = inst % 2 == 0;
        const RimModel model = make_rim_model(cfg, 700 + uint64_t(inst));
        worst = std::max(worst, tape_gradcheck(model, s, mask));
    }
    verdict(worst < tol, "network gradient",
            fmt("worst per-parameter gap %.3e over 10 instances (tolerance %.0e)", worst, tol),
            t.seconds());
}

// Transform inversion and energy preservation, odd and rectangular shapes included.
void check_fft() {
    Timer t;
    constexpr double tol = 1e-10;
    Rng rng(999);
    double worst = 0.0;
    const int shapes[4][2] = {{16, 16}, {64, 64}, {218, 170}, {31, 17}};
    for (const auto& s : shapes)
        for (int rep = 0; rep < 3; ++rep) {
            const ComplexImage x = random_complex(s[0], s[1], rng);
            const ComplexImage back = ifft2c(fft2c(x));
            double nx = 0.0, nf = 0.0, derr = 0.0;
            const ComplexImage f = fft2c(x);
            for (size_t i = 0; i < x.size(); ++i) {
                nx += std::norm(x[i]);
                nf += std::norm(f[i]);
                derr = std::max(derr, std::abs(back[i] - x[i]));
            }
            worst = std::max({worst, derr, std::abs(nx - nf) / nx});
        }
    verdict(worst < tol, "transform inversion",
            fmt("worst roundtrip / energy deviation %.3e across four shapes (tolerance %.0e)",
                worst, tol),
            t.seconds());
}

// Achieved accelerations near the requested ones across schemes, grids, seeds.
void check_masks() {
    Timer t;
    constexpr double tol = 0.05;
    bool all_ok = true;
    std::string detail;
    for (MaskScheme scheme : {MaskScheme::Rectilinear, MaskScheme::Radial})
        for (const auto& g : {std::pair{64, 64}, std::pair{218, 170}})
            for (double target : {5.0, 10.0}) {
                double worst = 0.0;
                int infeasible = 0;
                for (uint64_t seed = 0; seed < 20; ++seed) {
                    try {
                        const SamplingMask m =
                            make_scheme_mask(scheme, g.first, g.second, target, 4200 + seed);
                        worst = std::max(
                            worst, std::abs(achieved_acceleration(m) - target) / target);
                    } catch (const infeasible_acceleration&) {
                        ++infeasible;
                    }
                }
                const bool ok = infeasible == 0 && worst <= tol;
                all_ok = all_ok && ok;
                if (!detail.empty()) detail += "; ";
                detail += fmt("%s %dx%d R=%g %s", scheme_name(scheme), g.first, g.second, target,
                              infeasible ? fmt("%d/20 infeasible", infeasible).c_str()
                                         : fmt("worst %.1f%%", 100.0 * worst).c_str());
            }
    verdict(all_ok, "mask accuracy", detail + fmt(" (tolerance %.0f%%)", 100.0 * tol),
            t.seconds());
}

// Closed-form metric values and agreement with straight-line references.
void check_metrics() {
    Timer t;
    bool ok = true;
    std::string why;
    auto fail = [&](const std::string& msg) {
        ok = false;
        if (!why.empty()) why += "; ";
        why += msg;
    };

    const RealImage x = shepp_logan_phantom(64, 64);
    if (std::abs(ssim(x, x) - 1.0) > 1e-12) fail("self-similarity off 1");
    RealImage ones(32, 32), zeros(32, 32);
    for (size_t i = 0; i < ones.size(); ++i) ones[i] = 1.0;
    const double expected = 1e-4 / 1.0001;
    if (std::abs(ssim(zeros, ones) - expected) > 1e-8 * expected)
        fail("flat-image similarity off its closed form");
    RealImage shifted = x;
    for (size_t i = 0; i < shifted.size(); ++i) shifted[i] += 0.1;
    if (std::abs(psnr(shifted, x) - 20.0) > 1e-12 * 20.0) fail("uniform +0.1 shift not 20 dB");
    if (std::abs(vif_p(x, x) - 1.0) > 1e-10) fail("self-fidelity off 1");

    double worst_s = 0.0, worst_p = 0.0, worst_v = 0.0;
    for (uint64_t pair = 0; pair < 10; ++pair) {
        const RealImage target =
            pair % 2 ? blur_same(random_field(64, 64, 50 + pair), 7, 1.2)
                     : perturbed_shepp_logan(64, 64, 60 + pair);
        RealImage pred = blur_same(target, 9, 1.0 + 0.15 * double(pair));
        if (pair % 3 == 0) {
            Rng rng(70 + pair);
            for (size_t i = 0; i < pred.size(); ++i) pred[i] += 0.02 * rng.normal();
        }
        double ref_ssim = 0.0, cs = 0.0;
        ssim_scalar_oracle(pred, target, 1.0, &ref_ssim, &cs);
        worst_s = std::max(worst_s, std::abs(ssim(pred, target, 1.0) - ref_ssim));
        double peak = 0.0, mse = 0.0;
        for (size_t i = 0; i < target.size(); ++i) {
            peak = std::max(peak, std::abs(target[i]));
            mse += (pred[i] - target[i]) * (pred[i] - target[i]);
        }
        mse /= double(target.size());
        worst_p = std::max(worst_p, std::abs(psnr(pred, target) -
                                             10.0 * std::log10(peak * peak / mse)));
        worst_v = std::max(worst_v, std::abs(vif_p(pred, target) -
                                             vif_scalar_oracle(pred, target)));
    }
    if (worst_s > 1e-8 || worst_p > 1e-8 || worst_v > 1e-8)
        fail(fmt("reference gaps ssim %.2e psnr %.2e vif %.2e", worst_s, worst_p, worst_v));

    verdict(ok, "metric values",
            ok ? fmt("closed forms and 10 reference pairs agree (worst gap %.2e)",
                     std::max({worst_s, worst_p, worst_v}))
               : why,
            t.seconds());
}

// A network with all parameters zeroed must pass the start image through.
void check_identity_start() {
    Timer t;
    bool ok = true;
    for (uint64_t inst = 0; inst < 5; ++inst) {
        const int coils = 1 + int(inst % 3);
        TrainSample s = make_sample(16, 16, coils, 500 + inst, 0.01);
        const SamplingMask mask = make_rectilinear_mask(16, 16, 2.0, 600 + inst);
        const CoilStack masked = apply_mask(s.full_kspace, mask);
        RimConfig cfg;
        cfg.hidden_channels = 2;
        cfg.time_steps = 3;
        RimModel model = make_rim_model(cfg, 10 + inst);
        for (auto& [name, p] : rim_named_parameters(model))
            std::fill(p->v.begin(), p->v.end(), 0.0);
        const ComplexImage x0 = adjoint_model(masked, s.sens);
        const auto traj = rim_infer(model, masked, s.sens, mask);
        for (const ComplexImage& xt : traj)
            for (size_t i = 0; i < xt.size(); ++i)
                if (std::abs(xt[i]) != std::abs(x0[i])) ok = false;
    }
    verdict(ok, "silent-network identity",
            ok ? "zeroed parameters pass the start image through bit-exactly on 5 instances"
               : "some trajectory moved away from the start image",
            t.seconds());
}

// Short optimization run must reduce the loss and replay bit-identically.
void check_training_smoke() {
    Timer t;
    std::vector<TrainSample> data;
    for (uint64_t i = 0; i < 3; ++i) data.push_back(make_sample(16, 16, 2, 900 + i, 0.01));
    TrainSchedule sched;
    sched.iterations = 200;
    sched.lr = 1e-3;
    sched.warmup_iters = 10;
    sched.decay_every = 0;
    sched.accelerations = {2.0};
    sched.seed = 77;
    RimConfig cfg;
    cfg.hidden_channels = 2;
    cfg.time_steps = 2;
    TrainReport r1, r2;
    rim_train(make_rim_model(cfg, 5), data, sched, &r1);
    rim_train(make_rim_model(cfg, 5), data, sched, &r2);
    double lead = 0.0, trail = 0.0;
    for (int i = 0; i < 20; ++i) {
        lead += r1.losses[size_t(i)];
        trail += r1.losses[r1.losses.size() - 20 + size_t(i)];
    }
    lead /= 20.0;
    trail /= 20.0;
    double worst_rep = 0.0;
    for (size_t i = 0; i < r1.losses.size(); ++i)
        worst_rep = std::max(worst_rep, std::abs(r1.losses[i] - r2.losses[i]) /
                                            std::max(std::abs(r1.losses[i]), 1e-300));
    const bool ok = trail < lead && worst_rep <= 1e-12;
    verdict(ok, "training smoke",
            fmt("trailing-20 loss %.4f vs leading-20 %.4f; replay gap %.1e "
                "(200 iterations)",
                trail, lead, worst_rep),
            t.seconds());
}

std::map<std::pair<std::string, std::string>, double> read_comparison_ssim(const fs::path& csv) {
    std::map<std::pair<std::string, std::string>, double> out;
    std::istringstream ss(slurp(csv));
    std::string line;
    bool first = true;
    while (std::getline(ss, line)) {
        if (first) {
            first = false;
            continue;
        }
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() >= 6) out[{f[0], f[1]}] = std::strtod(f[4].c_str(), nullptr);
    }
    return out;
}

// The full pinned-protocol pipeline: does subsampling along many directions
// beat row skipping at both accelerations, for the trained model and for the
// untrained baseline alike?
void check_directional_reproduction() {
    Timer t;
    const fs::path root = g_work / "desk";
    const std::string base = "--config \"" + g_config + "\" --out \"" + root.string() + "\"";
    bool ran = true;
    std::string why;
    auto step = [&](const std::string& args) {
        if (!ran) return;
        const int rc = cli(args);
        if (rc != 0) {
            ran = false;
            why = fmt("command '%s' exited %d", args.c_str(), rc);
        }
    };
    step("simulate " + base);
    step("train " + base);
    step("compare " + base + " --method rim");
    step("compare " + base + " --method zero-filled");
    if (!ran) {
        verdict(false, "directional reproduction", why + "; see desk work log", t.seconds());
        return;
    }
    bool ok = true;
    std::string detail;
    for (const char* method : {"rim", "zero-filled"}) {
        const auto ssim = read_comparison_ssim(root / (std::string("compare_") + method) /
                                               "comparison.csv");
        for (const char* r : {"5", "10"}) {
            const auto rect = ssim.find({r, "rectilinear"});
            const auto rad = ssim.find({r, "radial"});
            if (rect == ssim.end() || rad == ssim.end()) {
                ok = false;
                detail += fmt("%s R=%s row missing; ", method, r);
                continue;
            }
            ok = ok && rad->second > rect->second;
            detail += fmt("%s R=%s radial %.4f vs rect %.4f; ", method, r, rad->second,
                          rect->second);
        }
    }
    verdict(ok, "directional reproduction", detail + "(test split mean similarity)",
            t.seconds());
}

// Byte-identical artifacts when the same commands run twice.
void check_pipeline_determinism() {
    Timer t;
    const std::string sets =
        " --set experiment.height=32 --set experiment.width=32 --set experiment.coils=2"
        " --set splits.train_volumes=2 --set splits.val_volumes=1 --set splits.test_volumes=1"
        " --set splits.slices_per_volume=1 --set rim.time_steps=2 --set rim.hidden_channels=2"
        " --set training.iterations=6 --set training.warmup_iters=2 --set output.eval_every=3"
        " --set experiment.accelerations=2 --set experiment.schemes=rectilinear";
    bool ran = true;
    for (const char* leaf : {"det_a", "det_b"}) {
        const std::string base = sets + " --out \"" + (g_work / leaf).string() + "\"";
        ran = ran && cli("simulate" + base) == 0;
        ran = ran && cli("train" + base) == 0;
        ran = ran && cli("recon" + base + " --method map-cg --scheme rectilinear --r 2") == 0;
        ran = ran && cli("recon" + base + " --method rim --scheme rectilinear --r 2 "
                         "--trajectory") == 0;
    }
    if (!ran) {
        verdict(false, "pipeline determinism", "a pipeline command failed; see work log",
                t.seconds());
        return;
    }
    const fs::path a = g_work / "det_a", b = g_work / "det_b";
    std::set<std::string> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.insert(fs::relative(e.path(), a).string());
    size_t checked = 0;
    bool same = true;
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file() && !rel.count(fs::relative(e.path(), b).string())) same = false;
    for (const std::string& r : rel) {
        if (slurp(a / r) != slurp(b / r)) same = false;
        ++checked;
    }
    verdict(same && checked > 0, "pipeline determinism",
            fmt("%zu artifacts byte-compared across two identical runs", checked), t.seconds());
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 4) {
        std::fprintf(stderr, "usage: %s <cli> <config> <workdir>\n", argv[0]);
        return 99;
    }
    g_cli = argv[1];
    g_config = argv[2];
    g_work = argv[3];
    fs::create_directories(g_work);

    check_adjoint();
    check_data_gradient();
    check_network_gradient();
    check_fft();
    check_masks();
    check_metrics();
    check_identity_start();
    check_training_smoke();
    check_pipeline_determinism();
    check_directional_reproduction();

    std::printf("%d of 10 criteria passed\n", 10 - g_failures);
    return g_failures;
}
