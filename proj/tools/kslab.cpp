#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kslab/config.hpp"
#include "kslab/errors.hpp"
#include "kslab/harness.hpp"
#include "kslab/io.hpp"
#include "kslab/metrics.hpp"
#include "kslab/sampling.hpp"

using namespace kslab;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    std::string data;
};

void add_common(CLI::App* cmd, CommonArgs& c) {
    cmd->add_option("--config", c.config, "Configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.sets,
                    "Override one configuration entry as section.key=value (repeatable)");
    cmd->add_option("--out", c.out, "Output root directory");
    cmd->add_option("--data", c.data, "Dataset root (default: <output root>/dataset)");
}

std::string strip(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

ExperimentConfig build_config(const CommonArgs& c) {
    ExperimentConfig cfg;
    if (!c.config.empty()) cfg = load_config_file(c.config);
    for (const std::string& s : c.sets) {
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects section.key=value, got '" + s + "'");
        apply_config_entry(cfg, strip(s.substr(0, eq)), strip(s.substr(eq + 1)));
    }
    validate_config(cfg);
    return cfg;
}

fs::path data_root_for(const CommonArgs& c, const fs::path& out_root) {
    return c.data.empty() ? out_root / "dataset" : fs::path(c.data);
}

std::string r_tag(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", r);
    return buf;
}

void print_report(const MetricsReport& rep) {
    std::printf("slices: %zu\n", rep.per_slice.size());
    std::printf("psnr: %.4f +- %.4f dB\n", rep.psnr.mean, rep.psnr.stddev);
    std::printf("ssim: %.6f +- %.6f\n", rep.ssim.mean, rep.ssim.stddev);
    std::printf("vif:  %.6f +- %.6f\n", rep.vif.mean, rep.vif.stddev);
}

int cmd_mask(const CommonArgs& common, const std::string& scheme_s, double r, int height,
             int width, uint64_t seed, bool seed_given) {
    const ExperimentConfig cfg = build_config(common);
    const fs::path out_root = resolve_output_root(common.out, cfg);
    const MaskScheme scheme = parse_scheme(scheme_s);
    const int h = height > 0 ? height : cfg.height;
    const int w = width > 0 ? width : cfg.width;
    const uint64_t s = seed_given ? seed : cfg.seeds.mask;
    const SamplingMask mask = make_scheme_mask(scheme, h, w, r, s);
    const fs::path dir = out_root / "masks";
    fs::create_directories(dir);
    char stem[128];
    std::snprintf(stem, sizeof stem, "mask_%s_%dx%d_r%s_seed%" PRIu64, scheme_name(scheme), h, w,
                  r_tag(r).c_str(), s);
    save_mask_tensor(dir / (std::string(stem) + ".kt"), mask);
    write_mask_png(dir / (std::string(stem) + ".png"), mask);
    std::printf("wrote %s.{kt,png} in %s\n", stem, dir.string().c_str());
    std::printf("achieved acceleration %.6g (target %g)\n", achieved_acceleration(mask), r);
    return 0;
}

int cmd_simulate(const CommonArgs& common) {
    const ExperimentConfig cfg = build_config(common);
    const fs::path out_root = resolve_output_root(common.out, cfg);
    const fs::path data = data_root_for(common, out_root);
    synthesize_dataset(cfg, data);
    const auto records = read_manifest(data);
    std::printf("dataset at %s\n", data.string().c_str());
    for (const char* split : {"train", "val", "test"})
        std::printf("  %s: %zu slices\n", split, manifest_split(records, split).size());
    return 0;
}

int cmd_train(const CommonArgs& common, const std::string& scheme_s, int stop_after) {
    const ExperimentConfig cfg = build_config(common);
    const fs::path out_root = resolve_output_root(common.out, cfg);
    const fs::path data = data_root_for(common, out_root);
    std::vector<MaskScheme> schemes = cfg.schemes;
    if (!scheme_s.empty()) schemes = {parse_scheme(scheme_s)};
    int rc = 0;
    for (MaskScheme scheme : schemes) {
        const fs::path dir = out_root / (std::string("train_") + scheme_name(scheme));
        const TrainDriverResult res = train_scheme(cfg, data, scheme, dir, stop_after);
        if (res.diverged) {
            std::printf("%s: DIVERGED after iteration %d (finite up to %d); artifacts in %s\n",
                        scheme_name(scheme), res.completed_iterations, res.last_finite_iteration,
                        dir.string().c_str());
            rc = 5;
            continue;
        }
        std::printf("%s: %d iterations done; artifacts in %s\n", scheme_name(scheme),
                    res.completed_iterations, dir.string().c_str());
        if (res.best_val_iteration >= 0)
            std::printf("%s: best validation ssim %.6f at iteration %d\n", scheme_name(scheme),
                        res.best_val_ssim, res.best_val_iteration);
    }
    return rc;
}

int cmd_recon(const CommonArgs& common, const std::string& method_s, const std::string& scheme_s,
              double r, const std::string& split, const std::string& checkpoint, bool trajectory,
              uint64_t mask_seed, bool mask_seed_given, int jobs) {
    const ExperimentConfig cfg = build_config(common);
    const fs::path out_root = resolve_output_root(common.out, cfg);
    const fs::path data = data_root_for(common, out_root);
    ReconOptions opt;
    opt.method = parse_method(method_s);
    opt.scheme = parse_scheme(scheme_s);
    opt.r = r;
    opt.split = split;
    opt.dump_trajectory = trajectory;
    if (mask_seed_given) opt.mask_seed = mask_seed;
    opt.jobs = jobs;
    if (opt.method == ReconMethod::Rim)
        opt.checkpoint = checkpoint.empty()
                             ? out_root / (std::string("train_") + scheme_name(opt.scheme)) /
                                   "best.rimckpt"
                             : fs::path(checkpoint);
    char name[160];
    std::snprintf(name, sizeof name, "recon_%s_%s_r%s_%s", method_name(opt.method),
                  scheme_name(opt.scheme), r_tag(r).c_str(), split.c_str());
    const fs::path dir = out_root / name;
    const MetricsReport rep = run_recon(cfg, data, opt, dir);
    std::printf("reconstructions in %s\n", dir.string().c_str());
    print_report(rep);
    return 0;
}

int cmd_compare(const CommonArgs& common, const std::string& method_s,
                const std::string& rect_ckpt, const std::string& radial_ckpt,
                const std::string& rect_masks, const std::string& radial_masks,
                const std::vector<double>& rs, uint64_t mask_seed, bool mask_seed_given,
                int jobs) {
    const ExperimentConfig cfg = build_config(common);
    const fs::path out_root = resolve_output_root(common.out, cfg);
    const fs::path data = data_root_for(common, out_root);
    CompareOptions opt;
    opt.method = parse_method(method_s);
    if (opt.method == ReconMethod::Rim) {
        opt.rect_checkpoint = rect_ckpt.empty() ? out_root / "train_rectilinear" / "best.rimckpt"
                                                : fs::path(rect_ckpt);
        opt.radial_checkpoint = radial_ckpt.empty() ? out_root / "train_radial" / "best.rimckpt"
                                                    : fs::path(radial_ckpt);
    }
    if (!rect_masks.empty()) opt.rect_mask_scheme = parse_scheme(rect_masks);
    if (!radial_masks.empty()) opt.radial_mask_scheme = parse_scheme(radial_masks);
    opt.accelerations = rs;
    if (mask_seed_given) opt.mask_seed = mask_seed;
    opt.jobs = jobs;
    const fs::path dir = out_root / (std::string("compare_") + method_name(opt.method));
    const CompareResult res = run_compare(cfg, data, opt, dir);
    std::fputs(read_text_file(dir / "comparison.txt").c_str(), stdout);
    std::printf("tables in %s\n", dir.string().c_str());
    (void)res;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compressed-sensing MRI reconstruction laboratory"};
    app.require_subcommand(1);

    CommonArgs c_mask, c_sim, c_train, c_recon, c_cmp;

    CLI::App* mask = app.add_subcommand("mask", "Draw a subsampling mask and report what it achieves");
    add_common(mask, c_mask);
    std::string mask_scheme = "rectilinear";
    double mask_r = 5.0;
    int mask_h = 0, mask_w = 0;
    uint64_t mask_seed = 0;
    mask->add_option("--scheme", mask_scheme, "rectilinear or radial");
    auto* mr = mask->add_option("--r", mask_r, "Target acceleration factor");
    mr->required();
    mask->add_option("--height", mask_h, "Grid rows (default: configuration)");
    mask->add_option("--width", mask_w, "Grid columns (default: configuration)");
    auto* ms = mask->add_option("--seed", mask_seed, "Mask seed (default: configuration)");

    CLI::App* sim = app.add_subcommand("simulate", "Synthesize the phantom dataset");
    add_common(sim, c_sim);

    CLI::App* train = app.add_subcommand("train", "Train reconstruction models per mask scheme");
    add_common(train, c_train);
    std::string train_scheme_s;
    int stop_after = 0;
    train->add_option("--scheme", train_scheme_s, "Train only this scheme (default: all configured)");
    train->add_option("--stop-after", stop_after,
                      "Pause once this absolute iteration count is reached (0 = run to the end)");

    CLI::App* recon = app.add_subcommand("recon", "Reconstruct a data split and score it");
    add_common(recon, c_recon);
    std::string rc_method = "zero-filled", rc_scheme = "rectilinear", rc_split = "test", rc_ckpt;
    double rc_r = 5.0;
    bool rc_traj = false;
    uint64_t rc_mask_seed = 0;
    int rc_jobs = 1;
    recon->add_option("--method", rc_method, "zero-filled, map-cg, or rim");
    recon->add_option("--scheme", rc_scheme, "Mask family: rectilinear or radial");
    recon->add_option("--r", rc_r, "Acceleration factor")->required();
    recon->add_option("--split", rc_split, "train, val, or test");
    recon->add_option("--checkpoint", rc_ckpt, "Model checkpoint (default: trained best)");
    recon->add_flag("--trajectory", rc_traj, "Also write one image per inference step");
    auto* rms = recon->add_option("--mask-seed", rc_mask_seed, "Evaluation mask seed base");
    recon->add_option("--jobs", rc_jobs, "Worker threads across slices")->check(CLI::PositiveNumber);

    CLI::App* cmp = app.add_subcommand("compare", "Score both mask schemes side by side");
    add_common(cmp, c_cmp);
    std::string cp_method = "rim", cp_rect_ckpt, cp_radial_ckpt, cp_rect_masks, cp_radial_masks;
    std::vector<double> cp_rs;
    uint64_t cp_mask_seed = 0;
    int cp_jobs = 1;
    cmp->add_option("--method", cp_method, "zero-filled, map-cg, or rim");
    cmp->add_option("--rect-checkpoint", cp_rect_ckpt, "Checkpoint for the rectilinear row");
    cmp->add_option("--radial-checkpoint", cp_radial_ckpt, "Checkpoint for the radial row");
    cmp->add_option("--rect-mask-scheme", cp_rect_masks,
                    "Mask family measured in the rectilinear row");
    cmp->add_option("--radial-mask-scheme", cp_radial_masks,
                    "Mask family measured in the radial row");
    cmp->add_option("--r", cp_rs, "Acceleration factors (default: configuration)");
    auto* cms = cmp->add_option("--mask-seed", cp_mask_seed, "Evaluation mask seed base");
    cmp->add_option("--jobs", cp_jobs, "Worker threads across slices")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (mask->parsed())
            return cmd_mask(c_mask, mask_scheme, mask_r, mask_h, mask_w, mask_seed,
                            ms->count() > 0);
        if (sim->parsed()) return cmd_simulate(c_sim);
        if (train->parsed()) return cmd_train(c_train, train_scheme_s, stop_after);
        if (recon->parsed())
            return cmd_recon(c_recon, rc_method, rc_scheme, rc_r, rc_split, rc_ckpt, rc_traj,
                             rc_mask_seed, rms->count() > 0, rc_jobs);
        if (cmp->parsed())
            return cmd_compare(c_cmp, cp_method, cp_rect_ckpt, cp_radial_ckpt, cp_rect_masks,
                               cp_radial_masks, cp_rs, cp_mask_seed, cms->count() > 0, cp_jobs);
    } catch (const infeasible_acceleration& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const missing_artifact& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const divergence_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 5;
    } catch (const format_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::ios_base::failure& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
