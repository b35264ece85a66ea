#include "kslab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "kslab/coils.hpp"
#include "kslab/forward.hpp"
#include "kslab/io.hpp"
#include "kslab/phantom.hpp"
#include "kslab/recon.hpp"
#include "kslab/rng.hpp"

namespace fs = std::filesystem;

namespace kslab {
namespace {

constexpr char kStateMagic[8] = {'K', 'S', 'T', 'R', 'A', 'I', 'N', '1'};

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string strf(const char* fmt, ...) {
    char buf[256];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return buf;
}

std::string r_tag(double r) { return strf("%g", r); }

/** "train/vol000/slice00" -> "train_vol000_slice00" for flat output names. */
std::string flat_name(const std::string& stem) {
    std::string out = stem;
    std::replace(out.begin(), out.end(), '/', '_');
    return out;
}

fs::path slice_file(const fs::path& root, const SliceRecord& rec, const char* suffix) {
    return root / (rec.stem + suffix);
}

uint64_t scheme_tag(MaskScheme s) {
    switch (s) {
        case MaskScheme::Full: return 0;
        case MaskScheme::Rectilinear: return 1;
        case MaskScheme::Radial: return 2;
    }
    return 0;
}

/** Runs fn(0..n-1), fanning out over worker threads when jobs > 1. */
void for_each_index(int n, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mu;
    std::exception_ptr err;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min(jobs, n);
    pool.reserve(count);
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

TensorData tensor_record(const Tensor& t) {
    TensorData d;
    d.dtype = TensorData::Dtype::F64;
    d.dims = {uint64_t(t.d0), uint64_t(t.d1), uint64_t(t.d2), uint64_t(t.d3)};
    d.f64 = t.v;
    return d;
}

Tensor tensor_from_record(const TensorData& d, const char* what) {
    if (d.dtype != TensorData::Dtype::F64 || d.dims.size() != 4)
        throw format_error(std::string(what) + ": expected a rank-4 real tensor");
    Tensor t(int(d.dims[0]), int(d.dims[1]), int(d.dims[2]), int(d.dims[3]));
    t.v = d.f64;
    return t;
}

/** Progress metadata shared between stop/resume boundaries. */
struct TrainMeta {
    double best_ssim = -std::numeric_limits<double>::infinity();
    uint32_t best_plus1 = 0;  // 1 + best iteration; 0 = never evaluated
};

void save_train_state(const fs::path& path, const TrainState& st, const TrainMeta& meta) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw format_error("cannot open for writing: " + path.string());
    os.write(kStateMagic, sizeof kStateMagic);
    wire::put_u32(os, uint32_t(st.next_iter));
    wire::put_f64(os, st.scale_sum);
    wire::put_f64(os, meta.best_ssim);
    wire::put_u32(os, meta.best_plus1);
    wire::put_u32(os, uint32_t(st.m1.size()));
    for (size_t p = 0; p < st.m1.size(); ++p) {
        write_tensor_stream(os, tensor_record(st.m1[p]));
        write_tensor_stream(os, tensor_record(st.m2[p]));
    }
    if (!os) throw format_error("write failed: " + path.string());
}

void load_train_state(const fs::path& path, const RimModel& model, TrainState& st,
                      TrainMeta& meta) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw format_error("cannot open: " + path.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kStateMagic, sizeof magic) != 0)
        throw format_error("not a training state file: " + path.string());
    st.next_iter = int(wire::get_u32(is));
    st.scale_sum = wire::get_f64(is);
    meta.best_ssim = wire::get_f64(is);
    meta.best_plus1 = wire::get_u32(is);
    const uint32_t n = wire::get_u32(is);
    auto named = rim_named_parameters(model);
    if (n != named.size())
        throw format_error("training state does not match the model: " + path.string());
    st.m1.clear();
    st.m2.clear();
    for (uint32_t p = 0; p < n; ++p) {
        st.m1.push_back(tensor_from_record(read_tensor_stream(is), "training state"));
        st.m2.push_back(tensor_from_record(read_tensor_stream(is), "training state"));
        if (!st.m1.back().same_shape(*named[p].second) ||
            !st.m2.back().same_shape(*named[p].second))
            throw format_error("training state does not match the model: " + path.string());
    }
}

/**
 * Reopens a per-iteration CSV for appending. Fresh runs get a bare header;
 * resumed runs keep only rows below the resume point, so a file left over
 * from a longer or interrupted run cannot leak stale rows.
 */
std::ofstream reopen_csv(const fs::path& path, const std::string& header, bool resuming,
                         int keep_below) {
    std::string content = header + "\n";
    if (resuming && fs::exists(path)) {
        std::istringstream in(read_text_file(path));
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (first) {
                first = false;
                continue;
            }
            char* end = nullptr;
            const long iter = std::strtol(line.c_str(), &end, 10);
            if (end == line.c_str() || *end != ',') continue;
            if (iter < keep_below) content += line + "\n";
        }
    }
    write_text_file(path, content);
    std::ofstream os(path, std::ios::binary | std::ios::app);
    if (!os) throw format_error("cannot open for appending: " + path.string());
    return os;
}

bool same_rim_config(const RimConfig& a, const RimConfig& b) {
    return a.time_steps == b.time_steps && a.hidden_channels == b.hidden_channels &&
           a.kernel_in == b.kernel_in && a.kernel_mid == b.kernel_mid &&
           a.kernel_out == b.kernel_out && a.standardize_input == b.standardize_input;
}

}  // namespace

void synthesize_dataset(const ExperimentConfig& cfg, const fs::path& root) {
    validate_config(cfg);
    fs::create_directories(root);
    // One simulated coil array serves every slice, like a fixed receive setup.
    const CoilStack sens = simulate_sensitivities(cfg.height, cfg.width, cfg.n_coils);
    const struct {
        const char* name;
        int volumes;
    } splits[] = {{"train", cfg.splits.train_volumes},
                  {"val", cfg.splits.val_volumes},
                  {"test", cfg.splits.test_volumes}};

    std::string manifest;
    int vol_global = 0, slice_global = 0;
    for (const auto& split : splits) {
        for (int v = 0; v < split.volumes; ++v, ++vol_global) {
            const std::string vol = strf("vol%03d", v);
            fs::create_directories(root / split.name / vol);
            // Stream 1 of the noise seed drives anatomy, stream 2 measurement
            // noise; slices of one volume jitter around a shared base.
            const uint64_t vol_seed = mix_seed(mix_seed(cfg.seeds.noise, 1), vol_global);
            for (int s = 0; s < cfg.splits.slices_per_volume; ++s, ++slice_global) {
                const std::string stem = std::string(split.name) + "/" + vol + strf("/slice%02d", s);
                const RealImage phantom =
                    perturbed_shepp_logan(cfg.height, cfg.width, mix_seed(vol_seed, s));
                const CoilStack kspace = simulate_acquisition(
                    phantom, sens, cfg.noise_std,
                    mix_seed(mix_seed(cfg.seeds.noise, 2), slice_global));
                save_real_image(root / (stem + ".phantom.kt"), phantom);
                save_coil_stack(root / (stem + ".sens.kt"), sens);
                save_coil_stack(root / (stem + ".kspace.kt"), kspace);
                manifest += stem + strf(" %dx%dx%d ", cfg.n_coils, cfg.height, cfg.width) +
                            split.name + "\n";
            }
        }
    }
    write_text_file(root / "manifest.txt", manifest);
}

std::vector<SliceRecord> read_manifest(const fs::path& root) {
    const fs::path path = root / "manifest.txt";
    if (!fs::exists(path)) throw missing_artifact("no dataset manifest at " + path.string());
    std::istringstream in(read_text_file(path));
    std::vector<SliceRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        SliceRecord rec;
        std::string shape;
        if (!(ls >> rec.stem >> shape >> rec.split))
            throw format_error(strf("manifest line %d: expected `stem shape split`", lineno));
        if (std::sscanf(shape.c_str(), "%dx%dx%d", &rec.coils, &rec.height, &rec.width) != 3 ||
            rec.coils < 1 || rec.height < 1 || rec.width < 1)
            throw format_error(strf("manifest line %d: bad shape '%s'", lineno, shape.c_str()));
        if (rec.split != "train" && rec.split != "val" && rec.split != "test")
            throw format_error(strf("manifest line %d: unknown split '%s'", lineno,
                                    rec.split.c_str()));
        for (const SliceRecord& prev : records)
            if (prev.stem == rec.stem)
                throw format_error(strf("manifest line %d: duplicate slice '%s'", lineno,
                                        rec.stem.c_str()));
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw format_error("empty dataset manifest: " + path.string());
    return records;
}

std::vector<SliceRecord> manifest_split(const std::vector<SliceRecord>& records,
                                        const std::string& split) {
    std::vector<SliceRecord> out;
    for (const SliceRecord& r : records)
        if (r.split == split) out.push_back(r);
    return out;
}

LoadedSlice load_slice(const fs::path& root, const SliceRecord& rec) {
    for (const char* suffix : {".phantom.kt", ".sens.kt", ".kspace.kt"})
        if (!fs::exists(slice_file(root, rec, suffix)))
            throw missing_artifact("missing slice file: " + slice_file(root, rec, suffix).string());
    LoadedSlice sl;
    sl.phantom = load_real_image(slice_file(root, rec, ".phantom.kt"));
    sl.sens = load_coil_stack(slice_file(root, rec, ".sens.kt"));
    sl.kspace = load_coil_stack(slice_file(root, rec, ".kspace.kt"));
    if (sl.phantom.height() != rec.height || sl.phantom.width() != rec.width ||
        int(sl.sens.size()) != rec.coils || int(sl.kspace.size()) != rec.coils ||
        !sl.sens.front().same_shape(sl.kspace.front()) ||
        sl.sens.front().height() != rec.height || sl.sens.front().width() != rec.width)
        throw format_error("slice files disagree with the manifest: " + rec.stem);
    return sl;
}

uint64_t eval_mask_seed(uint64_t base, MaskScheme scheme, double r, int slice_index) {
    uint64_t s = mix_seed(base, 0xE7A1);
    s = mix_seed(s, scheme_tag(scheme));
    s = mix_seed(s, uint64_t(std::llround(r * 1024.0)));
    return mix_seed(s, uint64_t(slice_index));
}

SamplingMask make_scheme_mask(MaskScheme scheme, int height, int width, double r,
                              uint64_t seed) {
    switch (scheme) {
        case MaskScheme::Full: return make_full_mask(height, width);
        case MaskScheme::Rectilinear: return make_rectilinear_mask(height, width, r, seed);
        case MaskScheme::Radial: return make_radial_mask(height, width, r, seed);
    }
    throw std::invalid_argument("unknown mask scheme");
}

TrainDriverResult train_scheme(const ExperimentConfig& cfg, const fs::path& dataset_root,
                               MaskScheme scheme, const fs::path& out_dir, int stop_after) {
    validate_config(cfg);
    const auto records = read_manifest(dataset_root);
    const auto train_recs = manifest_split(records, "train");
    const auto val_recs = manifest_split(records, "val");
    if (train_recs.empty())
        throw missing_artifact("training split is empty in " + dataset_root.string());

    std::vector<TrainSample> data;
    data.reserve(train_recs.size());
    for (const SliceRecord& rec : train_recs) {
        LoadedSlice sl = load_slice(dataset_root, rec);
        data.push_back({std::move(sl.phantom), std::move(sl.kspace), std::move(sl.sens)});
    }

    // Fixed validation measurements: one deterministic mask per slice and
    // acceleration, reused at every cadence point so scores are comparable.
    struct ValCase {
        CoilStack masked, sens;
        SamplingMask mask;
        RealImage target;
    };
    std::vector<std::vector<ValCase>> val_cases(cfg.accelerations.size());
    const uint64_t val_base = mix_seed(cfg.seeds.mask, 0x56414C);
    for (size_t ri = 0; ri < cfg.accelerations.size(); ++ri) {
        const double r = cfg.accelerations[ri];
        for (size_t i = 0; i < val_recs.size(); ++i) {
            LoadedSlice sl = load_slice(dataset_root, val_recs[i]);
            ValCase vc;
            vc.mask = make_scheme_mask(scheme, val_recs[i].height, val_recs[i].width, r,
                                       eval_mask_seed(val_base, scheme, r, int(i)));
            vc.masked = apply_mask(sl.kspace, vc.mask);
            vc.sens = std::move(sl.sens);
            vc.target = std::move(sl.phantom);
            val_cases[ri].push_back(std::move(vc));
        }
    }

    TrainSchedule sched = cfg.schedule;
    sched.accelerations = cfg.accelerations;
    sched.scheme = scheme;
    sched.seed = mix_seed(cfg.seeds.mask, scheme_tag(scheme));

    fs::create_directories(out_dir);
    const fs::path best_path = out_dir / "best.rimckpt";
    const fs::path last_path = out_dir / "last.rimckpt";
    const fs::path state_path = out_dir / "trainstate.bin";
    const fs::path loss_path = out_dir / "loss.csv";
    const fs::path val_path = out_dir / "validation.csv";

    RimModel model;
    TrainState st;
    TrainMeta meta;
    const bool resuming = fs::exists(last_path) && fs::exists(state_path);
    if (resuming) {
        model = load_rim_checkpoint(last_path.string());
        if (!same_rim_config(model.config, cfg.rim))
            throw format_error("checkpoint disagrees with the configured network: " +
                               last_path.string());
        load_train_state(state_path, model, st, meta);
    } else {
        model = make_rim_model(cfg.rim, cfg.seeds.init);
    }

    const int start_iter = st.next_iter;
    TrainSchedule run = sched;
    if (stop_after > 0) run.iterations = std::min(run.iterations, stop_after);

    std::string val_header = "iteration";
    for (double r : cfg.accelerations) val_header += ",ssim_r" + r_tag(r);
    val_header += ",ssim_mean";
    std::ofstream loss_os = reopen_csv(loss_path, "iteration,loss", resuming, start_iter);
    std::ofstream val_os = reopen_csv(val_path, val_header, resuming, start_iter);

    const NllConfig val_nll{sched.sigma2};
    auto evaluate = [&](const RimModel& m, std::vector<double>& per_r) {
        per_r.assign(cfg.accelerations.size(), std::numeric_limits<double>::quiet_NaN());
        double total = 0.0;
        int counted = 0;
        for (size_t ri = 0; ri < val_cases.size(); ++ri) {
            if (val_cases[ri].empty()) continue;
            double acc = 0.0;
            bool ok = true;
            for (const ValCase& vc : val_cases[ri]) {
                try {
                    const auto traj = rim_infer(m, vc.masked, vc.sens, vc.mask, val_nll);
                    acc += ssim(magnitude(traj.back()), vc.target);
                } catch (const divergence_error&) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            per_r[ri] = acc / double(val_cases[ri].size());
            total += per_r[ri];
            ++counted;
        }
        return counted ? total / counted : std::numeric_limits<double>::quiet_NaN();
    };

    int rows_written = 0;
    auto hook = [&](int iter, const RimModel& m, double loss) {
        loss_os << iter << ',' << g17(loss) << '\n';
        ++rows_written;
        const bool cadence = (iter + 1) % cfg.eval_every == 0 || iter + 1 == sched.iterations;
        if (!cadence || val_recs.empty()) return;
        std::vector<double> per_r;
        const double mean = evaluate(m, per_r);
        val_os << iter;
        for (double v : per_r) val_os << ',' << g17(v);
        val_os << ',' << g17(mean) << '\n';
        if (std::isfinite(mean) && mean > meta.best_ssim) {
            meta.best_ssim = mean;
            meta.best_plus1 = uint32_t(iter + 1);
            save_rim_checkpoint(best_path.string(), m);
        }
    };

    TrainDriverResult res;
    res.best_checkpoint = best_path;
    TrainReport report;
    try {
        model = rim_train(std::move(model), data, run, &report, hook, &st);
        save_rim_checkpoint(last_path.string(), model);
        save_train_state(state_path, st, meta);
        // A run that never reached a cadence point falls back to the final
        // weights, so the promised checkpoint always exists.
        if (meta.best_plus1 == 0) save_rim_checkpoint(best_path.string(), model);
    } catch (const divergence_error&) {
        for (size_t k = rows_written; k < report.losses.size(); ++k)
            loss_os << (start_iter + int(k)) << ',' << g17(report.losses[k]) << '\n';
        res.diverged = true;
    }
    res.completed_iterations = st.next_iter;
    int last_finite = start_iter - 1;
    for (size_t k = 0; k < report.losses.size(); ++k)
        if (std::isfinite(report.losses[k])) last_finite = start_iter + int(k);
    res.last_finite_iteration = last_finite;
    res.best_val_ssim = meta.best_ssim;
    res.best_val_iteration = int(meta.best_plus1) - 1;
    return res;
}

MetricsReport run_recon(const ExperimentConfig& cfg, const fs::path& dataset_root,
                        const ReconOptions& opt, const fs::path& out_dir) {
    validate_config(cfg);
    const auto records = manifest_split(read_manifest(dataset_root), opt.split);
    if (records.empty())
        throw missing_artifact("split '" + opt.split + "' has no slices in " +
                               dataset_root.string());

    RimModel model;
    if (opt.method == ReconMethod::Rim) {
        if (opt.checkpoint.empty() || !fs::exists(opt.checkpoint))
            throw missing_artifact("reconstruction checkpoint not found: " +
                                   opt.checkpoint.string());
        model = load_rim_checkpoint(opt.checkpoint.string());
    }

    fs::create_directories(out_dir);
    const uint64_t seed_base = opt.mask_seed.value_or(cfg.seeds.mask);
    const NllConfig nll_cfg{cfg.schedule.sigma2};

    const int n = int(records.size());
    std::vector<RealImage> preds(n), targets(n);
    std::vector<std::string> ids(n);
    for_each_index(n, opt.jobs, [&](int i) {
        const SliceRecord& rec = records[i];
        const LoadedSlice sl = load_slice(dataset_root, rec);
        const SamplingMask mask =
            make_scheme_mask(opt.scheme, rec.height, rec.width, opt.r,
                             eval_mask_seed(seed_base, opt.scheme, opt.r, i));
        const CoilStack masked = apply_mask(sl.kspace, mask);

        ComplexImage xc;
        std::vector<ComplexImage> traj;
        switch (opt.method) {
            case ReconMethod::ZeroFilled:
                xc = zero_filled_sense(masked, sl.sens);
                break;
            case ReconMethod::MapCg: {
                MapObjective obj;
                obj.data_term = nll_cfg;
                obj.reg_lambda = cfg.map.lambda;
                obj.max_iters = cfg.map.max_iters;
                obj.tol = cfg.map.tol;
                xc = solve_map_cg(masked, sl.sens, mask, obj);
                break;
            }
            case ReconMethod::Rim: {
                traj = rim_infer(model, masked, sl.sens, mask, nll_cfg);
                xc = traj.back();
                break;
            }
        }
        RealImage img = magnitude(xc);

        const std::string flat = flat_name(rec.stem);
        save_real_image(out_dir / (flat + ".recon.kt"), img);
        write_png16(out_dir / (flat + ".recon.png"), img);
        double peak = 0.0;
        for (size_t k = 0; k < sl.phantom.size(); ++k) peak = std::max(peak, sl.phantom[k]);
        RealImage err(img.height(), img.width());
        for (size_t k = 0; k < err.size(); ++k) err[k] = std::abs(img[k] - sl.phantom[k]);
        // Fixed 0..peak window: error maps stay comparable across methods.
        write_png16_scaled(out_dir / (flat + ".error.png"), err, 0.0, peak > 0.0 ? peak : 1.0);
        if (opt.method == ReconMethod::Rim && opt.dump_trajectory)
            for (size_t t = 0; t < traj.size(); ++t)
                write_png16(out_dir / (flat + strf(".step%02zu.png", t)), magnitude(traj[t]));

        preds[i] = std::move(img);
        targets[i] = sl.phantom;
        ids[i] = rec.stem;
    });

    const MetricsReport report = evaluate_pair_set(preds, targets, &ids);
    write_text_file(out_dir / "metrics.csv", metrics_csv(report));
    return report;
}

CompareResult run_compare(const ExperimentConfig& cfg, const fs::path& dataset_root,
                          const CompareOptions& opt, const fs::path& out_dir) {
    validate_config(cfg);
    const std::vector<double> rs =
        opt.accelerations.empty() ? cfg.accelerations : opt.accelerations;
    const struct {
        const char* label;
        MaskScheme masks;
        const fs::path* checkpoint;
    } slots[] = {{"rectilinear", opt.rect_mask_scheme, &opt.rect_checkpoint},
                 {"radial", opt.radial_mask_scheme, &opt.radial_checkpoint}};
    if (opt.method == ReconMethod::Rim)
        for (const auto& slot : slots)
            if (slot.checkpoint->empty() || !fs::exists(*slot.checkpoint))
                throw missing_artifact(std::string("comparison needs a ") + slot.label +
                                       " checkpoint (got '" + slot.checkpoint->string() + "')");

    fs::create_directories(out_dir);
    CompareResult result;
    for (double r : rs) {
        for (const auto& slot : slots) {
            ReconOptions ro;
            ro.method = opt.method;
            ro.scheme = slot.masks;
            ro.r = r;
            ro.split = "test";
            ro.checkpoint = *slot.checkpoint;
            ro.mask_seed = opt.mask_seed;
            ro.jobs = opt.jobs;
            const fs::path cell_dir =
                out_dir / ("cell_" + std::string(slot.label) + "_r" + r_tag(r));
            CompareCell cell;
            cell.slot = slot.label;
            cell.r = r;
            cell.report = run_recon(cfg, dataset_root, ro, cell_dir);
            result.cells.push_back(std::move(cell));
        }
    }

    bool radial_wins = true;
    for (size_t k = 0; k + 1 < result.cells.size(); k += 2) {
        const MetricAggregate& rect = result.cells[k].report.ssim;
        const MetricAggregate& rad = result.cells[k + 1].report.ssim;
        if (!(rad.mean > rect.mean)) radial_wins = false;
    }
    result.radial_ordering = radial_wins;

    std::string csv = "r,scheme,psnr_mean,psnr_std,ssim_mean,ssim_std,vif_mean,vif_std\n";
    for (const CompareCell& c : result.cells) {
        csv += r_tag(c.r) + "," + c.slot;
        for (const MetricAggregate* m : {&c.report.psnr, &c.report.ssim, &c.report.vif})
            csv += "," + g17(m->mean) + "," + g17(m->stddev);
        csv += "\n";
    }
    write_text_file(out_dir / "comparison.csv", csv);

    std::string txt = strf("%3s  %-12s  %-18s  %-18s  %-18s\n", "R", "scheme", "PSNR", "SSIM",
                           "VIF");
    for (const CompareCell& c : result.cells) {
        txt += strf("%3s  %-12s", r_tag(c.r).c_str(), c.slot.c_str());
        for (const MetricAggregate* m : {&c.report.psnr, &c.report.ssim, &c.report.vif})
            txt += strf("  %8.4f +- %-6.4f", m->mean, m->stddev);
        txt += "\n";
    }
    txt += std::string("ORDERING=") + (result.radial_ordering ? "RADIAL" : "MIXED") + "\n";
    write_text_file(out_dir / "comparison.txt", txt);
    return result;
}

}  // namespace kslab
