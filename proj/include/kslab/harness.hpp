#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kslab/config.hpp"
#include "kslab/metrics.hpp"
#include "kslab/rim.hpp"

namespace kslab {

/** A required input (dataset, checkpoint, manifest entry) is absent. */
struct missing_artifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/** One manifest line: slice location, measurement shape, and its split. */
struct SliceRecord {
    std::string stem;  // dataset-relative prefix, e.g. "train/vol000/slice00"
    int coils = 0, height = 0, width = 0;
    std::string split;  // train | val | test
};

struct LoadedSlice {
    RealImage phantom;  // ground-truth magnitude (coil-combined reference)
    CoilStack sens;
    CoilStack kspace;  // full noisy acquisition
};

/**
 * Synthesizes the split volumes: per slice a perturbed phantom, the simulated
 * coil sensitivities, and its full noisy acquisition, all as tensor files,
 * plus manifest.txt with one `stem coils x h x w split` line per slice.
 * Phantom jitter and measurement noise draw from separate streams of the
 * noise seed, so the same config always reproduces the dataset byte for byte.
 */
void synthesize_dataset(const ExperimentConfig& cfg, const std::filesystem::path& root);

/** Parses and checks manifest.txt (unique stems, known splits, sane shapes). */
std::vector<SliceRecord> read_manifest(const std::filesystem::path& root);

std::vector<SliceRecord> manifest_split(const std::vector<SliceRecord>& records,
                                        const std::string& split);

LoadedSlice load_slice(const std::filesystem::path& root, const SliceRecord& rec);

/** Deterministic held-out mask stream, keyed by scheme, acceleration, slice. */
uint64_t eval_mask_seed(uint64_t base, MaskScheme scheme, double r, int slice_index);

/** Scheme dispatch; `Full` ignores r and the seed. */
SamplingMask make_scheme_mask(MaskScheme scheme, int height, int width, double r, uint64_t seed);

struct TrainDriverResult {
    int completed_iterations = 0;
    bool diverged = false;
    int last_finite_iteration = -1;  // highest iteration with a finite loss
    double best_val_ssim = 0.0;
    int best_val_iteration = -1;
    std::filesystem::path best_checkpoint;
};

/**
 * Trains one scheme's model from the train split, scoring the val split every
 * eval_every iterations and checkpointing the best mean-SSIM model. Writes
 * into out_dir: best.rimckpt, last.rimckpt, trainstate.bin, loss.csv,
 * validation.csv. When last.rimckpt + trainstate.bin already exist the run
 * resumes where it stopped and the continued curves are bit-identical to an
 * uninterrupted run; stop_after > 0 halts once that absolute iteration count
 * is reached. Test-split slices are never opened here. On divergence the
 * result reports the last finite iteration and the loss curve keeps the
 * non-finite final entry.
 */
TrainDriverResult train_scheme(const ExperimentConfig& cfg,
                               const std::filesystem::path& dataset_root, MaskScheme scheme,
                               const std::filesystem::path& out_dir, int stop_after = 0);

struct ReconOptions {
    ReconMethod method = ReconMethod::ZeroFilled;
    MaskScheme scheme = MaskScheme::Rectilinear;
    double r = 5.0;
    std::string split = "test";
    std::filesystem::path checkpoint;   // rim only
    bool dump_trajectory = false;       // rim only: one image per time step
    std::optional<uint64_t> mask_seed;  // defaults to the config mask seed
    int jobs = 1;                       // worker threads across slices
};

/**
 * Reconstructs every slice of a split under retrospective subsampling.
 * Per slice: `<flat>.recon.kt` (raw magnitudes; metrics always use these),
 * `<flat>.recon.png` (min-max normalized), `<flat>.error.png` (|pred-target|
 * on a fixed 0..max(target) scale so methods share one color map), optional
 * `<flat>.stepNN.png` trajectory frames, and metrics.csv for the whole run.
 * Masks come from eval_mask_seed, so every method sees identical masks.
 */
MetricsReport run_recon(const ExperimentConfig& cfg, const std::filesystem::path& dataset_root,
                        const ReconOptions& opt, const std::filesystem::path& out_dir);

struct CompareOptions {
    ReconMethod method = ReconMethod::Rim;
    std::filesystem::path rect_checkpoint;
    std::filesystem::path radial_checkpoint;
    // The mask family each row is measured under; overriding these lets both
    // rows share one family (the equal-footing / tie configuration).
    MaskScheme rect_mask_scheme = MaskScheme::Rectilinear;
    MaskScheme radial_mask_scheme = MaskScheme::Radial;
    std::vector<double> accelerations;  // empty = config accelerations
    std::optional<uint64_t> mask_seed;
    int jobs = 1;
};

struct CompareCell {
    std::string slot;  // row label: "rectilinear" or "radial"
    double r = 0.0;
    MetricsReport report;
};

struct CompareResult {
    std::vector<CompareCell> cells;  // grouped by acceleration, rectilinear row first
    bool radial_ordering = false;    // radial mean SSIM strictly higher at every R
};

/**
 * The head-to-head table: reconstructs the test split for every acceleration
 * under each slot's mask family (and checkpoint, for the learned method),
 * then writes comparison.csv, an aligned comparison.txt ending in the
 * ORDERING line, and per-slice metrics under cell_<slot>_r<R>/.
 */
CompareResult run_compare(const ExperimentConfig& cfg, const std::filesystem::path& dataset_root,
                          const CompareOptions& opt, const std::filesystem::path& out_dir);

}  // namespace kslab
