#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kslab/rim.hpp"
#include "kslab/sampling.hpp"

namespace kslab {

enum class ReconMethod { ZeroFilled, MapCg, Rim };

const char* scheme_name(MaskScheme s);
MaskScheme parse_scheme(const std::string& name);
const char* method_name(ReconMethod m);
ReconMethod parse_method(const std::string& name);

/** Volume counts per split plus the slices stacked in each volume. */
struct SplitSpec {
    int train_volumes = 8;
    int val_volumes = 3;
    int test_volumes = 3;
    int slices_per_volume = 2;
};

/** Independent seed streams; everything else derives from these three. */
struct SeedSpec {
    uint64_t mask = 1001;
    uint64_t noise = 2002;
    uint64_t init = 3003;
};

/** Ridge-regularized least-squares reconstruction settings. */
struct MapSettings {
    double lambda = 1e-3;
    int max_iters = 200;
    double tol = 1e-8;
};

/**
 * One experiment, end to end: synthetic dataset geometry, the subsampling
 * and reconstruction variants to run, network/training hyperparameters, and
 * seed streams. Every field maps to one `section.key` in the flat config file
 * format (see configs/desk.cfg); precedence is CLI flag > file > default.
 */
struct ExperimentConfig {
    int height = 64;
    int width = 64;
    int n_coils = 4;
    double noise_std = 0.005;
    std::vector<double> accelerations{5.0, 10.0};
    std::vector<MaskScheme> schemes{MaskScheme::Rectilinear, MaskScheme::Radial};
    std::vector<ReconMethod> methods{ReconMethod::ZeroFilled, ReconMethod::MapCg,
                                     ReconMethod::Rim};
    RimConfig rim;
    // The schedule's acceleration list, mask scheme, and seed are derived per
    // training run from the fields above; only its scalar hyperparameters are
    // configured directly.
    TrainSchedule schedule;
    MapSettings map;
    SplitSpec splits;
    SeedSpec seeds;
    int eval_every = 50;       // validation cadence in iterations
    std::string output_root;   // empty = $KSLAB_OUT, then "kslab_out"
};

/**
 * Applies one `section.key = value` entry. Throws std::invalid_argument on
 * unknown keys or unparsable values; shared by the file parser and the CLI
 * override path so both speak the same vocabulary.
 */
void apply_config_entry(ExperimentConfig& cfg, const std::string& dotted_key,
                        const std::string& value);

/**
 * Parses the flat key-value format: `[section]` headers, `key = value` lines,
 * `#` comments, blank lines. Entries overwrite the passed-in base.
 */
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = {});

/** Range/consistency checks; throws std::invalid_argument with the offense. */
void validate_config(const ExperimentConfig& cfg);

/** Canonical text rendering; parse_config_text inverts it exactly. */
std::string config_to_text(const ExperimentConfig& cfg);

/**
 * Output root precedence: explicit CLI value, then the config file entry,
 * then the KSLAB_OUT environment variable, then ./kslab_out.
 */
std::filesystem::path resolve_output_root(const std::string& cli_value,
                                          const ExperimentConfig& cfg);

}  // namespace kslab
