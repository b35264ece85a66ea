#include "kslab/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "kslab/io.hpp"

namespace kslab {
namespace {

std::string trim(const std::string& s) {
    const size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::string cur;
    std::istringstream ss(value);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (cur.empty()) throw std::invalid_argument("empty list item");
        items.push_back(cur);
    }
    if (items.empty()) throw std::invalid_argument("empty list");
    return items;
}

double to_double(const std::string& v) {
    size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("expected a number, got '" + v + "'");
    }
    if (used != v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
    return d;
}

int to_int(const std::string& v) {
    size_t used = 0;
    long n = 0;
    try {
        n = std::stol(v, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("expected an integer, got '" + v + "'");
    }
    if (used != v.size() || n < INT32_MIN || n > INT32_MAX)
        throw std::invalid_argument("expected an integer, got '" + v + "'");
    return static_cast<int>(n);
}

uint64_t to_u64(const std::string& v) {
    size_t used = 0;
    unsigned long long n = 0;
    try {
        n = std::stoull(v, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
    }
    if (used != v.size() || v.find('-') != std::string::npos)
        throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
    return n;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("expected true/false, got '" + v + "'");
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join_doubles(const std::vector<double>& xs) {
    std::string out;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += g17(xs[i]);
    }
    return out;
}

}  // namespace

const char* scheme_name(MaskScheme s) {
    switch (s) {
        case MaskScheme::Full: return "full";
        case MaskScheme::Rectilinear: return "rectilinear";
        case MaskScheme::Radial: return "radial";
    }
    return "?";
}

MaskScheme parse_scheme(const std::string& name) {
    if (name == "rectilinear") return MaskScheme::Rectilinear;
    if (name == "radial") return MaskScheme::Radial;
    throw std::invalid_argument("unknown subsampling scheme '" + name +
                                "' (expected rectilinear or radial)");
}

const char* method_name(ReconMethod m) {
    switch (m) {
        case ReconMethod::ZeroFilled: return "zero-filled";
        case ReconMethod::MapCg: return "map-cg";
        case ReconMethod::Rim: return "rim";
    }
    return "?";
}

ReconMethod parse_method(const std::string& name) {
    if (name == "zero-filled") return ReconMethod::ZeroFilled;
    if (name == "map-cg") return ReconMethod::MapCg;
    if (name == "rim") return ReconMethod::Rim;
    throw std::invalid_argument("unknown reconstruction method '" + name +
                                "' (expected zero-filled, map-cg, or rim)");
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "experiment.height") cfg.height = to_int(value);
    else if (key == "experiment.width") cfg.width = to_int(value);
    else if (key == "experiment.coils") cfg.n_coils = to_int(value);
    else if (key == "experiment.noise_std") cfg.noise_std = to_double(value);
    else if (key == "experiment.accelerations") {
        cfg.accelerations.clear();
        for (const std::string& item : split_list(value)) cfg.accelerations.push_back(to_double(item));
    } else if (key == "experiment.schemes") {
        cfg.schemes.clear();
        for (const std::string& item : split_list(value)) cfg.schemes.push_back(parse_scheme(item));
    } else if (key == "experiment.methods") {
        cfg.methods.clear();
        for (const std::string& item : split_list(value)) cfg.methods.push_back(parse_method(item));
    } else if (key == "splits.train_volumes") cfg.splits.train_volumes = to_int(value);
    else if (key == "splits.val_volumes") cfg.splits.val_volumes = to_int(value);
    else if (key == "splits.test_volumes") cfg.splits.test_volumes = to_int(value);
    else if (key == "splits.slices_per_volume") cfg.splits.slices_per_volume = to_int(value);
    else if (key == "rim.time_steps") cfg.rim.time_steps = to_int(value);
    else if (key == "rim.hidden_channels") cfg.rim.hidden_channels = to_int(value);
    else if (key == "rim.kernel_in") cfg.rim.kernel_in = to_int(value);
    else if (key == "rim.kernel_mid") cfg.rim.kernel_mid = to_int(value);
    else if (key == "rim.kernel_out") cfg.rim.kernel_out = to_int(value);
    else if (key == "rim.standardize_input") cfg.rim.standardize_input = to_bool(value);
    else if (key == "training.iterations") cfg.schedule.iterations = to_int(value);
    else if (key == "training.batch_size") cfg.schedule.batch_size = to_int(value);
    else if (key == "training.learning_rate") cfg.schedule.lr = to_double(value);
    else if (key == "training.warmup_iters") cfg.schedule.warmup_iters = to_int(value);
    else if (key == "training.decay_every") cfg.schedule.decay_every = to_int(value);
    else if (key == "training.beta1") cfg.schedule.beta1 = to_double(value);
    else if (key == "training.beta2") cfg.schedule.beta2 = to_double(value);
    else if (key == "training.eps") cfg.schedule.eps = to_double(value);
    else if (key == "training.sigma2") cfg.schedule.sigma2 = to_double(value);
    else if (key == "map.lambda") cfg.map.lambda = to_double(value);
    else if (key == "map.max_iters") cfg.map.max_iters = to_int(value);
    else if (key == "map.tol") cfg.map.tol = to_double(value);
    else if (key == "seeds.mask") cfg.seeds.mask = to_u64(value);
    else if (key == "seeds.noise") cfg.seeds.noise = to_u64(value);
    else if (key == "seeds.init") cfg.seeds.init = to_u64(value);
    else if (key == "output.root") cfg.output_root = value;
    else if (key == "output.eval_every") cfg.eval_every = to_int(value);
    else throw std::invalid_argument("unknown configuration key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base) {
    std::istringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        try {
            if (line.front() == '[') {
                if (line.back() != ']') throw std::invalid_argument("unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) throw std::invalid_argument("empty section name");
                continue;
            }
            const size_t eq = line.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw std::invalid_argument("empty key");
            if (section.empty()) throw std::invalid_argument("key outside any [section]");
            apply_config_entry(base, section + "." + key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
    return parse_config_text(read_text_file(path), std::move(base));
}

void validate_config(const ExperimentConfig& cfg) {
    auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
    if (cfg.height < 2 || cfg.width < 2) fail("image size must be at least 2x2");
    if (cfg.n_coils < 1) fail("coil count must be positive");
    if (cfg.noise_std < 0.0) fail("noise level must be non-negative");
    if (cfg.accelerations.empty()) fail("at least one acceleration is required");
    for (double r : cfg.accelerations)
        if (!(r >= 1.0)) fail("accelerations must be >= 1");
    if (cfg.schemes.empty()) fail("at least one subsampling scheme is required");
    if (cfg.methods.empty()) fail("at least one reconstruction method is required");
    if (cfg.splits.train_volumes < 1 || cfg.splits.val_volumes < 0 || cfg.splits.test_volumes < 0)
        fail("split volume counts must be positive (train) / non-negative");
    if (cfg.splits.slices_per_volume < 1) fail("slices per volume must be positive");
    if (cfg.rim.time_steps < 1 || cfg.rim.hidden_channels < 1) fail("degenerate network shape");
    for (int k : {cfg.rim.kernel_in, cfg.rim.kernel_mid, cfg.rim.kernel_out})
        if (k < 1 || k % 2 == 0) fail("convolution kernels must be odd and positive");
    if (cfg.schedule.iterations < 0) fail("iteration count must be non-negative");
    if (cfg.schedule.batch_size < 1) fail("batch size must be positive");
    if (!(cfg.schedule.lr > 0.0)) fail("learning rate must be positive");
    if (cfg.schedule.warmup_iters < 0 || cfg.schedule.decay_every < 0)
        fail("schedule intervals must be non-negative");
    if (!(cfg.schedule.beta1 >= 0.0 && cfg.schedule.beta1 < 1.0) ||
        !(cfg.schedule.beta2 >= 0.0 && cfg.schedule.beta2 < 1.0))
        fail("adam betas must lie in [0, 1)");
    if (!(cfg.schedule.eps > 0.0)) fail("adam epsilon must be positive");
    if (!(cfg.schedule.sigma2 > 0.0)) fail("noise variance weight must be positive");
    if (cfg.map.lambda < 0.0) fail("ridge weight must be non-negative");
    if (cfg.map.max_iters < 1) fail("solver iteration cap must be positive");
    if (!(cfg.map.tol > 0.0)) fail("solver tolerance must be positive");
    if (cfg.eval_every < 1) fail("validation cadence must be positive");
}

std::string config_to_text(const ExperimentConfig& cfg) {
    std::string schemes, methods;
    for (size_t i = 0; i < cfg.schemes.size(); ++i)
        schemes += std::string(i ? ", " : "") + scheme_name(cfg.schemes[i]);
    for (size_t i = 0; i < cfg.methods.size(); ++i)
        methods += std::string(i ? ", " : "") + method_name(cfg.methods[i]);
    std::string out;
    out += "[experiment]\n";
    out += "height = " + std::to_string(cfg.height) + "\n";
    out += "width = " + std::to_string(cfg.width) + "\n";
    out += "coils = " + std::to_string(cfg.n_coils) + "\n";
    out += "noise_std = " + g17(cfg.noise_std) + "\n";
    out += "accelerations = " + join_doubles(cfg.accelerations) + "\n";
    out += "schemes = " + schemes + "\n";
    out += "methods = " + methods + "\n";
    out += "\n[splits]\n";
    out += "train_volumes = " + std::to_string(cfg.splits.train_volumes) + "\n";
    out += "val_volumes = " + std::to_string(cfg.splits.val_volumes) + "\n";
    out += "test_volumes = " + std::to_string(cfg.splits.test_volumes) + "\n";
    out += "slices_per_volume = " + std::to_string(cfg.splits.slices_per_volume) + "\n";
    out += "\n[rim]\n";
    out += "time_steps = " + std::to_string(cfg.rim.time_steps) + "\n";
    out += "hidden_channels = " + std::to_string(cfg.rim.hidden_channels) + "\n";
    out += "kernel_in = " + std::to_string(cfg.rim.kernel_in) + "\n";
    out += "kernel_mid = " + std::to_string(cfg.rim.kernel_mid) + "\n";
    out += "kernel_out = " + std::to_string(cfg.rim.kernel_out) + "\n";
    out += std::string("standardize_input = ") + (cfg.rim.standardize_input ? "true" : "false") +
           "\n";
    out += "\n[training]\n";
    out += "iterations = " + std::to_string(cfg.schedule.iterations) + "\n";
    out += "batch_size = " + std::to_string(cfg.schedule.batch_size) + "\n";
    out += "learning_rate = " + g17(cfg.schedule.lr) + "\n";
    out += "warmup_iters = " + std::to_string(cfg.schedule.warmup_iters) + "\n";
    out += "decay_every = " + std::to_string(cfg.schedule.decay_every) + "\n";
    out += "beta1 = " + g17(cfg.schedule.beta1) + "\n";
    out += "beta2 = " + g17(cfg.schedule.beta2) + "\n";
    out += "eps = " + g17(cfg.schedule.eps) + "\n";
    out += "sigma2 = " + g17(cfg.schedule.sigma2) + "\n";
    out += "\n[map]\n";
    out += "lambda = " + g17(cfg.map.lambda) + "\n";
    out += "max_iters = " + std::to_string(cfg.map.max_iters) + "\n";
    out += "tol = " + g17(cfg.map.tol) + "\n";
    out += "\n[seeds]\n";
    out += "mask = " + std::to_string(cfg.seeds.mask) + "\n";
    out += "noise = " + std::to_string(cfg.seeds.noise) + "\n";
    out += "init = " + std::to_string(cfg.seeds.init) + "\n";
    out += "\n[output]\n";
    if (!cfg.output_root.empty()) out += "root = " + cfg.output_root + "\n";
    out += "eval_every = " + std::to_string(cfg.eval_every) + "\n";
    return out;
}

std::filesystem::path resolve_output_root(const std::string& cli_value,
                                          const ExperimentConfig& cfg) {
    if (!cli_value.empty()) return cli_value;
    if (!cfg.output_root.empty()) return cfg.output_root;
    if (const char* env = std::getenv("KSLAB_OUT"); env && *env) return env;
    return "kslab_out";
}

}  // namespace kslab
