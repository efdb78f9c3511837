#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lintrain {

/// Flat `key = value` experiment configuration (one per line, '#' comments).
/// Unknown keys are rejected; every numeric field is range-checked by
/// validate_config.
struct ExperimentConfig {
    // architecture
    std::string arch = "lenet"; // lenet | mlp | file
    std::string arch_file;      // layer-list path when arch = file
    std::vector<std::int64_t> mlp_dims = {2, 16, 2};
    std::int64_t width_factor = 1;
    std::string model = "standard"; // standard | linearized | paired

    // data
    std::string dataset = "synth"; // mnist | cifar10 | synth
    std::string data_dir = "data/mnist";
    std::int64_t subset_per_class = 0;      // 0 = full split
    std::int64_t test_subset_per_class = 0; // 0 = full split
    bool normalize = true;
    std::int64_t synth_train = 256;
    std::int64_t synth_test = 64;
    std::int64_t synth_dim = 10;
    std::int64_t synth_classes = 2;
    double synth_shift = 0.0;
    double synth_scale = 1.0; // overall input magnitude (applied after the shift)

    // training
    std::uint64_t seed = 1;
    std::int64_t epochs = 100;
    std::int64_t batch_size = 32;
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-5;
    bool decay_biases = true;
    bool schedule = false;
    double schedule_decay = 10.0;
    std::int64_t schedule_period = 30;
    // optimizer overrides for the linearized model; negative = inherit
    double lin_lr = -1.0;
    double lin_weight_decay = -1.0;

    // logging / output
    std::int64_t probe_count = 3;
    std::int64_t log_cadence = 1;
    double divergence_threshold = 0.1;
    std::string float_width = "f64"; // f32 | f64
    std::string out_dir = "runs";

    // effrank sweep
    std::vector<std::int64_t> widths = {1};
    std::int64_t effrank_m = 100;
    std::int64_t embed_block_elems = std::int64_t(1) << 26;
};

/// Applies one `key = value` assignment; throws ConfigError on unknown keys
/// or unparseable values.
void apply_config_key(ExperimentConfig& config, const std::string& key,
                      const std::string& value);

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Range/consistency checks; throws ConfigError.
void validate_config(const ExperimentConfig& config);

/// Canonical `key = value` dump (fixed key order, round-trip floats).
std::string config_echo(const ExperimentConfig& config);

} // namespace lintrain
