#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tryon/fields.hpp"
#include "tryon/losses.hpp"

namespace tryon {

enum class DatasetSource { Synthetic, Directory };

struct RunConfig {
    Resolution condition{64, 48};
    Resolution output{128, 96};
    LossWeights weights;

    double beta1 = 0.5;
    double beta2 = 0.999;
    double lr_tocg_g = 2e-4;
    double lr_tocg_d = 2e-4;
    double lr_toig_g = 1e-4;
    double lr_toig_d = 4e-4;
    int batch_tocg = 8;
    int batch_toig = 4;
    int64_t iterations = 2000;

    std::uint64_t seed = 0;
    bool deterministic = false;
    /// Intra-op threads; 0 keeps the libtorch default. Deterministic runs use 1.
    int threads = 0;

    bool no_fusion_exchange = false;
    bool no_condition_align = false;
    bool no_occlusion_handling = false;
    bool no_multiscale_losses = false;

    DatasetSource dataset = DatasetSource::Synthetic;
    int synth_n = 256;
    int synth_test_n = 64;
    std::uint64_t data_seed = 0;
    std::string data_root;
    std::string pairs = "train_pairs.txt";
    std::string test_pairs = "test_pairs.txt";
    std::string palette;           // empty: default palette
    std::string perceptual_model;  // empty: random-feature extractor
    int workers = 1;

    double reject_threshold = 0.3;
    double reject_epsilon = 1e-6;
    int log_every = 100;

    /// Throws ConfigError on the first violated constraint.
    void validate() const;
    /// output / condition; a power of two.
    int upscale() const { return output.height / condition.height; }
};

/// A named RunConfig field with string conversion in both directions.
struct ConfigField {
    std::string key;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
    bool is_flag = false;
};

/// Every RunConfig field, in a stable order.
const std::vector<ConfigField>& config_fields();

/// Sets one field by key; throws ConfigError on unknown keys or bad values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

/// Flat "key = value" text, one field per line, '#' comments.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});
std::string serialize_run_config(const RunConfig& config);

}  // namespace tryon
