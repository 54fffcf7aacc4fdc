#include "tryon/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>

#include "tryon/cond_gen.hpp"

namespace tryon {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& s) {
    Int v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + s + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + s + "'");
}

template <typename T>
ConfigField real(std::string key, std::string help, T RunConfig::*member) {
    auto k = key;
    return {std::move(key), std::move(help),
            [member, k](RunConfig& c, const std::string& s) { c.*member = static_cast<T>(parse_double(k, s)); },
            [member](const RunConfig& c) { return fmt_double(static_cast<double>(c.*member)); }};
}

template <typename T>
ConfigField integer(std::string key, std::string help, T RunConfig::*member) {
    auto k = key;
    return {std::move(key), std::move(help),
            [member, k](RunConfig& c, const std::string& s) { c.*member = parse_int<T>(k, s); },
            [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

ConfigField flag(std::string key, std::string help, bool RunConfig::*member) {
    auto k = key;
    return {std::move(key), std::move(help),
            [member, k](RunConfig& c, const std::string& s) { c.*member = parse_bool(k, s); },
            [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }, true};
}

ConfigField text(std::string key, std::string help, std::string RunConfig::*member) {
    return {std::move(key), std::move(help), [member](RunConfig& c, const std::string& s) { c.*member = s; },
            [member](const RunConfig& c) { return '"' + c.*member + '"'; }};
}

ConfigField weight(std::string key, std::string help, double LossWeights::*member) {
    auto k = key;
    return {std::move(key), std::move(help),
            [member, k](RunConfig& c, const std::string& s) { c.weights.*member = parse_double(k, s); },
            [member](const RunConfig& c) { return fmt_double(c.weights.*member); }};
}

ConfigField resolution_dim(std::string key, std::string help, Resolution RunConfig::*res, int Resolution::*dim) {
    auto k = key;
    return {std::move(key), std::move(help),
            [res, dim, k](RunConfig& c, const std::string& s) { (c.*res).*dim = parse_int<int>(k, s); },
            [res, dim](const RunConfig& c) { return std::to_string((c.*res).*dim); }};
}

std::vector<ConfigField> build_fields() {
    std::vector<ConfigField> f;
    f.push_back(resolution_dim("condition_height", "condition-generator height", &RunConfig::condition, &Resolution::height));
    f.push_back(resolution_dim("condition_width", "condition-generator width", &RunConfig::condition, &Resolution::width));
    f.push_back(resolution_dim("output_height", "image-generator height", &RunConfig::output, &Resolution::height));
    f.push_back(resolution_dim("output_width", "image-generator width", &RunConfig::output, &Resolution::width));
    f.push_back(weight("lambda_ce", "cross-entropy weight", &LossWeights::ce));
    f.push_back(weight("lambda_l1", "multi-scale L1 weight", &LossWeights::l1));
    f.push_back(weight("lambda_vgg", "multi-scale perceptual weight (condition generator)", &LossWeights::vgg));
    f.push_back(weight("lambda_tv", "flow total-variation weight", &LossWeights::tv));
    f.push_back({"scale_weights", "comma-separated weights of the four intermediate flows",
                 [](RunConfig& c, const std::string& s) {
                     std::stringstream ss(s);
                     std::string item;
                     std::size_t i = 0;
                     while (std::getline(ss, item, ',')) {
                         if (i >= c.weights.scale.size()) break;
                         c.weights.scale[i++] = parse_double("scale_weights", item);
                     }
                     if (i != c.weights.scale.size()) throw ConfigError("config key 'scale_weights': expected 4 values");
                 },
                 [](const RunConfig& c) {
                     std::string out;
                     for (std::size_t i = 0; i < c.weights.scale.size(); ++i) {
                         out += (i ? "," : "") + fmt_double(c.weights.scale[i]);
                     }
                     return out;
                 }});
    f.push_back(weight("lambda_toig_vgg", "perceptual weight (image generator)", &LossWeights::toig_vgg));
    f.push_back(weight("lambda_toig_fm", "feature-matching weight (image generator)", &LossWeights::toig_fm));
    f.push_back(real("beta1", "Adam beta1", &RunConfig::beta1));
    f.push_back(real("beta2", "Adam beta2", &RunConfig::beta2));
    f.push_back(real("lr_tocg_g", "condition generator learning rate", &RunConfig::lr_tocg_g));
    f.push_back(real("lr_tocg_d", "condition discriminator learning rate", &RunConfig::lr_tocg_d));
    f.push_back(real("lr_toig_g", "image generator learning rate", &RunConfig::lr_toig_g));
    f.push_back(real("lr_toig_d", "image discriminator learning rate", &RunConfig::lr_toig_d));
    f.push_back(integer("batch_tocg", "condition generator batch size", &RunConfig::batch_tocg));
    f.push_back(integer("batch_toig", "image generator batch size", &RunConfig::batch_toig));
    f.push_back(integer("iterations", "total training iterations", &RunConfig::iterations));
    f.push_back(integer("seed", "training seed", &RunConfig::seed));
    f.push_back(flag("deterministic", "single-threaded bit-reproducible execution", &RunConfig::deterministic));
    f.push_back(integer("threads", "intra-op threads (0 = library default)", &RunConfig::threads));
    f.push_back(flag("no_fusion_exchange", "ablation: no flow/seg exchange in fusion blocks", &RunConfig::no_fusion_exchange));
    f.push_back(flag("no_condition_align", "ablation: no condition aligning", &RunConfig::no_condition_align));
    f.push_back(flag("no_occlusion_handling", "ablation: no body-part occlusion handling", &RunConfig::no_occlusion_handling));
    f.push_back(flag("no_multiscale_losses", "ablation: losses on the final flow only", &RunConfig::no_multiscale_losses));
    f.push_back({"dataset", "synthetic | directory",
                 [](RunConfig& c, const std::string& s) {
                     if (s == "synthetic") {
                         c.dataset = DatasetSource::Synthetic;
                     } else if (s == "directory") {
                         c.dataset = DatasetSource::Directory;
                     } else {
                         throw ConfigError("config key 'dataset': expected synthetic or directory, got '" + s + "'");
                     }
                 },
                 [](const RunConfig& c) {
                     return std::string(c.dataset == DatasetSource::Synthetic ? "synthetic" : "directory");
                 }});
    f.push_back(integer("synth_n", "synthetic training records", &RunConfig::synth_n));
    f.push_back(integer("synth_test_n", "synthetic test records", &RunConfig::synth_test_n));
    f.push_back(integer("data_seed", "synthetic dataset seed", &RunConfig::data_seed));
    f.push_back(text("data_root", "dataset directory", &RunConfig::data_root));
    f.push_back(text("pairs", "training pairs file, relative to data_root", &RunConfig::pairs));
    f.push_back(text("test_pairs", "test pairs file, relative to data_root", &RunConfig::test_pairs));
    f.push_back(text("palette", "label palette file (empty: built-in)", &RunConfig::palette));
    f.push_back(text("perceptual_model", "TorchScript feature extractor (empty: random features)",
                     &RunConfig::perceptual_model));
    f.push_back(integer("workers", "dataset loading threads", &RunConfig::workers));
    f.push_back(real("reject_threshold", "rejection threshold tau", &RunConfig::reject_threshold));
    f.push_back(real("reject_epsilon", "clamp guard for D(x)", &RunConfig::reject_epsilon));
    f.push_back(integer("log_every", "progress print interval (0 = silent)", &RunConfig::log_every));
    return f;
}

}  // namespace

void RunConfig::validate() const {
    check_condition_resolution(condition);
    if (output.height % condition.height || output.width % condition.width ||
        output.height / condition.height != output.width / condition.width) {
        throw ConfigError("output resolution " + output.str() + " must be an integer multiple of " + condition.str());
    }
    const int f = upscale();
    if (f & (f - 1)) throw ConfigError("output/condition scale must be a power of two");
    weights.validate();
    if (!(lr_tocg_g > 0 && lr_tocg_d > 0 && lr_toig_g > 0 && lr_toig_d > 0)) {
        throw ConfigError("learning rates must be positive");
    }
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (batch_tocg <= 0 || batch_toig <= 0) throw ConfigError("batch sizes must be positive");
    if (iterations < 0) throw ConfigError("iterations must be non-negative");
    if (threads < 0 || workers <= 0) throw ConfigError("threads must be >= 0 and workers > 0");
    if (dataset == DatasetSource::Synthetic && (synth_n <= 0 || synth_test_n < 0)) {
        throw ConfigError("synthetic dataset sizes must be positive");
    }
    if (dataset == DatasetSource::Directory && data_root.empty()) {
        throw ConfigError("dataset = directory requires data_root");
    }
    if (!(reject_threshold >= 0 && reject_threshold <= 1)) throw ConfigError("reject_threshold must lie in [0, 1]");
    if (!(reject_epsilon > 0 && reject_epsilon < 0.5)) throw ConfigError("reject_epsilon must lie in (0, 0.5)");
}

const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = build_fields();
    return fields;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
    for (const auto& f : config_fields()) {
        if (f.key == key) {
            f.set(config, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        if (!item.parents.empty()) throw ConfigError("config sections are not supported: " + item.fullname());
        std::string value;
        for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
        set_config_value(base, item.name, value);
    }
    return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), std::move(base));
}

std::string serialize_run_config(const RunConfig& config) {
    std::string out;
    for (const auto& f : config_fields()) {
        out += f.key + " = " + f.get(config) + "\n";
    }
    return out;
}

}  // namespace tryon
