#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "tryon/fields.hpp"

namespace tryon {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr int64_t kCheckpointFormatVersion = 1;

struct CheckpointMeta {
    int64_t version = kCheckpointFormatVersion;
    std::string kind;      // "tocg" or "toig"
    std::string palette;   // serialized LabelPalette
    std::string config;    // serialized RunConfig of the run that wrote it
    Resolution condition;
    Resolution output;
    int64_t iteration = 0;
};

using NamedModule = std::pair<std::string, torch::nn::Module*>;
using NamedOptimizer = std::pair<std::string, torch::optim::Optimizer*>;

/// Parameters and buffers are stored under "<module>/<parameter path>",
/// optimizer states under "optim/<name>", metadata under "meta/...".
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const std::vector<NamedModule>& modules, const std::vector<NamedOptimizer>& optimizers = {});

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Copies stored values into the given modules/optimizers. Every parameter and
/// buffer of every module must be present with a matching shape.
CheckpointMeta load_checkpoint(const std::filesystem::path& path, const std::vector<NamedModule>& modules,
                               const std::vector<NamedOptimizer>& optimizers = {});

}  // namespace tryon
