#pragma once

#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tryon/config.hpp"
#include "tryon/dataset.hpp"

namespace tryon {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- metrics log

/// Parsed metrics log: one row of doubles per logged iteration.
struct MetricsTable {
    std::vector<std::string> columns;  // excluding the leading "iteration"
    std::vector<int64_t> iterations;
    std::vector<std::vector<double>> rows;

    /// Values of one column in row order; throws on unknown names.
    std::vector<double> column(const std::string& name) const;
};

/// CSV with a header line, then "iteration,v1,v2,..." per row, values printed
/// with 17 significant digits so they parse back to the identical doubles.
class MetricsLog {
public:
    /// Rows with iteration >= `first_iteration` already in the file are dropped;
    /// the rest are kept and new rows are appended after them.
    MetricsLog(const std::filesystem::path& path, std::vector<std::string> columns, int64_t first_iteration = 0);
    ~MetricsLog();
    MetricsLog(const MetricsLog&) = delete;
    MetricsLog& operator=(const MetricsLog&) = delete;

    void append(int64_t iteration, const std::vector<double>& values);

private:
    std::FILE* file_ = nullptr;
    std::size_t width_;
};

MetricsTable read_metrics(const std::filesystem::path& path);

// ---------------------------------------------------------------- training

struct TrainPaths {
    std::filesystem::path checkpoint;  // written at the end of the run
    std::filesystem::path metrics;
    std::filesystem::path resume;      // optional checkpoint to continue from
};

struct TrainResult {
    int64_t start_iteration = 0;
    int64_t end_iteration = 0;
    MetricsTable metrics;  // rows produced by this call
};

/// Column names of the condition-generator log.
const std::vector<std::string>& tocg_metric_columns();
/// Column names of the image-generator log.
const std::vector<std::string>& toig_metric_columns();

/// Seed of iteration `iteration`; drives batch sampling and dropout so a
/// resumed run replays exactly the draws of an uninterrupted one.
std::uint64_t iteration_seed(std::uint64_t seed, int64_t iteration);

/// Alternating LSGAN training of the condition generator and its discriminator
/// for config.iterations total iterations. `records` at any resolution (resized
/// to the condition resolution). A non-finite loss writes
/// `<checkpoint>.nan` and throws TrainingError.
TrainResult train_tocg(const RunConfig& config, const std::vector<SampleRecord>& records, const TrainPaths& paths);

/// Hinge-GAN training of the image generator on conditions from the frozen
/// condition generator in `tocg_checkpoint`. `records` at the output resolution.
TrainResult train_toig(const RunConfig& config, const std::vector<SampleRecord>& records,
                       const std::filesystem::path& tocg_checkpoint, const TrainPaths& paths);

}  // namespace tryon
