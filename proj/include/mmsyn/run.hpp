#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmsyn/ann.hpp"
#include "mmsyn/config.hpp"

namespace mmsyn {

inline constexpr const char* kVersion = "mmsyn 0.1.0";

/// One CSV file of a run. Values are written with 17 significant digits.
struct MetricTable {
    std::string name;  // file name without extension
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

std::string to_csv(const MetricTable& table);

struct RunRecord {
    ExperimentConfig config;  // with the model table that was used
    std::vector<MetricTable> tables;
    Json summary;
    double wall_clock_s = 0.0;
    std::string version = kVersion;
    std::string rng = kRngAlgorithm;
};

Json to_json(const RunRecord& record);

/// Reads record.json back (tables are not part of the JSON and stay empty).
RunRecord load_record(const std::filesystem::path& file);

/// Dispatches to the experiment. Resolves the model table (model_file or
/// the default) into config.pcm_model and, for the MNIST experiments, loads
/// the dataset from config.dataset_dir or $MMSYN_MNIST_DIR.
RunRecord run(ExperimentConfig config, const ProgressFn& progress = {});

/// Writes record.json and one CSV per table into `dir`. Files are written
/// into a sibling staging directory first, so a failure leaves nothing
/// behind and an existing `dir` is only replaced on success.
void write_run(const RunRecord& record, const std::filesystem::path& dir);

/// run() followed by write_run() into config.output_dir.
RunRecord run_and_write(const ExperimentConfig& config, const ProgressFn& progress = {});

struct ReplayResult {
    RunRecord record;
    std::vector<std::string> mismatched;  // CSV files that differ from the original run
};

/// Re-runs the config embedded in `record_file` into `output_dir` and
/// compares every CSV byte for byte with the ones next to the record.
ReplayResult replay(const std::filesystem::path& record_file, const std::filesystem::path& output_dir,
                    const ProgressFn& progress = {});

}  // namespace mmsyn
