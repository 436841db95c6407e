#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmsyn/ann.hpp"
#include "mmsyn/calibration.hpp"
#include "mmsyn/correlation.hpp"
#include "mmsyn/device.hpp"
#include "mmsyn/snn.hpp"
#include "mmsyn/synapse.hpp"

namespace mmsyn {

using Json = nlohmann::ordered_json;

enum class ExperimentKind { Characterize, Calibrate, Scaling, TrainAnn, TrainSnn, DetectCorrelation };

std::string to_string(ExperimentKind kind);
/// Throws ConfigError on an unknown name.
ExperimentKind parse_experiment_kind(const std::string& text);

struct CharacterizeSettings {
    std::size_t devices = 10000;
    int pulses = 20;
    double init_g = 0.1;
};

struct CalibrateSettings {
    std::string target_file;  // CSV pulse_index,mean_uS[,std_uS]; empty = built-in trajectory
    CalibrationOptions options;
};

struct ScalingSettings {
    std::vector<int> device_counts{1, 3, 7};
    std::size_t synapses = 1000;
    int pulses_per_device = 10;
    double init_g = 0.1;
};

/// Everything a run needs. The shared fields (mode, architecture, devices,
/// seed, epochs, steps) override the ones inside the per-experiment
/// sections when the experiment is built.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Characterize;
    WeightMode mode = WeightMode::Pcm;
    Architecture architecture = Architecture::NonDifferential;
    int devices = 1;
    std::uint64_t seed = 1;
    std::string model_file;   // PCM model JSON; empty = default table
    std::string dataset_dir;  // empty = $MMSYN_MNIST_DIR
    std::string output_dir = "run";
    int epochs = 0;           // 0 = experiment default
    std::size_t steps = 0;    // 0 = experiment default

    CharacterizeSettings characterize;
    CalibrateSettings calibrate;
    ScalingSettings scaling;
    AnnConfig ann;
    SnnConfig snn;
    CorrelationConfig correlation;

    // Model table actually used; filled from model_file (or the default)
    // before a run and embedded in the run record.
    std::optional<PcmModel> pcm_model;
    LinearModel linear_model;

    void validate() const;
};

Json model_to_json(const PcmModel& model);
PcmModel model_from_json(const Json& j);
Json model_to_json(const LinearModel& model);
LinearModel linear_model_from_json(const Json& j);

/// Reads a PCM model JSON file. Throws ConfigError naming the file.
PcmModel load_model(const std::filesystem::path& file);
void save_model(const PcmModel& model, const std::filesystem::path& file);

Json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys and wrong types throw
/// ConfigError.
ExperimentConfig config_from_json(const Json& j);

ExperimentConfig load_config(const std::filesystem::path& file);
void save_config(const ExperimentConfig& config, const std::filesystem::path& file);

/// Per-experiment configs with the shared fields applied.
AnnConfig resolve_ann(const ExperimentConfig& config);
SnnConfig resolve_snn(const ExperimentConfig& config);
CorrelationConfig resolve_correlation(const ExperimentConfig& config);

}  // namespace mmsyn
