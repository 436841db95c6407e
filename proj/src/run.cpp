#include "mmsyn/run.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mmsyn/calibration.hpp"
#include "mmsyn/correlation.hpp"
#include "mmsyn/device.hpp"
#include "mmsyn/error.hpp"
#include "mmsyn/mnist.hpp"
#include "mmsyn/snn.hpp"
#include "mmsyn/synapse.hpp"

namespace fs = std::filesystem;

namespace mmsyn {

namespace {

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json stats_json(const ProgrammingStats& s) {
    return {{"requests", s.requests},
            {"potentiation_pulses", s.potentiation_pulses},
            {"depression_pulses", s.depression_pulses},
            {"refreshes", s.refreshes}};
}

DeviceModel device_model(const ExperimentConfig& c) {
    if (c.mode == WeightMode::Float64) throw ConfigError(to_string(c.kind) + ": needs a device model (linear or pcm)");
    if (c.mode == WeightMode::Linear) return DeviceModel(c.linear_model);
    return DeviceModel(*c.pcm_model);
}

MetricTable trajectory_table(const std::vector<TrajectoryRow>& rows) {
    MetricTable t{"trajectory", {"pulse_index", "mean_uS", "std_uS"}, {}};
    for (const auto& r : rows) t.rows.push_back({static_cast<double>(r.pulse_index), r.mean, r.std});
    return t;
}

std::vector<TrajectoryRow> read_target(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IngestError("cannot open " + file.string());
    std::vector<TrajectoryRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line_no == 1) continue;  // header
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            v.push_back(std::strtod(cell.c_str(), &end));
            if (end == cell.c_str()) throw IngestError(file.string() + ":" + std::to_string(line_no) + ": not a number");
        }
        if (v.size() < 2 || v.size() > 3)
            throw IngestError(file.string() + ":" + std::to_string(line_no) + ": expected 2 or 3 columns");
        rows.push_back({static_cast<int>(v[0]), v[1], v.size() == 3 ? v[2] : 0.0});
    }
    return rows;
}

Mnist dataset(const ExperimentConfig& c) {
    std::string dir = c.dataset_dir;
    if (dir.empty()) {
        const char* env = std::getenv(kMnistDirEnv);
        if (!env || !*env) throw ConfigError("no dataset directory: set dataset_dir or " + std::string(kMnistDirEnv));
        dir = env;
    }
    return load_mnist(dir);
}

MetricTable accuracy_table(const std::vector<AccuracyPoint>& trace) {
    MetricTable t{"accuracy", {"example_index", "test_accuracy"}, {}};
    for (const auto& p : trace) t.rows.push_back({static_cast<double>(p.example_index), p.test_accuracy});
    return t;
}

void run_characterize(const ExperimentConfig& c, RunRecord& r) {
    const auto& s = c.characterize;
    const auto rows = characterize(device_model(c), s.devices, s.pulses, s.init_g, c.seed);
    r.tables.push_back(trajectory_table(rows));
    r.summary = {{"final_mean_uS", rows.back().mean}, {"final_std_uS", rows.back().std}};
}

void run_calibrate(const ExperimentConfig& c, RunRecord& r) {
    const auto target = c.calibrate.target_file.empty() ? default_target_trajectory()
                                                        : read_target(c.calibrate.target_file);
    const CalibrationResult fit = calibrate(target, c.calibrate.options);
    MetricTable knots{"knots", {"g_uS", "mu_uS", "sigma_uS"}, {}};
    for (std::size_t k = 0; k < fit.model.mu_knots.size(); ++k)
        knots.rows.push_back({fit.model.mu_knots[k].g, fit.model.mu_knots[k].value,
                              k < fit.model.sigma_knots.size() ? fit.model.sigma_knots[k].value : 0.0});
    r.tables.push_back(std::move(knots));
    const auto sim = characterize(DeviceModel(fit.model), c.calibrate.options.n_devices,
                                  target.back().pulse_index, target.front().mean, c.calibrate.options.seed);
    r.tables.push_back(trajectory_table(sim));
    r.summary = {{"mean_rms", fit.mean_rms},
                 {"std_rms", fit.std_rms},
                 {"iterations", fit.iterations},
                 {"model", model_to_json(fit.model)}};
}

void run_scaling(const ExperimentConfig& c, RunRecord& r) {
    const auto& s = c.scaling;
    const auto rows = scaling_experiment(s.device_counts, s.synapses, s.pulses_per_device, device_model(c), c.seed,
                                         s.init_g);
    MetricTable t{"scaling", {"devices", "pulses", "mean_uS", "variance_uS2", "mean_ratio", "variance_ratio"}, {}};
    for (const auto& row : rows)
        t.rows.push_back({static_cast<double>(row.devices), static_cast<double>(row.pulses), row.mean, row.variance,
                          row.mean / rows.front().mean, row.variance / rows.front().variance});
    Json ratios = Json::array();
    for (const auto& row : t.rows) ratios.push_back({{"devices", row[0]}, {"mean_ratio", row[4]}, {"variance_ratio", row[5]}});
    r.tables.push_back(std::move(t));
    r.summary = {{"ratios", ratios}};
}

void run_ann(const ExperimentConfig& c, RunRecord& r, const ProgressFn& progress) {
    const AnnResult res = train_ann(resolve_ann(c), dataset(c), progress);
    r.tables.push_back(accuracy_table(res.trace));
    r.summary = {{"final_accuracy", res.final_accuracy}, {"stats", stats_json(res.stats)}};
}

void run_snn(const ExperimentConfig& c, RunRecord& r, const ProgressFn& progress) {
    const SnnResult res = train_snn(resolve_snn(c), dataset(c), progress);
    r.tables.push_back(accuracy_table(res.trace));
    MetricTable neurons{"neurons", {"neuron", "class", "threshold"}, {}};
    for (std::size_t j = 0; j < res.class_map.size(); ++j)
        neurons.rows.push_back({static_cast<double>(j), static_cast<double>(res.class_map[j]),
                                j < res.thresholds.size() ? res.thresholds[j] : 0.0});
    r.tables.push_back(std::move(neurons));
    r.summary = {{"final_accuracy", res.final_accuracy}, {"stats", stats_json(res.stats)}};
}

void run_detect(const ExperimentConfig& c, RunRecord& r, const ProgressFn& progress) {
    const CorrelationResult res = run_correlation(resolve_correlation(c), progress);
    MetricTable weights{"weights", {"synapse", "correlated", "weight"}, {}};
    for (std::size_t s = 0; s < res.weights.size(); ++s)
        weights.rows.push_back({static_cast<double>(s), static_cast<double>(res.labels[s]), res.weights[s]});
    r.tables.push_back(std::move(weights));
    MetricTable trace{"trace", {"step"}, {}};
    for (const auto s : res.traced) trace.columns.push_back("w" + std::to_string(s));
    for (const auto& p : res.trace) {
        std::vector<double> row{static_cast<double>(p.step)};
        row.insert(row.end(), p.weights.begin(), p.weights.end());
        trace.rows.push_back(std::move(row));
    }
    r.tables.push_back(std::move(trace));
    r.summary = {{"misclassified", res.classification.misclassified},
                 {"threshold", res.classification.threshold},
                 {"output_spikes", res.output_spikes},
                 {"stats", stats_json(res.stats)}};
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + file.string());
}

std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return {};
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string to_csv(const MetricTable& table) {
    std::string out;
    for (std::size_t k = 0; k < table.columns.size(); ++k) out += (k ? "," : "") + table.columns[k];
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + format_value(row[k]);
        out += '\n';
    }
    return out;
}

Json to_json(const RunRecord& r) {
    Json tables = Json::array();
    for (const auto& t : r.tables) tables.push_back(t.name + ".csv");
    return {{"version", r.version},
            {"rng", r.rng},
            {"config", to_json(r.config)},
            {"summary", r.summary},
            {"tables", tables},
            {"wall_clock_s", r.wall_clock_s}};
}

RunRecord load_record(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open " + file.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("config")) throw ConfigError(file.string() + ": not a run record");
    RunRecord r;
    r.config = config_from_json(j["config"]);
    r.summary = j.value("summary", Json::object());
    r.wall_clock_s = j.value("wall_clock_s", 0.0);
    r.version = j.value("version", std::string{});
    r.rng = j.value("rng", std::string{});
    if (r.rng != kRngAlgorithm) throw ConfigError(file.string() + ": recorded with rng '" + r.rng + "'");
    return r;
}

RunRecord run(ExperimentConfig config, const ProgressFn& progress) {
    if (!config.pcm_model)
        config.pcm_model = config.model_file.empty() ? PcmModel::default_model() : load_model(config.model_file);
    config.validate();

    RunRecord r;
    r.config = config;
    const auto start = std::chrono::steady_clock::now();
    try {
        switch (config.kind) {
            case ExperimentKind::Characterize: run_characterize(config, r); break;
            case ExperimentKind::Calibrate: run_calibrate(config, r); break;
            case ExperimentKind::Scaling: run_scaling(config, r); break;
            case ExperimentKind::TrainAnn: run_ann(config, r, progress); break;
            case ExperimentKind::TrainSnn: run_snn(config, r, progress); break;
            case ExperimentKind::DetectCorrelation: run_detect(config, r, progress); break;
        }
    } catch (const Error& e) {
        throw Error(to_string(config.kind) + ": " + e.what());
    }
    r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

void write_run(const RunRecord& record, const fs::path& dir) {
    fs::path staging = dir;
    staging += ".partial";
    std::error_code ec;
    fs::remove_all(staging, ec);
    try {
        fs::create_directories(staging);
        for (const auto& t : record.tables) write_text(staging / (t.name + ".csv"), to_csv(t));
        write_text(staging / "record.json", to_json(record).dump(2) + "\n");
        fs::remove_all(dir);
        fs::rename(staging, dir);
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
}

RunRecord run_and_write(const ExperimentConfig& config, const ProgressFn& progress) {
    RunRecord r = run(config, progress);
    write_run(r, config.output_dir);
    return r;
}

ReplayResult replay(const fs::path& record_file, const fs::path& output_dir, const ProgressFn& progress) {
    const RunRecord original = load_record(record_file);
    ExperimentConfig config = original.config;
    config.output_dir = output_dir.string();
    ReplayResult result{run_and_write(config, progress), {}};
    const fs::path original_dir = record_file.parent_path();
    for (const auto& t : result.record.tables) {
        const std::string name = t.name + ".csv";
        if (read_text(original_dir / name) != read_text(output_dir / name)) result.mismatched.push_back(name);
    }
    return result;
}

}  // namespace mmsyn
