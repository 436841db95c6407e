// mmsyn: command-line front end for the multi-memristive synapse simulator.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mmsyn/config.hpp"
#include "mmsyn/error.hpp"
#include "mmsyn/run.hpp"

namespace {

using namespace mmsyn;

constexpr int kUsageError = 2;

// Flags are applied on top of the config file, so every option stays unset
// unless given on the command line.
struct Flags {
    std::string config_file;
    std::string mode, architecture, model_file, dataset_dir, output_dir;
    int devices = 0;
    std::uint64_t seed = 0;
    int epochs = 0;
    std::size_t steps = 0;
    bool quiet = false;

    std::size_t train_limit = 0, test_limit = 0, assign_limit = 0;
    std::size_t threads = 0;
    std::size_t n_devices = 0;
    int pulses = -1;
    double init_g = -1.0;
    std::string target_file, depression;
    double correlation = -1.0;
    std::size_t synapses = 0, correlated = 0;
    double neuron_threshold = 0.0;
};

void add_common(CLI::App& cmd, Flags& f) {
    cmd.add_option("-c,--config", f.config_file, "JSON config file; flags override its values")->check(CLI::ExistingFile);
    cmd.add_option("--mode", f.mode, "float64 | linear | pcm");
    cmd.add_option("-N,--devices", f.devices, "devices per synapse")->check(CLI::PositiveNumber);
    cmd.add_option("--seed", f.seed);
    cmd.add_option("--model", f.model_file, "PCM model JSON")->check(CLI::ExistingFile);
    cmd.add_option("-o,--out", f.output_dir, "output directory");
    cmd.add_flag("-q,--quiet", f.quiet, "no progress output");
}

void add_training(CLI::App& cmd, Flags& f) {
    cmd.add_option("--arch", f.architecture, "non-differential | differential");
    cmd.add_option("--data", f.dataset_dir, std::string("MNIST directory (default $") + kMnistDirEnv + ")");
    cmd.add_option("--epochs", f.epochs)->check(CLI::PositiveNumber);
    cmd.add_option("--train-limit", f.train_limit, "training images per epoch (0 = all)");
    cmd.add_option("--test-limit", f.test_limit, "test images per evaluation (0 = all)");
}

ExperimentConfig build_config(ExperimentKind kind, const CLI::App& cmd, const Flags& f) {
    ExperimentConfig c = f.config_file.empty() ? ExperimentConfig{} : load_config(f.config_file);
    c.kind = kind;
    const auto given = [&](const char* name) { return cmd.count(name) > 0; };
    if (given("--mode")) c.mode = parse_weight_mode(f.mode);
    if (given("--devices")) c.devices = f.devices;
    if (given("--seed")) c.seed = f.seed;
    if (given("--model")) {
        c.model_file = f.model_file;
        c.pcm_model.reset();
    }
    if (given("--out")) c.output_dir = f.output_dir;
    if (kind == ExperimentKind::TrainAnn || kind == ExperimentKind::TrainSnn) {
        if (given("--arch")) c.architecture = parse_architecture(f.architecture);
        if (given("--data")) c.dataset_dir = f.dataset_dir;
        if (given("--epochs")) c.epochs = f.epochs;
        if (kind == ExperimentKind::TrainAnn) {
            if (given("--train-limit")) c.ann.train_limit = f.train_limit;
            if (given("--test-limit")) c.ann.test_limit = f.test_limit;
        } else {
            if (given("--train-limit")) c.snn.train_limit = f.train_limit;
            if (given("--test-limit")) c.snn.test_limit = f.test_limit;
            if (given("--assign-limit")) c.snn.assign_limit = f.assign_limit;
            if (given("--depression")) c.snn.depression = parse_depression_pairing(f.depression);
        }
    }
    switch (kind) {
        case ExperimentKind::Characterize:
            if (given("--n-devices")) c.characterize.devices = f.n_devices;
            if (given("--pulses")) c.characterize.pulses = f.pulses;
            if (given("--init-g")) c.characterize.init_g = f.init_g;
            break;
        case ExperimentKind::Calibrate:
            if (given("--target")) c.calibrate.target_file = f.target_file;
            break;
        case ExperimentKind::Scaling:
            if (given("--synapses")) c.scaling.synapses = f.synapses;
            if (given("--pulses")) c.scaling.pulses_per_device = f.pulses;
            break;
        case ExperimentKind::DetectCorrelation:
            if (given("--steps")) c.steps = f.steps;
            if (given("--threads")) c.correlation.threads = f.threads;
            if (given("--synapses")) c.correlation.streams.n_streams = f.synapses;
            if (given("--correlation")) c.correlation.streams.c = f.correlation;
            if (given("--correlated")) c.correlation.streams.n_correlated = f.correlated;
            if (given("--neuron-threshold")) c.correlation.neuron_threshold = f.neuron_threshold;
            break;
        default: break;
    }
    return c;
}

void print_summary(const RunRecord& r, const std::string& dir) {
    std::printf("%s\n", r.summary.dump().c_str());
    std::printf("wrote %s (%.1f s)\n", dir.c_str(), r.wall_clock_s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-memristive synapse simulator"};
    app.require_subcommand(1);
    Flags f;

    auto* characterize = app.add_subcommand("characterize", "pulse trajectory of a device population");
    add_common(*characterize, f);
    characterize->add_option("--n-devices", f.n_devices)->check(CLI::PositiveNumber);
    characterize->add_option("--pulses", f.pulses)->check(CLI::NonNegativeNumber);
    characterize->add_option("--init-g", f.init_g, "initial conductance in uS");

    auto* calibrate = app.add_subcommand("calibrate", "fit the PCM model table to a measured trajectory");
    add_common(*calibrate, f);
    calibrate->add_option("--target", f.target_file, "CSV pulse_index,mean_uS[,std_uS]")->check(CLI::ExistingFile);

    auto* scaling = app.add_subcommand("scaling", "mean/variance of the cumulative change versus N");
    add_common(*scaling, f);
    scaling->add_option("--synapses", f.synapses)->check(CLI::PositiveNumber);
    scaling->add_option("--pulses", f.pulses, "pulses per device")->check(CLI::NonNegativeNumber);

    auto* ann = app.add_subcommand("train-ann", "train the 784-250-10 network on MNIST");
    add_common(*ann, f);
    add_training(*ann, f);

    auto* snn = app.add_subcommand("train-snn", "train the 784-50 spiking network on MNIST");
    add_common(*snn, f);
    add_training(*snn, f);
    snn->add_option("--assign-limit", f.assign_limit, "images used to label neurons (0 = all)");
    snn->add_option("--depression", f.depression, "all-pre | first-pre | unpaired | stale-pre");

    auto* detect = app.add_subcommand("detect-correlation", "single-neuron correlation detection");
    add_common(*detect, f);
    detect->add_option("--steps", f.steps)->check(CLI::PositiveNumber);
    detect->add_option("--threads", f.threads)->check(CLI::PositiveNumber);
    detect->add_option("--synapses", f.synapses, "number of input streams")->check(CLI::PositiveNumber);
    detect->add_option("--correlation", f.correlation, "correlation coefficient c");
    detect->add_option("--correlated", f.correlated, "number of correlated streams");
    detect->add_option("--neuron-threshold", f.neuron_threshold, "output neuron firing threshold");

    std::string record_file, replay_out;
    auto* replay_cmd = app.add_subcommand("replay", "re-run a recorded run and compare its CSVs");
    replay_cmd->add_option("record", record_file, "record.json of an earlier run")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("-o,--out", replay_out, "output directory (default: <run>.replay)");
    replay_cmd->add_flag("-q,--quiet", f.quiet);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    const ProgressFn progress = [&f](const std::string& line) {
        if (!f.quiet) std::cerr << line << '\n';
    };

    const std::pair<CLI::App*, ExperimentKind> experiments[] = {
        {characterize, ExperimentKind::Characterize}, {calibrate, ExperimentKind::Calibrate},
        {scaling, ExperimentKind::Scaling},           {ann, ExperimentKind::TrainAnn},
        {snn, ExperimentKind::TrainSnn},              {detect, ExperimentKind::DetectCorrelation}};

    try {
        if (replay_cmd->parsed()) {
            if (replay_out.empty()) replay_out = std::filesystem::path(record_file).parent_path().string() + ".replay";
            const ReplayResult r = replay(record_file, replay_out, progress);
            print_summary(r.record, replay_out);
            if (r.mismatched.empty()) {
                std::printf("replay identical\n");
                return 0;
            }
            for (const auto& name : r.mismatched) std::printf("replay differs: %s\n", name.c_str());
            return 1;
        }
        for (const auto& [cmd, kind] : experiments) {
            if (!cmd->parsed()) continue;
            ExperimentConfig config;
            try {
                config = build_config(kind, *cmd, f);
            } catch (const ConfigError& e) {
                std::cerr << "error: " << e.what() << '\n';
                return kUsageError;
            }
            const RunRecord r = run_and_write(config, progress);
            print_summary(r, config.output_dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
