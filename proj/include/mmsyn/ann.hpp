#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmsyn/device.hpp"
#include "mmsyn/mnist.hpp"
#include "mmsyn/synapse.hpp"

namespace mmsyn {

/// How synaptic weights are stored: plain doubles, or multi-memristive
/// synapses backed by the linear or the PCM device model.
enum class WeightMode { Float64, Linear, Pcm };

std::string to_string(WeightMode mode);
WeightMode parse_weight_mode(const std::string& text);

double sigmoid(double x);

/// Fully connected sigmoid network. Every layer except the output carries a
/// bias neuron emitting a constant 1; weights of layer l are stored
/// row-major as [out][in + 1] with the bias in the last column.
class Mlp {
public:
    explicit Mlp(std::vector<int> layer_sizes);

    int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
    int inputs(int layer) const { return sizes_[layer]; }
    int outputs(int layer) const { return sizes_[layer + 1]; }
    std::span<const int> sizes() const { return sizes_; }

    std::vector<double>& weights(int layer) { return weights_[layer]; }
    const std::vector<double>& weights(int layer) const { return weights_[layer]; }
    double& weight(int layer, int out, int in) { return weights_[layer][index(layer, out, in)]; }
    std::size_t index(int layer, int out, int in) const {
        return static_cast<std::size_t>(out) * (sizes_[layer] + 1) + in;
    }

    /// Forward pass; keeps all activations for the following backward().
    /// Throws InputError on a size mismatch.
    std::span<const double> forward(std::span<const double> input);

    /// Activations of layer l (0 = input), including the trailing bias 1 for
    /// non-output layers.
    std::span<const double> activations(int layer) const { return activations_[layer]; }

    /// Back-propagates the squared error 0.5 * sum (o - t)^2 and stores the
    /// per-neuron error terms. Returns the loss.
    double backward(std::span<const double> target);

    /// Error term of neuron `out` in layer `layer` from the last backward().
    double error_term(int layer, int out) const { return errors_[layer][out]; }

    /// -learning_rate * dLoss/dw for weight (layer, out, in).
    double delta_w(int layer, int out, int in, double learning_rate) const {
        return -learning_rate * errors_[layer][out] * activations_[layer][in];
    }

    /// Dense per-layer matrices of delta_w (same layout as weights()).
    std::vector<std::vector<double>> weight_deltas(double learning_rate) const;

    double loss(std::span<const double> target) const;

private:
    std::vector<int> sizes_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> activations_;
    std::vector<std::vector<double>> errors_;
};

struct AnnConfig {
    WeightMode mode = WeightMode::Float64;
    Architecture architecture = Architecture::NonDifferential;
    int devices = 1;
    int hidden = 250;
    double learning_rate = 0.4;
    int epochs = 10;
    std::size_t train_limit = 0;  // 0 = whole training set
    std::size_t test_limit = 0;   // 0 = whole test set
    // The test set is evaluated at every `eval_every`-th example of the last
    // `eval_window` examples of the final epoch; the results are averaged.
    std::size_t eval_window = 20000;
    std::size_t eval_every = 1000;
    double refresh_threshold = 0.9;
    // Keep each example's selection shift co-prime with the counter length.
    bool realign_selection = true;
    std::uint64_t seed = 1;
    std::optional<PcmModel> pcm_model;  // default table when empty
    LinearModel linear_model;

    double epsilon() const { return 0.1 / devices; }
    void validate() const;
};

struct AccuracyPoint {
    std::size_t example_index = 0;  // 1-based, counted over all epochs
    double test_accuracy = 0.0;
};

struct ProgrammingStats {
    std::uint64_t requests = 0;
    std::uint64_t potentiation_pulses = 0;
    std::uint64_t depression_pulses = 0;
    std::uint64_t refreshes = 0;
};

struct AnnResult {
    std::vector<AccuracyPoint> trace;
    double final_accuracy = 0.0;
    ProgrammingStats stats;
};

/// 784-hidden-10 network whose weights live either in doubles or in
/// multi-memristive synapses sharing one global arbitration state. Synapse
/// updates are applied online, one example at a time, in a fixed order:
/// layer by layer, output-neuron-major.
class AnnNetwork {
public:
    AnnNetwork(const AnnConfig& config, int inputs = 784, int outputs = 10);

    const AnnConfig& config() const { return config_; }
    const Mlp& mlp() const { return mlp_; }
    Mlp& mlp() { return mlp_; }

    /// Weight read-out of every synapse into the dense matrices (only needed
    /// when the device model has drift or read noise).
    void read_out(double t_now);

    std::span<const double> forward(std::span<const double> input);
    void train_example(std::span<const double> input, int label);
    double evaluate(const MnistSet& test, std::size_t limit = 0);

    const SynapseArray* synapses(int layer) const;
    const ArbitrationState& arbitration() const { return arb_; }
    const ProgrammingStats& stats() const { return stats_; }
    std::size_t examples_seen() const { return examples_; }

private:
    void apply_device_updates();

    AnnConfig config_;
    Mlp mlp_;
    std::vector<SynapseArray> arrays_;
    ArbitrationState arb_;
    UpdateRules rules_;
    ProgrammingStats stats_;
    bool dynamic_read_ = false;
    std::size_t examples_ = 0;
};

/// Scales 0..255 pixels to [0, 1].
void scale_pixels(std::span<const std::uint8_t> pixels, std::span<double> out);

using ProgressFn = std::function<void(const std::string&)>;

/// Trains for config.epochs over the (possibly truncated) training set in
/// database order and returns the test-accuracy trace.
AnnResult train_ann(const AnnConfig& config, const Mnist& data, const ProgressFn& progress = {});

}  // namespace mmsyn
