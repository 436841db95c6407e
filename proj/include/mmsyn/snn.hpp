#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmsyn/ann.hpp"
#include "mmsyn/device.hpp"
#include "mmsyn/mnist.hpp"
#include "mmsyn/synapse.hpp"

namespace mmsyn {

/// Which spike pairs trigger depression.
enum class DepressionPairing {
    AllPre,    // every presynaptic spike within the window after a postsynaptic spike
    FirstPre,  // only the first presynaptic spike after each postsynaptic spike
    Unpaired,  // on a postsynaptic spike, every synapse without a potentiating presynaptic spike
    StalePre,  // on a postsynaptic spike, synapses whose last presynaptic spike is inside the
               // depression window but outside the potentiation window
};

std::string to_string(DepressionPairing pairing);
DepressionPairing parse_depression_pairing(const std::string& text);

struct SnnConfig {
    WeightMode mode = WeightMode::Float64;
    Architecture architecture = Architecture::NonDifferential;
    int devices = 1;
    int outputs = 50;
    int epochs = 3;
    std::size_t train_limit = 0;   // 0 = whole training set
    std::size_t assign_limit = 0;  // images used for the class map, 0 = whole training set
    std::size_t test_limit = 0;    // 0 = whole test set
    std::size_t eval_window = 20000;
    std::size_t eval_every = 1000;
    std::uint64_t seed = 1;

    double dt_ms = 5.0;
    double presentation_ms = 350.0;
    double tau_ms = 200.0;
    double max_rate_hz = 20.0;
    double initial_threshold = 0.125;

    double dw_plus = 0.01;
    double dw_minus = 0.006;
    double pot_window_ms = 30.0;
    double dep_window_ms = 1050.0;
    DepressionPairing depression = DepressionPairing::StalePre;

    std::size_t homeostasis_start = 1000;  // images seen before thresholds adapt
    std::size_t homeostasis_every = 2;
    double homeostasis_rate = 0.0005;
    std::size_t activity_window = 100;     // images
    double target_spikes = 5.0;            // per image, shared by all outputs

    // Differential only: refresh when a set exceeds this weight.
    double refresh_threshold = 0.45;

    std::optional<PcmModel> pcm_model;
    LinearModel linear_model;

    double epsilon() const { return 0.05 / devices; }
    int steps_per_image() const;
    int pot_window_steps() const;
    int dep_window_steps() const;
    void validate() const;
};

/// Per-step spike probability of a pixel: intensity/255 * max_rate * dt.
double spike_probability(std::uint8_t pixel, double max_rate_hz, double dt_ms);

/// Which presentation stream an input spike is drawn from.
enum class Phase : std::uint64_t { Train = 0, Assign = 1, Test = 2 };

/// Poisson input of pixel `pixel` at step `step` of presentation
/// `presentation`: a spike iff p > x with x uniform in (0, 1).
bool input_spike(std::uint64_t seed, Phase phase, std::uint64_t presentation, int pixel, int step, double p);

/// Full raster [step][pixel] of one presentation.
std::vector<std::vector<std::uint8_t>> poisson_encode(std::span<const std::uint8_t> pixels, int steps,
                                                      double max_rate_hz, double dt_ms, std::uint64_t seed,
                                                      Phase phase, std::uint64_t presentation);

/// Winner-take-all selection: the neuron whose state exceeds its threshold
/// by the largest margin, lowest index on ties; -1 if none exceeds it.
int select_winner(std::span<const double> state, std::span<const double> threshold);

struct SnnResult {
    std::vector<AccuracyPoint> trace;
    double final_accuracy = 0.0;
    std::vector<int> class_map;
    std::vector<double> thresholds;
    ProgrammingStats stats;
};

/// 784 -> outputs network of leaky integrate-and-fire neurons with
/// rectangular STDP. Synapse s = input * outputs + output; updates within a
/// step are applied potentiation first, then depression, each in ascending
/// synapse order.
class SnnNetwork {
public:
    SnnNetwork(const SnnConfig& config, int inputs = 784);

    const SnnConfig& config() const { return config_; }
    int inputs() const { return inputs_; }
    int outputs() const { return config_.outputs; }

    double weight(int input, int output) const { return w_[index(input, output)]; }
    std::span<const double> weights() const { return w_; }
    std::span<const double> state() const { return x_; }
    std::span<const double> thresholds() const { return theta_; }
    void set_threshold(int output, double value) { theta_[output] = value; }
    void set_state(int output, double value) { x_[output] = value; }
    void set_weight(int input, int output, double w);  // float mode only

    std::size_t index(int input, int output) const {
        return static_cast<std::size_t>(input) * config_.outputs + output;
    }

    /// One simulation step with the given spiking inputs (ascending). Leaks,
    /// integrates, picks the winner, resets all states if someone fired and,
    /// when `learn` is set, applies STDP. Returns the winner or -1.
    int step(std::span<const int> active_inputs, bool learn);

    /// Presents one image for the configured duration with fresh states.
    /// Returns the spike count of every output neuron.
    std::vector<int> present(std::span<const std::uint8_t> pixels, Phase phase, std::uint64_t presentation,
                             bool learn);

    /// Threshold adaptation from the spike counts of the last images.
    void homeostasis(std::span<const int> window_spikes, std::size_t window_images);

    const SynapseSpec* spec() const { return arrays_.empty() ? nullptr : &arrays_.front().spec(); }
    const SynapseArray* synapses() const { return arrays_.empty() ? nullptr : &arrays_.front(); }
    const ProgrammingStats& stats() const { return stats_; }
    std::int64_t time_step() const { return t_; }

private:
    void program(std::size_t s, double dw);
    void read_out();

    SnnConfig config_;
    int inputs_;
    std::vector<double> w_;
    std::vector<double> x_;
    std::vector<double> theta_;
    std::vector<std::int64_t> last_pre_;
    std::vector<std::int64_t> last_post_;
    std::vector<std::int64_t> last_dep_;  // post spike time a synapse was last depressed for
    std::vector<SynapseArray> arrays_;
    ArbitrationState arb_;
    UpdateRules rules_;
    ProgrammingStats stats_;
    double decay_;
    bool dynamic_read_ = false;
    std::int64_t t_ = 0;
};

/// Maps each output neuron to the label it spiked for the most over
/// `limit` images (0 = all); neurons that never spiked map to -1.
std::vector<int> assign_classes(SnnNetwork& net, const MnistSet& set, std::size_t limit = 0);

/// Fraction of test images whose most active neuron maps to their label.
/// Images without any output spike count as errors.
double evaluate_snn(SnnNetwork& net, std::span<const int> class_map, const MnistSet& test, std::size_t limit = 0);

/// Trains for config.epochs and returns the accuracy trace, averaged over
/// the evaluation window of the final epoch.
SnnResult train_snn(const SnnConfig& config, const Mnist& data, const ProgressFn& progress = {});

}  // namespace mmsyn
