#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmsyn/ann.hpp"
#include "mmsyn/device.hpp"
#include "mmsyn/synapse.hpp"

namespace mmsyn {

struct StreamConfig {
    std::size_t n_streams = 1000;
    std::size_t n_correlated = 100;  // streams [0, n_correlated) are correlated
    double c = 0.75;
    double rate = 1.0;
    double ts = 0.1;
    void validate() const;
};

/// Spikes of all streams at one step. Draws come from per-stream counter
/// streams indexed by step, so any stream/step can be generated on its own.
class StreamGenerator {
public:
    StreamGenerator(const StreamConfig& config, std::uint64_t seed);

    const StreamConfig& config() const { return config_; }

    /// Shared Bernoulli event of the correlated group at `step`.
    bool common_event(std::uint64_t step) const;
    bool spike(std::size_t stream, std::uint64_t step, bool common) const;
    void generate(std::uint64_t step, std::span<std::uint8_t> out, std::size_t first = 0,
                  std::size_t last = static_cast<std::size_t>(-1)) const;

private:
    StreamConfig config_;
    std::uint64_t seed_;
    double p_;            // r * Ts
    double p_common_;     // r * Ts + sqrt(c) * (1 - r * Ts)
    double p_no_common_;  // r * Ts * (1 - sqrt(c))
};

/// Spike matrix [stream][step].
std::vector<std::vector<std::uint8_t>> generate_streams(const StreamConfig& config, std::size_t n_steps,
                                                        std::uint64_t seed);

/// Exponential STDP on spike pairs up to `horizon` steps apart. A pre/post
/// pair at the same step counts as potentiation.
struct ExpStdp {
    static constexpr int kHorizon = 10;

    double a_plus = 0.002;
    double a_minus = 0.004;
    double tau_steps = 3.0;  // tau / Ts
    double program_threshold = 0.001;

    /// Contribution of a single pair `dt` steps apart (dt >= 0 potentiates).
    double potentiation(int dt) const;
    double depression(int dt) const;  // negative
};

/// Programming decision for a step's net STDP change: potentiate at or
/// above the threshold, depress at or below its negative.
enum class StdpAction { None, Potentiate, Depress };
StdpAction stdp_action(double dw, double threshold);

/// The output neuron fires iff its input strictly exceeds the threshold.
inline bool neuron_fires(double membrane, double threshold) { return membrane > threshold; }

/// Lookup tables over 11-bit spike histories (bit k = spike k steps ago).
class StdpTables {
public:
    explicit StdpTables(const ExpStdp& rule);
    // Potentiation on a postsynaptic spike now, over presynaptic spikes at
    // k = 0..10 steps ago.
    double potentiation(std::uint16_t pre_history) const { return pot_[pre_history & kMask]; }
    // Depression on a presynaptic spike now, over postsynaptic spikes at
    // k = 1..10 steps ago.
    double depression(std::uint16_t post_history) const { return dep_[post_history & kMask]; }

    static constexpr std::uint16_t kMask = (1u << (ExpStdp::kHorizon + 1)) - 1;

private:
    std::vector<double> pot_;
    std::vector<double> dep_;
};

struct Classification {
    double threshold = 0.0;
    std::size_t misclassified = 0;
};

/// Threshold that minimizes misclassifications when weights above it are
/// labelled correlated. Candidates are the midpoints of consecutive sorted
/// weights plus one below the minimum and one above the maximum; ties go to
/// the lower threshold.
Classification classify_weights(std::span<const double> weights, std::span<const std::uint8_t> labels);

struct CorrelationConfig {
    StreamConfig streams;
    WeightMode mode = WeightMode::Pcm;
    int devices = 1;
    std::size_t steps = 5000;
    double neuron_threshold = 52.0;
    // When false the membrane only sees the current step's input.
    bool accumulate = false;
    ExpStdp stdp;
    double g_init = 0.1;
    int init_pulses = 3;  // model pulses standing in for the stronger initialization pulse
    int pulses_per_potentiation = 2;  // model pulses per experimental potentiation pulse
    double g_per_weight = 9.5;        // w_n = G / (N * g_per_weight)
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::size_t trace_every = 10;     // 0 disables the weight trace
    std::vector<std::size_t> trace_synapses;  // empty = first 5 correlated and first 5 uncorrelated
    std::optional<PcmModel> pcm_model;
    LinearModel linear_model;

    void validate() const;
};

struct TracePoint {
    std::size_t step = 0;
    std::vector<double> weights;  // one per traced synapse
};

struct CorrelationResult {
    std::vector<double> weights;
    std::vector<std::uint8_t> labels;
    Classification classification;
    std::vector<std::size_t> traced;
    std::vector<TracePoint> trace;
    std::size_t output_spikes = 0;
    ProgrammingStats stats;
};

/// Runs the single-neuron correlation experiment. Results do not depend on
/// config.threads: streams, membrane sums and STDP are computed in parallel
/// shards, programming is applied serially in synapse order with one global
/// arbitration state.
CorrelationResult run_correlation(const CorrelationConfig& config, const ProgressFn& progress = {});

/// Largest single-step drop of each traced synapse's weight.
double max_step_drop(const CorrelationResult& result, std::size_t traced_index);

}  // namespace mmsyn
