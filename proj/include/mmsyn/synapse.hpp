#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmsyn/device.hpp"
#include "mmsyn/rng.hpp"

namespace mmsyn {

enum class Architecture { NonDifferential, Differential };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& text);

/// Modular counter taking values 1..length, advanced by a fixed increment.
/// The increment must be co-prime with the length so every value is visited.
class ModularCounter {
public:
    ModularCounter() = default;
    explicit ModularCounter(int length, int increment = 1, int value = 1);

    int value() const { return value_; }
    int length() const { return length_; }
    int increment() const { return increment_; }
    bool enabled() const { return value_ == 1; }

    void advance() { value_ = (value_ - 1 + increment_) % length_ + 1; }
    void advance(std::uint64_t steps) {
        value_ = static_cast<int>((static_cast<std::uint64_t>(value_ - 1) +
                                   static_cast<std::uint64_t>(increment_) * (steps % length_)) %
                                  length_) +
                 1;
    }

    friend bool operator==(const ModularCounter&, const ModularCounter&) = default;

private:
    int length_ = 1;
    int increment_ = 1;
    int value_ = 1;
};

/// Global arbitration shared by every synapse of a network: a selection
/// counter choosing the device to program, and potentiation/depression
/// counters that enable an event only when their value is one. A gating
/// counter of length 1 is always enabled (i.e. "no counter").
struct ArbitrationState {
    ModularCounter selection;
    ModularCounter potentiation;
    ModularCounter depression;

    static ArbitrationState make(int selection_length, int selection_increment = 1, int pot_length = 1,
                                 int dep_length = 1);
    friend bool operator==(const ArbitrationState&, const ArbitrationState&) = default;
};

void advance_selection(ArbitrationState& arb);

/// Called at the end of a pass over all synapses that issued `requests`
/// update requests. Advances the selection counter by the smallest number of
/// extra steps that makes the pass's total shift co-prime with its length, so
/// a synapse updated once per pass still cycles through all of its devices.
/// Returns the number of extra steps.
int realign_selection(ArbitrationState& arb, std::uint64_t requests);

/// Affine conductance -> weight map of a single device.
struct WeightMap {
    double g_low = 0.0;
    double w_low = 0.0;
    double g_high = 10.0;
    double w_high = 1.0;

    double operator()(double g) const { return w_low + (g - g_low) * slope(); }
    double slope() const { return (w_high - w_low) / (g_high - g_low); }
    double to_conductance(double w) const { return g_low + (w - w_low) / slope(); }
};

struct SynapseSpec {
    Architecture architecture = Architecture::NonDifferential;
    int devices = 1;
    WeightMap map;
    // Added to the differential read-out (G+ set minus G- set).
    double offset = 0.0;

    int set_size() const { return architecture == Architecture::Differential ? devices / 2 : devices; }
    void validate() const;
};

/// Thresholds and quantization of a weight-update request.
struct UpdateRules {
    // Mean weight change of one potentiation pulse.
    double epsilon = 0.1;
    // Non-differential depression fires when -delta_w >= this value
    // (0 means any negative request).
    double depression_threshold = 0.05;
};

struct UpdateResult {
    int potentiation_pulses = 0;
    int depression_pulses = 0;
    bool requested = false;
};

/// Round half away from zero.
long round_half_away(double x);

/// Contiguous storage for many multi-memristive synapses with one spec, plus
/// a per-device RNG position (device d draws from stream
/// (DeviceProgram, d) of `seed`) and a cache of the ideal (drift-free,
/// noise-free) synapse weights.
class SynapseArray {
public:
    SynapseArray(std::size_t synapses, SynapseSpec spec, DeviceModel model, std::uint64_t seed);

    std::size_t size() const { return weights_.size(); }
    const SynapseSpec& spec() const { return spec_; }
    const DeviceModel& model() const { return model_; }
    std::uint64_t seed() const { return seed_; }

    std::span<const DeviceState> devices(std::size_t s) const {
        return {devices_.data() + s * stride_, stride_};
    }
    const DeviceState& device(std::size_t s, int n) const { return devices_[s * stride_ + n]; }

    /// Ideal read-out, kept in sync with every programming operation.
    double weight(std::size_t s) const { return weights_[s]; }
    std::span<const double> weights() const { return weights_; }

    /// Mapped sum of one device set (differential: 0 = G+, 1 = G-).
    double set_weight(std::size_t s, int set) const;

    /// Read-out through `read` (drift and read noise as configured).
    double read_weight(std::size_t s, double t_now, RngStream& read_rng) const;

    void set_conductance(std::size_t s, int n, double g, double t_now = 0.0);
    void set_device_weight(std::size_t s, int n, double w, double t_now = 0.0);
    void potentiate(std::size_t s, int n, int pulses, double t_now);
    void depress(std::size_t s, int n, double t_now);

    std::uint64_t programming_events() const { return events_; }

private:
    void refresh_cache(std::size_t s);

    SynapseSpec spec_;
    DeviceModel model_;
    std::uint64_t seed_;
    std::size_t stride_;
    std::vector<DeviceState> devices_;
    std::vector<std::uint64_t> draws_;
    std::vector<double> weights_;
    std::uint64_t events_ = 0;
};

/// Weight read-out of one synapse: sum of the mapped device read values
/// (differential: G+ set minus G- set plus the offset).
double read_weight(const SynapseArray& array, std::size_t s, double t_now, RngStream& read_rng);

/// Quantized update of synapse `s` by `delta_w`. A zero request is a no-op.
/// Any other request advances the selection counter once, after the update.
/// Potentiation applies round(delta_w / epsilon) pulses to the selected
/// device when the potentiation counter enables it; depression applies one
/// depression pulse (non-differential) or round(|delta_w| / epsilon)
/// potentiation pulses to the selected G- device (differential). A gating
/// counter advances on every request that would program its direction.
/// Throws InputError on non-finite delta_w or epsilon <= 0.
UpdateResult apply_update(SynapseArray& array, std::size_t s, ArbitrationState& arb, double delta_w,
                          const UpdateRules& rules, double t_now);

enum class PulseKind { Potentiation, Depression };

/// Rectangular request of `pulses` programming pulses of one kind (one
/// depression pulse regardless of count in the non-differential
/// architecture), gated and arbitrated exactly like apply_update.
UpdateResult apply_pulses(SynapseArray& array, std::size_t s, ArbitrationState& arb, PulseKind kind, int pulses,
                          double t_now);

/// Differential refresh: if either set's weight exceeds `threshold`, every
/// device is depressed and round(|w - offset| / epsilon) pulses are
/// re-programmed round-robin into the set matching the sign of the net
/// weight, starting with its first device. Returns true if a refresh ran.
/// The selection counter is not touched.
/// Throws ArchitectureError on non-differential arrays.
bool refresh(SynapseArray& array, std::size_t s, double threshold, double epsilon, double t_now);

struct ScalingRow {
    int devices = 0;
    int pulses = 0;
    double mean = 0.0;
    double variance = 0.0;
};

/// Synapses of N devices at `init_g` each receive `pulses_per_device * N`
/// potentiation pulses, one per update, on the device chosen by a selection
/// counter of increment one. Reports mean and variance of the cumulative
/// conductance change across synapses for every N.
std::vector<ScalingRow> scaling_experiment(std::span<const int> device_counts, std::size_t n_synapses,
                                           int pulses_per_device, const DeviceModel& model, std::uint64_t seed,
                                           double init_g = 5.0);

}  // namespace mmsyn
