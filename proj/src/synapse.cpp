#include "mmsyn/synapse.hpp"

#include <cmath>
#include <numeric>

#include "mmsyn/error.hpp"

namespace mmsyn {

std::string to_string(Architecture arch) {
    return arch == Architecture::Differential ? "differential" : "non-differential";
}

Architecture parse_architecture(const std::string& text) {
    if (text == "differential" || text == "diff") return Architecture::Differential;
    if (text == "non-differential" || text == "nondiff" || text == "non-diff") return Architecture::NonDifferential;
    throw ConfigError("unknown architecture '" + text + "'");
}

ModularCounter::ModularCounter(int length, int increment, int value)
    : length_(length), increment_(increment), value_(value) {
    if (length < 1) throw ConfigError("counter length must be >= 1");
    if (increment < 1) throw ConfigError("counter increment must be >= 1");
    if (std::gcd(length, increment) != 1)
        throw ConfigError("counter increment " + std::to_string(increment) + " is not co-prime with length " +
                          std::to_string(length));
    if (value < 1 || value > length) throw ConfigError("counter value outside [1, length]");
}

ArbitrationState ArbitrationState::make(int selection_length, int selection_increment, int pot_length,
                                        int dep_length) {
    return {ModularCounter(selection_length, selection_increment), ModularCounter(pot_length),
            ModularCounter(dep_length)};
}

void advance_selection(ArbitrationState& arb) { arb.selection.advance(); }

int realign_selection(ArbitrationState& arb, std::uint64_t requests) {
    const auto length = static_cast<std::uint64_t>(arb.selection.length());
    int extra = 0;
    while (std::gcd((requests + static_cast<std::uint64_t>(extra)) % length, length) != 1 && length > 1) {
        arb.selection.advance();
        ++extra;
    }
    return extra;
}

void SynapseSpec::validate() const {
    if (devices < 1) throw ConfigError("synapse needs at least one device");
    if (architecture == Architecture::Differential && devices % 2 != 0)
        throw ConfigError("differential synapse needs an even number of devices");
    if (!(map.g_high > map.g_low)) throw ConfigError("weight map needs g_high > g_low");
}

long round_half_away(double x) { return static_cast<long>(std::round(x)); }

SynapseArray::SynapseArray(std::size_t synapses, SynapseSpec spec, DeviceModel model, std::uint64_t seed)
    : spec_(spec),
      model_(std::move(model)),
      seed_(seed),
      stride_(static_cast<std::size_t>(spec.devices)),
      devices_(synapses * stride_, make_device(0.0, model_)),
      draws_(synapses * stride_, 0),
      weights_(synapses, 0.0) {
    spec_.validate();
    for (std::size_t s = 0; s < synapses; ++s) refresh_cache(s);
}

double SynapseArray::set_weight(std::size_t s, int set) const {
    const int size = spec_.set_size();
    const DeviceState* first = devices_.data() + s * stride_ + static_cast<std::size_t>(set * size);
    double w = 0.0;
    for (int n = 0; n < size; ++n) w += spec_.map(first[n].conductance);
    return w;
}

void SynapseArray::refresh_cache(std::size_t s) {
    if (spec_.architecture == Architecture::Differential)
        weights_[s] = set_weight(s, 0) - set_weight(s, 1) + spec_.offset;
    else
        weights_[s] = set_weight(s, 0);
}

double SynapseArray::read_weight(std::size_t s, double t_now, RngStream& read_rng) const {
    const int size = spec_.set_size();
    auto devs = devices(s);
    double plus = 0.0, minus = 0.0;
    for (int n = 0; n < size; ++n) plus += spec_.map(mmsyn::read(devs[n], model_, t_now, read_rng));
    if (spec_.architecture == Architecture::NonDifferential) return plus;
    for (int n = size; n < spec_.devices; ++n) minus += spec_.map(mmsyn::read(devs[n], model_, t_now, read_rng));
    return plus - minus + spec_.offset;
}

void SynapseArray::set_conductance(std::size_t s, int n, double g, double t_now) {
    devices_[s * stride_ + n] = make_device(g, model_, t_now);
    refresh_cache(s);
}

void SynapseArray::set_device_weight(std::size_t s, int n, double w, double t_now) {
    set_conductance(s, n, spec_.map.to_conductance(w), t_now);
}

void SynapseArray::potentiate(std::size_t s, int n, int pulses, double t_now) {
    if (pulses <= 0) return;
    const std::size_t d = s * stride_ + static_cast<std::size_t>(n);
    RngStream rng(seed_, stream_id(StreamPurpose::DeviceProgram, d), draws_[d]);
    DeviceState state = devices_[d];
    for (int p = 0; p < pulses; ++p) state = mmsyn::potentiate(state, model_, rng, t_now);
    devices_[d] = state;
    draws_[d] = rng.position();
    events_ += static_cast<std::uint64_t>(pulses);
    refresh_cache(s);
}

void SynapseArray::depress(std::size_t s, int n, double t_now) {
    const std::size_t d = s * stride_ + static_cast<std::size_t>(n);
    devices_[d] = mmsyn::depress(devices_[d], t_now, model_.depression_result());
    ++events_;
    refresh_cache(s);
}

double read_weight(const SynapseArray& array, std::size_t s, double t_now, RngStream& read_rng) {
    return array.read_weight(s, t_now, read_rng);
}

namespace {

int selected_device(const SynapseArray& array, const ArbitrationState& arb, int set) {
    const int size = array.spec().set_size();
    // The selection counter spans the devices of one set.
    const int index = (arb.selection.value() - 1) % size;
    return set * size + index;
}

}  // namespace

UpdateResult apply_pulses(SynapseArray& array, std::size_t s, ArbitrationState& arb, PulseKind kind, int pulses,
                          double t_now) {
    UpdateResult result;
    if (pulses <= 0) return result;
    result.requested = true;
    const bool differential = array.spec().architecture == Architecture::Differential;
    if (kind == PulseKind::Potentiation) {
        const bool enabled = arb.potentiation.enabled();
        arb.potentiation.advance();
        if (enabled) {
            array.potentiate(s, selected_device(array, arb, 0), pulses, t_now);
            result.potentiation_pulses = pulses;
        }
    } else {
        const bool enabled = arb.depression.enabled();
        arb.depression.advance();
        if (enabled) {
            if (differential) {
                array.potentiate(s, selected_device(array, arb, 1), pulses, t_now);
                result.potentiation_pulses = pulses;
            } else {
                array.depress(s, selected_device(array, arb, 0), t_now);
                result.depression_pulses = 1;
            }
        }
    }
    return result;
}

UpdateResult apply_update(SynapseArray& array, std::size_t s, ArbitrationState& arb, double delta_w,
                          const UpdateRules& rules, double t_now) {
    if (!std::isfinite(delta_w)) throw InputError("apply_update: delta_w is not finite");
    if (!(rules.epsilon > 0.0)) throw InputError("apply_update: epsilon must be > 0");
    if (delta_w == 0.0) return {};

    UpdateResult result;
    if (delta_w > 0.0) {
        const long pulses = round_half_away(delta_w / rules.epsilon);
        result = apply_pulses(array, s, arb, PulseKind::Potentiation, static_cast<int>(pulses), t_now);
    } else if (array.spec().architecture == Architecture::Differential) {
        const long pulses = round_half_away(-delta_w / rules.epsilon);
        result = apply_pulses(array, s, arb, PulseKind::Depression, static_cast<int>(pulses), t_now);
    } else if (-delta_w >= rules.depression_threshold) {
        result = apply_pulses(array, s, arb, PulseKind::Depression, 1, t_now);
    }
    result.requested = true;
    advance_selection(arb);
    return result;
}

bool refresh(SynapseArray& array, std::size_t s, double threshold, double epsilon, double t_now) {
    const SynapseSpec& spec = array.spec();
    if (spec.architecture != Architecture::Differential)
        throw ArchitectureError("refresh requires a differential synapse");
    if (!(epsilon > 0.0)) throw InputError("refresh: epsilon must be > 0");
    const double w_plus = array.set_weight(s, 0);
    const double w_minus = array.set_weight(s, 1);
    if (!(w_plus > threshold || w_minus > threshold)) return false;

    const double net = w_plus - w_minus;
    for (int n = 0; n < spec.devices; ++n) array.depress(s, n, t_now);
    const long pulses = round_half_away(std::abs(net) / epsilon);
    if (pulses == 0) return true;
    const int set = net > 0.0 ? 0 : 1;
    const int size = spec.set_size();
    for (long p = 0; p < pulses; ++p) array.potentiate(s, set * size + static_cast<int>(p % size), 1, t_now);
    return true;
}

std::vector<ScalingRow> scaling_experiment(std::span<const int> device_counts, std::size_t n_synapses,
                                           int pulses_per_device, const DeviceModel& model, std::uint64_t seed,
                                           double init_g) {
    std::vector<ScalingRow> rows;
    for (const int n : device_counts) {
        SynapseSpec spec;
        spec.devices = n;
        spec.map = {0.0, 0.0, 1.0, 1.0};  // weight == conductance in uS
        // Each N gets its own device streams.
        SynapseArray array(n_synapses, spec, model, derive_seed(seed, static_cast<std::uint64_t>(n)));
        for (std::size_t s = 0; s < n_synapses; ++s)
            for (int d = 0; d < n; ++d) array.set_conductance(s, d, init_g);

        const int pulses = pulses_per_device * n;
        std::vector<double> change(n_synapses);
        for (std::size_t s = 0; s < n_synapses; ++s) {
            ModularCounter selection(n);
            for (int p = 0; p < pulses; ++p) {
                array.potentiate(s, selection.value() - 1, 1, static_cast<double>(p + 1));
                selection.advance();
            }
            change[s] = array.weight(s) - init_g * n;
        }
        const double mean = std::accumulate(change.begin(), change.end(), 0.0) / static_cast<double>(n_synapses);
        double ss = 0.0;
        for (double c : change) ss += (c - mean) * (c - mean);
        const double variance = n_synapses > 1 ? ss / static_cast<double>(n_synapses - 1) : 0.0;
        rows.push_back({n, pulses, mean, variance});
    }
    return rows;
}

}  // namespace mmsyn
