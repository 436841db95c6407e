#include "mmsyn/device.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmsyn/error.hpp"

namespace mmsyn {

double interpolate(std::span<const Knot> knots, double g) {
    if (g <= knots.front().g) return knots.front().value;
    if (g >= knots.back().g) return knots.back().value;
    auto hi = std::upper_bound(knots.begin(), knots.end(), g,
                               [](double x, const Knot& k) { return x < k.g; });
    auto lo = hi - 1;
    const double t = (g - lo->g) / (hi->g - lo->g);
    return lo->value + t * (hi->value - lo->value);
}

void validate_knots(std::span<const Knot> knots, const char* name) {
    if (knots.empty()) throw ConfigError(std::string(name) + ": knot table is empty");
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (!std::isfinite(knots[i].g) || !std::isfinite(knots[i].value))
            throw ConfigError(std::string(name) + ": non-finite knot");
        if (i > 0 && !(knots[i].g > knots[i - 1].g))
            throw ConfigError(std::string(name) + ": knots must be strictly increasing in conductance");
    }
}

void PcmModel::validate() const {
    if (!(g_max > 0.0) || !std::isfinite(g_max)) throw ConfigError("pcm model: g_max must be positive");
    validate_knots(mu_knots, "mu_knots");
    validate_knots(sigma_knots, "sigma_knots");
    for (const auto* table : {&mu_knots, &sigma_knots}) {
        if (table->front().g > 0.0 || table->back().g < g_max)
            throw ConfigError("pcm model: knot tables must span [0, g_max]");
    }
    for (const Knot& k : sigma_knots)
        if (k.value < 0.0) throw ConfigError("sigma_knots: standard deviation must be >= 0");
    if (depression_result < 0.0 || depression_result > g_max)
        throw ConfigError("pcm model: depression_result outside [0, g_max]");
    if (nu_mean < 0.0) throw ConfigError("pcm model: nu_mean must be >= 0");
    if (read_noise_sigma < 0.0) throw ConfigError("pcm model: read_noise_sigma must be >= 0");
}

Response PcmModel::response(double g) const {
    return {interpolate(mu_knots, g), interpolate(sigma_knots, g)};
}

PcmModel PcmModel::default_model() {
    PcmModel m;
    // Fitted with calibrate(default_target_trajectory()), 11 knots.
    m.mu_knots = {
        {0.0, 1.2479}, {1.0, 1.1330}, {2.0, 1.0214}, {3.0, 0.8734}, {4.0, 0.7279}, {5.0, 0.6042},
        {6.0, 0.4973}, {7.0, 0.4004}, {8.0, 0.2642}, {9.0, 0.0403}, {10.0, 0.0},
    };
    m.sigma_knots = {
        {0.0, 0.7897}, {1.0, 0.7884}, {2.0, 0.7216}, {3.0, 0.6846}, {4.0, 0.6835}, {5.0, 0.5736},
        {6.0, 0.5549}, {7.0, 0.6284}, {8.0, 0.5832}, {9.0, 0.3035}, {10.0, 0.0},
    };
    m.version = "pcm-default-v2";
    return m;
}

void LinearModel::validate() const {
    if (!(mean_step > 0.0)) throw ConfigError("linear model: mean_step must be > 0");
    if (!(sigma_step >= 0.0)) throw ConfigError("linear model: sigma_step must be >= 0");
    if (!(g_max > 0.0)) throw ConfigError("linear model: g_max must be > 0");
}

DeviceModel::DeviceModel() : DeviceModel(PcmModel::default_model()) {}

DeviceModel::DeviceModel(PcmModel model) : model_(std::move(model)) {
    std::get<PcmModel>(model_).validate();
}

DeviceModel::DeviceModel(LinearModel model) : model_(model) { model.validate(); }

Response DeviceModel::response(double g) const {
    return std::visit([g](const auto& m) { return m.response(g); }, model_);
}

double DeviceModel::g_max() const {
    return std::visit([](const auto& m) { return m.g_max; }, model_);
}

bool DeviceModel::drift_enabled() const {
    const PcmModel* m = pcm();
    return m && m->drift_enabled;
}

double DeviceModel::nu_mean() const {
    const PcmModel* m = pcm();
    return m ? m->nu_mean : 0.0;
}

double DeviceModel::read_noise_sigma() const {
    const PcmModel* m = pcm();
    return m ? m->read_noise_sigma : 0.0;
}

double DeviceModel::depression_result() const {
    const PcmModel* m = pcm();
    return m ? m->depression_result : 0.0;
}

DeviceState make_device(double conductance, const DeviceModel& model, double t_now) {
    DeviceState s;
    s.conductance = std::clamp(conductance, 0.0, model.g_max());
    s.t_last_program = t_now;
    s.nu = model.drift_enabled() ? model.nu_mean() : 0.0;
    return s;
}

namespace {

DeviceState apply_step(DeviceState state, Response r, double g_max, RngStream& rng, double t_now) {
    const double delta = r.mu + r.sigma * rng.normal();
    state.conductance = std::clamp(state.conductance + delta, 0.0, g_max);
    state.t_last_program = t_now;
    return state;
}

}  // namespace

DeviceState potentiate(DeviceState state, const PcmModel& model, RngStream& rng, double t_now) {
    return apply_step(state, model.response(state.conductance), model.g_max, rng, t_now);
}

DeviceState potentiate_linear(DeviceState state, const LinearModel& model, RngStream& rng, double t_now) {
    return apply_step(state, model.response(state.conductance), model.g_max, rng, t_now);
}

DeviceState potentiate(DeviceState state, const DeviceModel& model, RngStream& rng, double t_now) {
    return apply_step(state, model.response(state.conductance), model.g_max(), rng, t_now);
}

DeviceState depress(DeviceState state, double t_now, double result) {
    state.conductance = result;
    state.t_last_program = t_now;
    return state;
}

namespace {

double read_impl(const DeviceState& state, bool drift, double noise_sigma, double t_now, RngStream& rng) {
    if (t_now < state.t_last_program)
        throw TimeOrderError("read at t=" + std::to_string(t_now) + " precedes last programming at t=" +
                             std::to_string(state.t_last_program));
    double g = state.conductance;
    if (drift && state.nu > 0.0) {
        const double elapsed = t_now - state.t_last_program;
        g *= std::pow((elapsed + kDriftReferenceTime) / kDriftReferenceTime, -state.nu);
    }
    if (noise_sigma > 0.0) g = std::max(0.0, g + noise_sigma * rng.normal());
    return g;
}

}  // namespace

double read(const DeviceState& state, const PcmModel& model, double t_now, RngStream& rng) {
    return read_impl(state, model.drift_enabled, model.read_noise_sigma, t_now, rng);
}

double read(const DeviceState& state, const DeviceModel& model, double t_now, RngStream& rng) {
    return read_impl(state, model.drift_enabled(), model.read_noise_sigma(), t_now, rng);
}

std::vector<TrajectoryRow> characterize(const DeviceModel& model, std::size_t n_devices, int n_pulses,
                                        double init_g, std::uint64_t seed) {
    if (n_devices == 0) throw InputError("characterize: n_devices must be >= 1");
    if (n_pulses < 0) throw InputError("characterize: n_pulses must be >= 0");

    std::vector<DeviceState> devices(n_devices, make_device(init_g, model));
    std::vector<TrajectoryRow> rows;
    rows.reserve(static_cast<std::size_t>(n_pulses) + 1);

    auto record = [&](int pulse) {
        double sum = 0.0;
        for (const auto& d : devices) sum += d.conductance;
        const double mean = sum / static_cast<double>(n_devices);
        double ss = 0.0;
        for (const auto& d : devices) ss += (d.conductance - mean) * (d.conductance - mean);
        rows.push_back({pulse, mean, std::sqrt(ss / static_cast<double>(n_devices))});
    };

    record(0);
    for (int p = 1; p <= n_pulses; ++p) {
        for (std::size_t d = 0; d < n_devices; ++d) {
            RngStream rng(seed, stream_id(StreamPurpose::Characterization, d), static_cast<std::uint64_t>(p - 1));
            devices[d] = potentiate(devices[d], model, rng, static_cast<double>(p));
        }
        record(p);
    }
    return rows;
}

}  // namespace mmsyn
