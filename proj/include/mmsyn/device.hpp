#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mmsyn/rng.hpp"

namespace mmsyn {

/// One memristive device. Conductance in microsiemens, time in simulation
/// units, `nu` is the dimensionless drift exponent fixed at creation.
struct DeviceState {
    double conductance = 0.0;
    double t_last_program = 0.0;
    double nu = 0.0;
};

struct Knot {
    double g = 0.0;
    double value = 0.0;
};

/// Linear interpolation over knots sorted by conductance; clamps to the end
/// knots outside the tabulated span. `knots` must be non-empty.
double interpolate(std::span<const Knot> knots, double g);

/// Throws ConfigError unless `knots` is non-empty and strictly increasing in g.
void validate_knots(std::span<const Knot> knots, const char* name);

struct Response {
    double mu = 0.0;
    double sigma = 0.0;
};

/// Phenomenological PCM model: Gaussian potentiation whose mean and standard
/// deviation depend piecewise-linearly on the current conductance, abrupt
/// all-or-nothing depression, optional power-law drift.
struct PcmModel {
    std::vector<Knot> mu_knots;
    std::vector<Knot> sigma_knots;
    double g_max = 10.0;
    double depression_result = 0.0;
    bool drift_enabled = false;
    double nu_mean = 0.05;
    double read_noise_sigma = 0.0;
    std::string version = "custom";

    /// Throws ConfigError on empty, unsorted or non-spanning tables and
    /// negative standard deviations.
    void validate() const;

    Response response(double g) const;

    /// Table fitted to the default characterization trajectory
    /// (see calibration.hpp). Versioned through `version`.
    static PcmModel default_model();
};

/// Uni-directional linear device: every pulse adds Normal(mean_step, sigma_step).
struct LinearModel {
    double mean_step = 0.5;
    double sigma_step = 0.5;
    double g_max = 10.0;

    void validate() const;
    Response response(double) const { return {mean_step, sigma_step}; }
};

/// Either response model behind one interface. Construction validates.
class DeviceModel {
public:
    DeviceModel();
    DeviceModel(PcmModel model);
    DeviceModel(LinearModel model);

    Response response(double g) const;
    double g_max() const;
    bool drift_enabled() const;
    double nu_mean() const;
    double read_noise_sigma() const;
    double depression_result() const;

    bool is_pcm() const { return std::holds_alternative<PcmModel>(model_); }
    const PcmModel* pcm() const { return std::get_if<PcmModel>(&model_); }
    const LinearModel* linear() const { return std::get_if<LinearModel>(&model_); }

private:
    std::variant<PcmModel, LinearModel> model_;
};

/// Drift reference time t0.
inline constexpr double kDriftReferenceTime = 1.0;

DeviceState make_device(double conductance, const DeviceModel& model, double t_now = 0.0);

/// One potentiation pulse: g <- clamp(g + Normal(mu(g), sigma(g)), 0, g_max).
/// Consumes exactly one draw from `rng`.
DeviceState potentiate(DeviceState state, const PcmModel& model, RngStream& rng, double t_now = 0.0);
DeviceState potentiate_linear(DeviceState state, const LinearModel& model, RngStream& rng,
                              double t_now = 0.0);
DeviceState potentiate(DeviceState state, const DeviceModel& model, RngStream& rng, double t_now = 0.0);

DeviceState depress(DeviceState state, double t_now = 0.0, double result = 0.0);

/// Read-out with optional drift g * ((dt + t0) / t0)^-nu and Gaussian read
/// noise (one draw when enabled). Throws TimeOrderError if t_now precedes
/// the last programming time.
double read(const DeviceState& state, const PcmModel& model, double t_now, RngStream& rng);
double read(const DeviceState& state, const DeviceModel& model, double t_now, RngStream& rng);

struct TrajectoryRow {
    int pulse_index = 0;
    double mean = 0.0;
    double std = 0.0;
};

/// Simulates `n_devices` independent devices from `init_g` for `n_pulses`
/// potentiation pulses and records mean/std across devices after each pulse
/// (row 0 is the initial state).
std::vector<TrajectoryRow> characterize(const DeviceModel& model, std::size_t n_devices, int n_pulses,
                                        double init_g, std::uint64_t seed);

}  // namespace mmsyn
