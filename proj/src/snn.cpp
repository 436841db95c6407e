#include "mmsyn/snn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mmsyn/error.hpp"

namespace mmsyn {

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::min() / 2;

int steps_for(double ms, double dt_ms) { return static_cast<int>(std::lround(ms / dt_ms)); }

DeviceModel model_for(const SnnConfig& c) {
    if (c.mode == WeightMode::Linear) return DeviceModel(c.linear_model);
    return DeviceModel(c.pcm_model ? *c.pcm_model : PcmModel::default_model());
}

}  // namespace

std::string to_string(DepressionPairing pairing) {
    switch (pairing) {
        case DepressionPairing::AllPre: return "all-pre";
        case DepressionPairing::FirstPre: return "first-pre";
        case DepressionPairing::Unpaired: return "unpaired";
        case DepressionPairing::StalePre: return "stale-pre";
    }
    return "?";
}

DepressionPairing parse_depression_pairing(const std::string& text) {
    if (text == "all-pre") return DepressionPairing::AllPre;
    if (text == "first-pre") return DepressionPairing::FirstPre;
    if (text == "unpaired") return DepressionPairing::Unpaired;
    if (text == "stale-pre") return DepressionPairing::StalePre;
    throw ConfigError("unknown depression pairing '" + text + "'");
}

int SnnConfig::steps_per_image() const { return steps_for(presentation_ms, dt_ms); }
int SnnConfig::pot_window_steps() const { return steps_for(pot_window_ms, dt_ms); }
int SnnConfig::dep_window_steps() const { return steps_for(dep_window_ms, dt_ms); }

void SnnConfig::validate() const {
    if (devices < 1) throw ConfigError("snn: devices per synapse must be >= 1");
    if (mode != WeightMode::Float64 && architecture == Architecture::Differential && devices % 2 != 0)
        throw ConfigError("snn: differential architecture needs an even number of devices");
    if (outputs < 1) throw ConfigError("snn: needs at least one output neuron");
    if (epochs < 1) throw ConfigError("snn: epochs must be >= 1");
    if (!(dt_ms > 0.0) || !(presentation_ms >= dt_ms)) throw ConfigError("snn: invalid time step or duration");
    if (!(tau_ms > 0.0)) throw ConfigError("snn: tau must be > 0");
    if (eval_every == 0) throw ConfigError("snn: eval_every must be >= 1");
    if (homeostasis_every == 0 || activity_window == 0) throw ConfigError("snn: homeostasis periods must be >= 1");
}

double spike_probability(std::uint8_t pixel, double max_rate_hz, double dt_ms) {
    return static_cast<double>(pixel) / 255.0 * max_rate_hz * dt_ms * 1e-3;
}

bool input_spike(std::uint64_t seed, Phase phase, std::uint64_t presentation, int pixel, int step, double p) {
    if (p <= 0.0) return false;
    const std::uint64_t id = (static_cast<std::uint64_t>(phase) << 52) | (presentation << 12) |
                             static_cast<std::uint64_t>(pixel);
    const RngStream rng(seed, stream_id(StreamPurpose::InputSpikes, id));
    const PhiloxBlock b = rng.block_at(static_cast<std::uint64_t>(step));
    return p > bits_to_unit(b[0], b[1]);
}

std::vector<std::vector<std::uint8_t>> poisson_encode(std::span<const std::uint8_t> pixels, int steps,
                                                      double max_rate_hz, double dt_ms, std::uint64_t seed,
                                                      Phase phase, std::uint64_t presentation) {
    std::vector<std::vector<std::uint8_t>> raster(steps, std::vector<std::uint8_t>(pixels.size(), 0));
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const double p = spike_probability(pixels[i], max_rate_hz, dt_ms);
        for (int t = 0; t < steps; ++t)
            raster[t][i] = input_spike(seed, phase, presentation, static_cast<int>(i), t, p) ? 1 : 0;
    }
    return raster;
}

int select_winner(std::span<const double> state, std::span<const double> threshold) {
    int winner = -1;
    double best = 0.0;
    for (std::size_t j = 0; j < state.size(); ++j) {
        const double margin = state[j] - threshold[j];
        if (margin > 0.0 && (winner < 0 || margin > best)) {
            winner = static_cast<int>(j);
            best = margin;
        }
    }
    return winner;
}

SnnNetwork::SnnNetwork(const SnnConfig& config, int inputs)
    : config_(config),
      inputs_(inputs),
      w_(static_cast<std::size_t>(inputs) * config.outputs, 0.0),
      x_(config.outputs, 0.0),
      theta_(config.outputs, config.initial_threshold),
      last_pre_(inputs, kNever),
      last_post_(config.outputs, kNever),
      last_dep_(config.depression == DepressionPairing::FirstPre ? w_.size() : 0, kNever),
      decay_(std::exp(-config.dt_ms / config.tau_ms)) {
    config_.validate();
    RngStream init(config_.seed, stream_id(StreamPurpose::Initialization, 0));

    if (config_.mode == WeightMode::Float64) {
        for (double& w : w_) w = init.uniform(0.25, 0.75);
        return;
    }

    const int n = config_.devices;
    const DeviceModel model = model_for(config_);
    SynapseSpec spec;
    spec.architecture = config_.architecture;
    spec.devices = n;
    spec.map = {0.0, 0.0, model.g_max(), 1.0 / n};
    const bool differential = spec.architecture == Architecture::Differential;
    if (differential) spec.offset = 0.5;

    auto& array = arrays_.emplace_back(w_.size(), spec, model, derive_seed(config_.seed, 0));
    for (std::size_t s = 0; s < array.size(); ++s) {
        for (int d = 0; d < n; ++d) {
            const double w = differential ? init.uniform(3.0 / (5.0 * n), 4.0 / (5.0 * n))
                                          : init.uniform(2.0 / (5.0 * n), 3.0 / (5.0 * n));
            array.set_device_weight(s, d, w);
        }
        w_[s] = array.weight(s);
    }

    if (n == 1) {
        arb_ = ArbitrationState::make(spec.set_size());
    } else if (differential) {
        arb_ = ArbitrationState::make(spec.set_size(), 1, 2, 1);
    } else {
        const int dep_length = std::max(1, static_cast<int>(std::floor(1.0 / (n * config_.dw_minus))));
        arb_ = ArbitrationState::make(spec.set_size(), 1, 3, dep_length);
    }
    rules_.epsilon = config_.epsilon();
    rules_.depression_threshold = 0.0;
    dynamic_read_ = model.drift_enabled() || model.read_noise_sigma() > 0.0;
}

void SnnNetwork::set_weight(int input, int output, double w) {
    if (!arrays_.empty()) throw ConfigError("snn: set_weight is only available in float64 mode");
    w_[index(input, output)] = w;
}

void SnnNetwork::read_out() {
    const double t_now = static_cast<double>(t_) * config_.dt_ms * 1e-3;
    RngStream rng(config_.seed, stream_id(StreamPurpose::DeviceRead, 0), static_cast<std::uint64_t>(t_) << 20);
    for (std::size_t s = 0; s < w_.size(); ++s) w_[s] = arrays_.front().read_weight(s, t_now, rng);
}

void SnnNetwork::program(std::size_t s, double dw) {
    ++stats_.requests;
    if (arrays_.empty()) {
        w_[s] = std::clamp(w_[s] + dw, 0.0, 1.0);
        return;
    }
    SynapseArray& array = arrays_.front();
    const double t_now = static_cast<double>(t_) * config_.dt_ms * 1e-3;
    const UpdateResult r = apply_update(array, s, arb_, dw, rules_, t_now);
    if (r.potentiation_pulses == 0 && r.depression_pulses == 0) return;
    stats_.potentiation_pulses += static_cast<std::uint64_t>(r.potentiation_pulses);
    stats_.depression_pulses += static_cast<std::uint64_t>(r.depression_pulses);
    if (array.spec().architecture == Architecture::Differential &&
        refresh(array, s, config_.refresh_threshold, rules_.epsilon, t_now))
        ++stats_.refreshes;
    w_[s] = array.weight(s);
}

int SnnNetwork::step(std::span<const int> active_inputs, bool learn) {
    const int outputs = config_.outputs;
    const double norm = 1.0 / inputs_;
    for (int j = 0; j < outputs; ++j) x_[j] *= decay_;
    for (const int i : active_inputs) {
        const double* row = w_.data() + index(i, 0);
        for (int j = 0; j < outputs; ++j) x_[j] += row[j] * norm;
    }
    const int winner = select_winner(x_, theta_);
    if (winner >= 0) std::fill(x_.begin(), x_.end(), 0.0);

    if (learn) {
        for (const int i : active_inputs) last_pre_[i] = t_;
        if (winner >= 0) {
            const std::int64_t since = t_ - config_.pot_window_steps();
            const bool unpaired = config_.depression == DepressionPairing::Unpaired;
            const bool stale = config_.depression == DepressionPairing::StalePre;
            const std::int64_t dep_since = t_ - config_.dep_window_steps();
            for (int i = 0; i < inputs_; ++i) {
                if (last_pre_[i] >= since)
                    program(index(i, winner), config_.dw_plus);
                else if (unpaired || (stale && last_pre_[i] >= dep_since))
                    program(index(i, winner), -config_.dw_minus);
            }
        }
        if (config_.depression == DepressionPairing::AllPre || config_.depression == DepressionPairing::FirstPre) {
            // Presynaptic spike now, postsynaptic spike in an earlier step
            // within the window.
            const std::int64_t since = t_ - config_.dep_window_steps();
            const bool once = config_.depression == DepressionPairing::FirstPre;
            for (const int i : active_inputs)
                for (int j = 0; j < outputs; ++j) {
                    if (last_post_[j] < since || last_post_[j] >= t_) continue;
                    const std::size_t s = index(i, j);
                    if (once) {
                        if (last_dep_[s] == last_post_[j]) continue;
                        last_dep_[s] = last_post_[j];
                    }
                    program(s, -config_.dw_minus);
                }
        }
        if (winner >= 0) last_post_[winner] = t_;
        ++t_;
    }
    return winner;
}

std::vector<int> SnnNetwork::present(std::span<const std::uint8_t> pixels, Phase phase, std::uint64_t presentation,
                                     bool learn) {
    if (static_cast<int>(pixels.size()) != inputs_) throw InputError("snn: image size does not match the input layer");
    if (dynamic_read_) read_out();
    std::fill(x_.begin(), x_.end(), 0.0);
    std::vector<int> counts(config_.outputs, 0);
    std::vector<int> lit;
    std::vector<double> prob;
    for (int i = 0; i < inputs_; ++i) {
        if (pixels[i] == 0) continue;
        lit.push_back(i);
        prob.push_back(spike_probability(pixels[i], config_.max_rate_hz, config_.dt_ms));
    }
    std::vector<int> active;
    active.reserve(lit.size());
    const int steps = config_.steps_per_image();
    for (int t = 0; t < steps; ++t) {
        active.clear();
        for (std::size_t k = 0; k < lit.size(); ++k)
            if (input_spike(config_.seed, phase, presentation, lit[k], t, prob[k])) active.push_back(lit[k]);
        const int winner = step(active, learn);
        if (winner >= 0) ++counts[winner];
    }
    return counts;
}

void SnnNetwork::homeostasis(std::span<const int> window_spikes, std::size_t window_images) {
    const double seconds = config_.presentation_ms * 1e-3;
    const double target = config_.target_spikes / (seconds * config_.outputs);
    for (int j = 0; j < config_.outputs; ++j) {
        const double activity = window_spikes[j] / (seconds * static_cast<double>(window_images));
        theta_[j] += config_.homeostasis_rate * (activity - target);
    }
}

namespace {

int most_active(std::span<const int> counts) {
    const auto it = std::max_element(counts.begin(), counts.end());
    return *it > 0 ? static_cast<int>(it - counts.begin()) : -1;
}

}  // namespace

std::vector<int> assign_classes(SnnNetwork& net, const MnistSet& set, std::size_t limit) {
    const std::size_t count = limit == 0 ? set.size() : std::min(limit, set.size());
    std::vector<std::vector<long>> spikes(net.outputs(), std::vector<long>(10, 0));
    for (std::size_t k = 0; k < count; ++k) {
        const auto c = net.present(set.image(k), Phase::Assign, k, false);
        const int label = set.labels[k];
        for (int j = 0; j < net.outputs(); ++j) spikes[j][label] += c[j];
    }
    std::vector<int> map(net.outputs(), -1);
    for (int j = 0; j < net.outputs(); ++j) {
        const auto it = std::max_element(spikes[j].begin(), spikes[j].end());
        if (*it > 0) map[j] = static_cast<int>(it - spikes[j].begin());
    }
    return map;
}

double evaluate_snn(SnnNetwork& net, std::span<const int> class_map, const MnistSet& test, std::size_t limit) {
    const std::size_t count = limit == 0 ? test.size() : std::min(limit, test.size());
    if (count == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const int j = most_active(net.present(test.image(k), Phase::Test, k, false));
        if (j >= 0 && class_map[j] == test.labels[k]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(count);
}

SnnResult train_snn(const SnnConfig& config, const Mnist& data, const ProgressFn& progress) {
    const std::size_t per_epoch = config.train_limit == 0 ? data.train.size()
                                                          : std::min(config.train_limit, data.train.size());
    if (per_epoch == 0) throw InputError("train_snn: training set is empty");
    SnnNetwork net(config, static_cast<int>(data.train.image_size()));
    SnnResult result;

    // Spike counts of the last activity_window images, as a ring.
    const std::size_t window = config.activity_window;
    std::vector<std::vector<int>> ring(window, std::vector<int>(config.outputs, 0));
    std::vector<int> window_sum(config.outputs, 0);
    std::size_t seen = 0;

    auto evaluate_now = [&] {
        const auto map = assign_classes(net, data.train, config.assign_limit);
        const double acc = evaluate_snn(net, map, data.test, config.test_limit);
        result.trace.push_back({seen, acc});
        result.class_map = map;
        if (progress) progress("image " + std::to_string(seen) + " test accuracy " + std::to_string(acc));
    };

    const std::size_t window_start = per_epoch > config.eval_window ? per_epoch - config.eval_window : 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t k = 0; k < per_epoch; ++k) {
            const auto counts = net.present(data.train.image(k), Phase::Train, seen, true);
            auto& slot = ring[seen % window];
            for (int j = 0; j < config.outputs; ++j) {
                window_sum[j] += counts[j] - slot[j];
                slot[j] = counts[j];
            }
            ++seen;
            if (seen > config.homeostasis_start && seen % config.homeostasis_every == 0)
                net.homeostasis(window_sum, std::min(seen, window));
            const std::size_t in_epoch = k + 1;
            if (epoch == config.epochs && in_epoch > window_start && in_epoch % config.eval_every == 0)
                evaluate_now();
        }
        if (progress) progress("epoch " + std::to_string(epoch) + " done");
    }
    if (result.trace.empty()) evaluate_now();
    double sum = 0.0;
    for (const auto& p : result.trace) sum += p.test_accuracy;
    result.final_accuracy = sum / static_cast<double>(result.trace.size());
    result.thresholds.assign(net.thresholds().begin(), net.thresholds().end());
    result.stats = net.stats();
    return result;
}

}  // namespace mmsyn
