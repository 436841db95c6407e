#include "mmsyn/ann.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "mmsyn/error.hpp"

namespace mmsyn {

std::string to_string(WeightMode mode) {
    switch (mode) {
        case WeightMode::Float64: return "float64";
        case WeightMode::Linear: return "linear";
        case WeightMode::Pcm: return "pcm";
    }
    return "?";
}

WeightMode parse_weight_mode(const std::string& text) {
    if (text == "float64" || text == "float") return WeightMode::Float64;
    if (text == "linear" || text == "linear-model") return WeightMode::Linear;
    if (text == "pcm" || text == "pcm-model") return WeightMode::Pcm;
    throw ConfigError("unknown weight mode '" + text + "'");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw ConfigError("mlp needs at least an input and an output layer");
    for (int s : sizes_)
        if (s < 1) throw ConfigError("mlp layer sizes must be positive");
    const int layers = layer_count();
    weights_.resize(layers);
    errors_.resize(layers);
    activations_.resize(layers + 1);
    for (int l = 0; l < layers; ++l) {
        weights_[l].assign(static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1), 0.0);
        errors_[l].assign(sizes_[l + 1], 0.0);
        activations_[l].assign(sizes_[l] + 1, 1.0);
    }
    activations_[layers].assign(sizes_[layers], 0.0);
}

std::span<const double> Mlp::forward(std::span<const double> input) {
    if (static_cast<int>(input.size()) != sizes_[0])
        throw InputError("mlp forward: expected " + std::to_string(sizes_[0]) + " inputs, got " +
                         std::to_string(input.size()));
    std::copy(input.begin(), input.end(), activations_[0].begin());
    for (int l = 0; l < layer_count(); ++l) {
        const int in = sizes_[l] + 1;
        const int out = sizes_[l + 1];
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
            weights_[l].data(), out, in);
        Eigen::Map<const Eigen::VectorXd> a(activations_[l].data(), in);
        Eigen::Map<Eigen::VectorXd> next(activations_[l + 1].data(), out);
        next.noalias() = w * a;
        for (int j = 0; j < out; ++j) next[j] = sigmoid(next[j]);
    }
    return activations_.back();
}

double Mlp::loss(std::span<const double> target) const {
    const auto& out = activations_.back();
    double l = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) l += 0.5 * (out[k] - target[k]) * (out[k] - target[k]);
    return l;
}

double Mlp::backward(std::span<const double> target) {
    const int layers = layer_count();
    if (static_cast<int>(target.size()) != sizes_[layers])
        throw InputError("mlp backward: target size mismatch");
    const auto& out = activations_[layers];
    for (int k = 0; k < sizes_[layers]; ++k)
        errors_[layers - 1][k] = (out[k] - target[k]) * out[k] * (1.0 - out[k]);
    for (int l = layers - 2; l >= 0; --l) {
        const int width = sizes_[l + 2];
        const int in = sizes_[l + 1] + 1;
        const auto& w = weights_[l + 1];
        const auto& a = activations_[l + 1];
        for (int j = 0; j < sizes_[l + 1]; ++j) {
            double sum = 0.0;
            for (int k = 0; k < width; ++k) sum += w[static_cast<std::size_t>(k) * in + j] * errors_[l + 1][k];
            errors_[l][j] = sum * a[j] * (1.0 - a[j]);
        }
    }
    return loss(target);
}

std::vector<std::vector<double>> Mlp::weight_deltas(double learning_rate) const {
    std::vector<std::vector<double>> out(layer_count());
    for (int l = 0; l < layer_count(); ++l) {
        out[l].resize(weights_[l].size());
        for (int j = 0; j < sizes_[l + 1]; ++j)
            for (int i = 0; i <= sizes_[l]; ++i) out[l][index(l, j, i)] = delta_w(l, j, i, learning_rate);
    }
    return out;
}

void AnnConfig::validate() const {
    if (devices < 1) throw ConfigError("ann: devices per synapse must be >= 1");
    if (mode != WeightMode::Float64 && architecture == Architecture::Differential && devices % 2 != 0)
        throw ConfigError("ann: differential architecture needs an even number of devices");
    if (hidden < 1) throw ConfigError("ann: hidden layer must have at least one neuron");
    if (epochs < 1) throw ConfigError("ann: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("ann: learning rate must be > 0");
    if (eval_every == 0) throw ConfigError("ann: eval_every must be >= 1");
}

namespace {

DeviceModel model_for(const AnnConfig& c) {
    if (c.mode == WeightMode::Linear) return DeviceModel(c.linear_model);
    return DeviceModel(c.pcm_model ? *c.pcm_model : PcmModel::default_model());
}

}  // namespace

AnnNetwork::AnnNetwork(const AnnConfig& config, int inputs, int outputs)
    : config_(config), mlp_({inputs, config.hidden, outputs}) {
    config_.validate();
    RngStream init(config_.seed, stream_id(StreamPurpose::Initialization, 0));

    if (config_.mode == WeightMode::Float64) {
        for (int l = 0; l < mlp_.layer_count(); ++l)
            for (double& w : mlp_.weights(l)) w = init.uniform(-0.5, 0.5);
        return;
    }

    const int n = config_.devices;
    const DeviceModel model = model_for(config_);
    const double g_max = model.g_max();
    SynapseSpec spec;
    spec.architecture = config_.architecture;
    spec.devices = n;
    const bool differential = spec.architecture == Architecture::Differential;
    if (differential)
        spec.map = {0.0, 0.0, g_max, 2.0 / n};
    else
        spec.map = {0.0, -1.0 / n, g_max, 1.0 / n};

    for (int l = 0; l < mlp_.layer_count(); ++l) {
        auto& array = arrays_.emplace_back(mlp_.weights(l).size(), spec, model,
                                           derive_seed(config_.seed, static_cast<std::uint64_t>(l)));
        for (std::size_t s = 0; s < array.size(); ++s) {
            for (int d = 0; d < n; ++d) {
                const double w = differential ? init.uniform(1.0 / n, 2.0 / n) : init.uniform(-0.5 / n, 0.5 / n);
                array.set_device_weight(s, d, w);
            }
            mlp_.weights(l)[s] = array.weight(s);
        }
    }

    const int selection_length = spec.set_size();
    if (differential || n == 1)
        arb_ = ArbitrationState::make(selection_length);
    else
        arb_ = ArbitrationState::make(selection_length, 1, 2, 5);
    rules_.epsilon = config_.epsilon();
    rules_.depression_threshold = 0.5 * rules_.epsilon;
    dynamic_read_ = model.drift_enabled() || model.read_noise_sigma() > 0.0;
}

const SynapseArray* AnnNetwork::synapses(int layer) const {
    if (arrays_.empty()) return nullptr;
    return &arrays_.at(static_cast<std::size_t>(layer));
}

void AnnNetwork::read_out(double t_now) {
    for (std::size_t l = 0; l < arrays_.size(); ++l) {
        RngStream rng(config_.seed, stream_id(StreamPurpose::DeviceRead, l), static_cast<std::uint64_t>(t_now) << 28);
        auto& w = mlp_.weights(static_cast<int>(l));
        for (std::size_t s = 0; s < arrays_[l].size(); ++s) w[s] = arrays_[l].read_weight(s, t_now, rng);
    }
}

std::span<const double> AnnNetwork::forward(std::span<const double> input) {
    if (dynamic_read_) read_out(static_cast<double>(examples_));
    return mlp_.forward(input);
}

void AnnNetwork::train_example(std::span<const double> input, int label) {
    forward(input);
    std::vector<double> target(mlp_.sizes().back(), 0.0);
    target.at(static_cast<std::size_t>(label)) = 1.0;
    mlp_.backward(target);
    ++examples_;

    if (config_.mode == WeightMode::Float64) {
        const double lr = config_.learning_rate;
        for (int l = 0; l < mlp_.layer_count(); ++l) {
            const auto a = mlp_.activations(l);
            const int in = mlp_.inputs(l) + 1;
            double* w = mlp_.weights(l).data();
            for (int j = 0; j < mlp_.outputs(l); ++j) {
                const double scale = -lr * mlp_.error_term(l, j);
                double* row = w + static_cast<std::size_t>(j) * in;
                for (int i = 0; i < in; ++i) row[i] += scale * a[i];
            }
        }
        return;
    }
    apply_device_updates();
}

void AnnNetwork::apply_device_updates() {
    const double lr = config_.learning_rate;
    const double t_now = static_cast<double>(examples_);
    const bool differential = config_.architecture == Architecture::Differential;
    std::uint64_t requests = 0;
    for (int l = 0; l < mlp_.layer_count(); ++l) {
        SynapseArray& array = arrays_[static_cast<std::size_t>(l)];
        auto& w = mlp_.weights(l);
        const auto a = mlp_.activations(l);
        const int in = mlp_.inputs(l) + 1;
        for (int j = 0; j < mlp_.outputs(l); ++j) {
            const double scale = -lr * mlp_.error_term(l, j);
            const std::size_t row = static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) {
                const double dw = scale * a[i];
                if (dw == 0.0) continue;
                const std::size_t s = row + i;
                const UpdateResult r = apply_update(array, s, arb_, dw, rules_, t_now);
                ++stats_.requests;
                ++requests;
                if (r.potentiation_pulses == 0 && r.depression_pulses == 0) continue;
                stats_.potentiation_pulses += static_cast<std::uint64_t>(r.potentiation_pulses);
                stats_.depression_pulses += static_cast<std::uint64_t>(r.depression_pulses);
                if (differential && refresh(array, s, config_.refresh_threshold, rules_.epsilon, t_now))
                    ++stats_.refreshes;
                w[s] = array.weight(s);
            }
        }
    }
    if (config_.realign_selection) realign_selection(arb_, requests);
}

double AnnNetwork::evaluate(const MnistSet& test, std::size_t limit) {
    const std::size_t count = limit == 0 ? test.size() : std::min(limit, test.size());
    if (count == 0) return 0.0;
    std::vector<double> input(test.image_size());
    if (dynamic_read_) read_out(static_cast<double>(examples_));
    std::size_t correct = 0;
    for (std::size_t k = 0; k < count; ++k) {
        scale_pixels(test.image(k), input);
        const auto out = mlp_.forward(input);
        const auto best = std::max_element(out.begin(), out.end()) - out.begin();
        if (best == test.labels[k]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(count);
}

void scale_pixels(std::span<const std::uint8_t> pixels, std::span<double> out) {
    for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = pixels[i] / 255.0;
}

AnnResult train_ann(const AnnConfig& config, const Mnist& data, const ProgressFn& progress) {
    const std::size_t per_epoch = config.train_limit == 0 ? data.train.size()
                                                          : std::min(config.train_limit, data.train.size());
    if (per_epoch == 0) throw InputError("train_ann: training set is empty");
    AnnNetwork net(config, static_cast<int>(data.train.image_size()), 10);
    std::vector<double> input(data.train.image_size());
    AnnResult result;

    const std::size_t window_start = per_epoch > config.eval_window ? per_epoch - config.eval_window : 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t k = 0; k < per_epoch; ++k) {
            scale_pixels(data.train.image(k), input);
            net.train_example(input, data.train.labels[k]);
            const std::size_t seen = k + 1;
            if (epoch == config.epochs && seen > window_start && seen % config.eval_every == 0) {
                const double acc = net.evaluate(data.test, config.test_limit);
                result.trace.push_back({net.examples_seen(), acc});
                if (progress)
                    progress("epoch " + std::to_string(epoch) + " example " + std::to_string(seen) +
                             " test accuracy " + std::to_string(acc));
            }
        }
        if (progress && epoch < config.epochs) progress("epoch " + std::to_string(epoch) + " done");
    }
    if (result.trace.empty()) result.trace.push_back({net.examples_seen(), net.evaluate(data.test, config.test_limit)});
    double sum = 0.0;
    for (const auto& p : result.trace) sum += p.test_accuracy;
    result.final_accuracy = sum / static_cast<double>(result.trace.size());
    result.stats = net.stats();
    return result;
}

}  // namespace mmsyn
