#include "mmsyn/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "mmsyn/error.hpp"

namespace mmsyn {

namespace {

constexpr std::uint64_t kCommonStream = 0xFFFFFFFFFFFFull;
// Membrane partial sums run over fixed blocks so the floating-point result
// does not depend on the thread count.
constexpr std::size_t kBlock = 4096;

DeviceModel model_for(const CorrelationConfig& c) {
    if (c.mode == WeightMode::Linear) return DeviceModel(c.linear_model);
    return DeviceModel(c.pcm_model ? *c.pcm_model : PcmModel::default_model());
}

// Runs fn(first, last) over [0, n) split into contiguous shards.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || n < 2 * kBlock) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    const std::size_t shards = std::min(threads, blocks);
    std::vector<std::jthread> pool;
    pool.reserve(shards);
    for (std::size_t k = 0; k < shards; ++k) {
        const std::size_t first = blocks * k / shards * kBlock;
        const std::size_t last = std::min(n, blocks * (k + 1) / shards * kBlock);
        pool.emplace_back([&fn, first, last] { fn(first, last); });
    }
}

}  // namespace

void StreamConfig::validate() const {
    if (!(c >= 0.0 && c <= 1.0)) throw ConfigError("correlation coefficient must be in [0, 1]");
    if (n_correlated > n_streams) throw ConfigError("more correlated streams than streams");
    if (!(rate > 0.0) || !(ts > 0.0) || rate * ts >= 1.0) throw ConfigError("rate * Ts must be in (0, 1)");
}

StreamGenerator::StreamGenerator(const StreamConfig& config, std::uint64_t seed)
    : config_(config),
      seed_(seed),
      p_(config.rate * config.ts),
      p_common_(p_ + std::sqrt(config.c) * (1.0 - p_)),
      p_no_common_(p_ * (1.0 - std::sqrt(config.c))) {
    config_.validate();
}

bool StreamGenerator::common_event(std::uint64_t step) const {
    const RngStream rng(seed_, stream_id(StreamPurpose::Experiment, kCommonStream));
    const PhiloxBlock b = rng.block_at(step);
    return bits_to_unit(b[0], b[1]) > 1.0 - p_;
}

bool StreamGenerator::spike(std::size_t stream, std::uint64_t step, bool common) const {
    const RngStream rng(seed_, stream_id(StreamPurpose::Experiment, stream));
    const PhiloxBlock b = rng.block_at(step);
    const double x = bits_to_unit(b[0], b[1]);
    if (stream < config_.n_correlated) return common ? p_common_ > x : p_no_common_ > x;
    return x > 1.0 - p_;
}

void StreamGenerator::generate(std::uint64_t step, std::span<std::uint8_t> out, std::size_t first,
                               std::size_t last) const {
    last = std::min(last, config_.n_streams);
    const bool common = common_event(step);
    for (std::size_t i = first; i < last; ++i) out[i] = spike(i, step, common) ? 1 : 0;
}

std::vector<std::vector<std::uint8_t>> generate_streams(const StreamConfig& config, std::size_t n_steps,
                                                        std::uint64_t seed) {
    const StreamGenerator gen(config, seed);
    std::vector<std::vector<std::uint8_t>> out(config.n_streams, std::vector<std::uint8_t>(n_steps, 0));
    std::vector<std::uint8_t> column(config.n_streams);
    for (std::size_t t = 0; t < n_steps; ++t) {
        gen.generate(t, column);
        for (std::size_t i = 0; i < config.n_streams; ++i) out[i][t] = column[i];
    }
    return out;
}

double ExpStdp::potentiation(int dt) const { return a_plus * std::exp(-std::abs(dt) / tau_steps); }
double ExpStdp::depression(int dt) const { return -a_minus * std::exp(-std::abs(dt) / tau_steps); }

StdpAction stdp_action(double dw, double threshold) {
    if (dw >= threshold) return StdpAction::Potentiate;
    if (dw <= -threshold) return StdpAction::Depress;
    return StdpAction::None;
}

StdpTables::StdpTables(const ExpStdp& rule) : pot_(kMask + 1, 0.0), dep_(kMask + 1, 0.0) {
    for (std::uint32_t h = 0; h <= kMask; ++h) {
        for (int k = 0; k <= ExpStdp::kHorizon; ++k) {
            if (!(h >> k & 1u)) continue;
            pot_[h] += rule.potentiation(k);
            if (k > 0) dep_[h] += rule.depression(k);
        }
    }
}

Classification classify_weights(std::span<const double> weights, std::span<const std::uint8_t> labels) {
    if (weights.size() != labels.size()) throw InputError("classify_weights: weights and labels differ in size");
    Classification best;
    if (weights.empty()) return best;
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weights[a] < weights[b]; });

    // Threshold below every weight: everything is called correlated.
    std::size_t errors = 0;
    for (const auto l : labels) errors += l ? 0 : 1;
    best = {weights[order.front()] - 1.0, errors};
    for (std::size_t k = 0; k < order.size(); ++k) {
        // Moving the threshold above order[k] relabels it uncorrelated.
        errors += labels[order[k]] ? 1 : -1;
        const bool last = k + 1 == order.size();
        if (!last && weights[order[k + 1]] == weights[order[k]]) continue;
        const double threshold = last ? weights[order[k]] + 1.0 : 0.5 * (weights[order[k]] + weights[order[k + 1]]);
        if (errors < best.misclassified) best = {threshold, errors};
    }
    return best;
}

void CorrelationConfig::validate() const {
    streams.validate();
    if (mode == WeightMode::Float64) throw ConfigError("correlation: weights must be stored in devices");
    if (devices < 1) throw ConfigError("correlation: devices per synapse must be >= 1");
    if (!(neuron_threshold > 0.0)) throw ConfigError("correlation: neuron threshold must be > 0");
    if (init_pulses < 0 || pulses_per_potentiation < 1) throw ConfigError("correlation: invalid pulse counts");
    if (!(g_per_weight > 0.0)) throw ConfigError("correlation: g_per_weight must be > 0");
    if (threads < 1) throw ConfigError("correlation: threads must be >= 1");
    for (const auto s : trace_synapses)
        if (s >= streams.n_streams) throw ConfigError("correlation: traced synapse out of range");
}

CorrelationResult run_correlation(const CorrelationConfig& config, const ProgressFn& progress) {
    config.validate();
    const std::size_t n = config.streams.n_streams;
    const int devices = config.devices;
    const DeviceModel model = model_for(config);

    SynapseSpec spec;
    spec.devices = devices;
    spec.map = {0.0, 0.0, config.g_per_weight, 1.0 / devices};
    SynapseArray array(n, spec, model, derive_seed(config.seed, 1));
    for (std::size_t s = 0; s < n; ++s)
        for (int d = 0; d < devices; ++d) {
            array.set_conductance(s, d, config.g_init);
            array.potentiate(s, d, config.init_pulses, 0.0);
        }

    ArbitrationState arb = ArbitrationState::make(devices, 1, 1, devices > 1 ? 2 : 1);
    const StreamGenerator gen(config.streams, derive_seed(config.seed, 2));
    const StdpTables tables(config.stdp);
    const double program_threshold = config.stdp.program_threshold;

    CorrelationResult result;
    result.labels.assign(n, 0);
    std::fill(result.labels.begin(), result.labels.begin() + static_cast<long>(config.streams.n_correlated), 1);
    result.traced = config.trace_synapses;
    if (result.traced.empty()) {
        const std::size_t nc = config.streams.n_correlated;
        for (std::size_t k = 0; k < 5 && k < nc; ++k) result.traced.push_back(k);
        for (std::size_t k = nc; k < nc + 5 && k < n; ++k) result.traced.push_back(k);
    }
    auto record = [&](std::size_t step) {
        TracePoint p{step, {}};
        for (const auto s : result.traced) p.weights.push_back(array.weight(s));
        result.trace.push_back(std::move(p));
    };
    if (config.trace_every > 0) record(0);

    std::vector<std::uint8_t> spikes(n, 0);
    std::vector<std::uint16_t> pre(n, 0);
    std::uint16_t post = 0;
    std::vector<double> dw(n, 0.0);
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(blocks, 0.0);
    double membrane = 0.0;

    for (std::size_t step = 1; step <= config.steps; ++step) {
        const bool common = gen.common_event(step);
        const auto weights = array.weights();
        parallel_for(n, config.threads, [&](std::size_t first, std::size_t last) {
            for (std::size_t b = first / kBlock; b * kBlock < last; ++b) {
                const std::size_t end = std::min(last, (b + 1) * kBlock);
                double sum = 0.0;
                for (std::size_t i = b * kBlock; i < end; ++i) {
                    spikes[i] = gen.spike(i, step, common) ? 1 : 0;
                    pre[i] = static_cast<std::uint16_t>(((pre[i] << 1) | spikes[i]) & StdpTables::kMask);
                    if (spikes[i]) sum += weights[i];
                }
                partial[b] = sum;
            }
        });
        const double input = std::accumulate(partial.begin(), partial.end(), 0.0);
        membrane = config.accumulate ? membrane + input : input;
        const bool fired = neuron_fires(membrane, config.neuron_threshold);
        if (fired) {
            membrane = 0.0;
            ++result.output_spikes;
        }
        post = static_cast<std::uint16_t>(((post << 1) | (fired ? 1 : 0)) & StdpTables::kMask);

        const double dep = tables.depression(post);
        parallel_for(n, config.threads, [&](std::size_t first, std::size_t last) {
            for (std::size_t i = first; i < last; ++i)
                dw[i] = (fired ? tables.potentiation(pre[i]) : 0.0) + (spikes[i] ? dep : 0.0);
        });

        const double t_now = static_cast<double>(step) * config.streams.ts;
        // The step's net STDP change decides a single pulse.
        auto request = [&](std::size_t i, PulseKind kind, int pulses) {
            const UpdateResult r = apply_pulses(array, i, arb, kind, pulses, t_now);
            advance_selection(arb);
            ++result.stats.requests;
            result.stats.potentiation_pulses += static_cast<std::uint64_t>(r.potentiation_pulses);
            result.stats.depression_pulses += static_cast<std::uint64_t>(r.depression_pulses);
        };
        for (std::size_t i = 0; i < n; ++i) {
            const StdpAction action = stdp_action(dw[i], program_threshold);
            if (action == StdpAction::Potentiate)
                request(i, PulseKind::Potentiation, config.pulses_per_potentiation);
            else if (action == StdpAction::Depress)
                request(i, PulseKind::Depression, 1);
        }

        if (config.trace_every > 0 && step % config.trace_every == 0) record(step);
        if (progress && step % 1000 == 0)
            progress("step " + std::to_string(step) + " output spikes " + std::to_string(result.output_spikes));
    }

    result.weights.assign(array.weights().begin(), array.weights().end());
    result.classification = classify_weights(result.weights, result.labels);
    return result;
}

double max_step_drop(const CorrelationResult& result, std::size_t traced_index) {
    double drop = 0.0;
    for (std::size_t k = 1; k < result.trace.size(); ++k)
        drop = std::max(drop, result.trace[k - 1].weights[traced_index] - result.trace[k].weights[traced_index]);
    return drop;
}

}  // namespace mmsyn
