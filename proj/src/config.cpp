#include "mmsyn/config.hpp"

#include <fstream>
#include <set>

#include "mmsyn/error.hpp"

namespace mmsyn {

namespace {

// Reads the members of one JSON object, rejecting keys nobody asked for.
class Fields {
public:
    Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& value) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            value = it->template get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type");
        }
    }

    template <typename Enum, typename Parse>
    void get_enum(const char* key, Enum& value, Parse parse) {
        std::string text;
        get(key, text);
        if (!text.empty()) value = parse(text);
    }

    const Json* child(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [key, _] : j_.items())
            if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

Json knots_to_json(const std::vector<Knot>& knots) {
    Json a = Json::array();
    for (const auto& k : knots) a.push_back({k.g, k.value});
    return a;
}

std::vector<Knot> knots_from_json(const Json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array of [g, value] pairs");
    std::vector<Knot> knots;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw ConfigError(where + ": expected [g, value] pairs");
        knots.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return knots;
}

Json stream_json(const StreamConfig& s) {
    return {{"n_streams", s.n_streams}, {"n_correlated", s.n_correlated}, {"c", s.c}, {"rate", s.rate}, {"ts", s.ts}};
}

Json ann_json(const AnnConfig& c) {
    return {{"hidden", c.hidden},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"train_limit", c.train_limit},
            {"test_limit", c.test_limit},
            {"eval_window", c.eval_window},
            {"eval_every", c.eval_every},
            {"refresh_threshold", c.refresh_threshold},
            {"realign_selection", c.realign_selection}};
}

void read_ann(const Json& j, AnnConfig& c) {
    Fields f(j, "ann");
    f.get("hidden", c.hidden);
    f.get("learning_rate", c.learning_rate);
    f.get("epochs", c.epochs);
    f.get("train_limit", c.train_limit);
    f.get("test_limit", c.test_limit);
    f.get("eval_window", c.eval_window);
    f.get("eval_every", c.eval_every);
    f.get("refresh_threshold", c.refresh_threshold);
    f.get("realign_selection", c.realign_selection);
    f.finish();
}

Json snn_json(const SnnConfig& c) {
    return {{"outputs", c.outputs},
            {"epochs", c.epochs},
            {"train_limit", c.train_limit},
            {"assign_limit", c.assign_limit},
            {"test_limit", c.test_limit},
            {"eval_window", c.eval_window},
            {"eval_every", c.eval_every},
            {"dt_ms", c.dt_ms},
            {"presentation_ms", c.presentation_ms},
            {"tau_ms", c.tau_ms},
            {"max_rate_hz", c.max_rate_hz},
            {"initial_threshold", c.initial_threshold},
            {"dw_plus", c.dw_plus},
            {"dw_minus", c.dw_minus},
            {"pot_window_ms", c.pot_window_ms},
            {"dep_window_ms", c.dep_window_ms},
            {"depression", to_string(c.depression)},
            {"homeostasis_start", c.homeostasis_start},
            {"homeostasis_every", c.homeostasis_every},
            {"homeostasis_rate", c.homeostasis_rate},
            {"activity_window", c.activity_window},
            {"target_spikes", c.target_spikes},
            {"refresh_threshold", c.refresh_threshold}};
}

void read_snn(const Json& j, SnnConfig& c) {
    Fields f(j, "snn");
    f.get("outputs", c.outputs);
    f.get("epochs", c.epochs);
    f.get("train_limit", c.train_limit);
    f.get("assign_limit", c.assign_limit);
    f.get("test_limit", c.test_limit);
    f.get("eval_window", c.eval_window);
    f.get("eval_every", c.eval_every);
    f.get("dt_ms", c.dt_ms);
    f.get("presentation_ms", c.presentation_ms);
    f.get("tau_ms", c.tau_ms);
    f.get("max_rate_hz", c.max_rate_hz);
    f.get("initial_threshold", c.initial_threshold);
    f.get("dw_plus", c.dw_plus);
    f.get("dw_minus", c.dw_minus);
    f.get("pot_window_ms", c.pot_window_ms);
    f.get("dep_window_ms", c.dep_window_ms);
    f.get_enum("depression", c.depression, parse_depression_pairing);
    f.get("homeostasis_start", c.homeostasis_start);
    f.get("homeostasis_every", c.homeostasis_every);
    f.get("homeostasis_rate", c.homeostasis_rate);
    f.get("activity_window", c.activity_window);
    f.get("target_spikes", c.target_spikes);
    f.get("refresh_threshold", c.refresh_threshold);
    f.finish();
}

Json correlation_json(const CorrelationConfig& c) {
    return {{"streams", stream_json(c.streams)},
            {"steps", c.steps},
            {"neuron_threshold", c.neuron_threshold},
            {"accumulate", c.accumulate},
            {"stdp",
             {{"a_plus", c.stdp.a_plus},
              {"a_minus", c.stdp.a_minus},
              {"tau_steps", c.stdp.tau_steps},
              {"program_threshold", c.stdp.program_threshold}}},
            {"g_init", c.g_init},
            {"init_pulses", c.init_pulses},
            {"pulses_per_potentiation", c.pulses_per_potentiation},
            {"g_per_weight", c.g_per_weight},
            {"threads", c.threads},
            {"trace_every", c.trace_every},
            {"trace_synapses", c.trace_synapses}};
}

void read_correlation(const Json& j, CorrelationConfig& c) {
    Fields f(j, "correlation");
    if (const Json* s = f.child("streams")) {
        Fields g(*s, "correlation.streams");
        g.get("n_streams", c.streams.n_streams);
        g.get("n_correlated", c.streams.n_correlated);
        g.get("c", c.streams.c);
        g.get("rate", c.streams.rate);
        g.get("ts", c.streams.ts);
        g.finish();
    }
    f.get("steps", c.steps);
    f.get("neuron_threshold", c.neuron_threshold);
    f.get("accumulate", c.accumulate);
    if (const Json* s = f.child("stdp")) {
        Fields g(*s, "correlation.stdp");
        g.get("a_plus", c.stdp.a_plus);
        g.get("a_minus", c.stdp.a_minus);
        g.get("tau_steps", c.stdp.tau_steps);
        g.get("program_threshold", c.stdp.program_threshold);
        g.finish();
    }
    f.get("g_init", c.g_init);
    f.get("init_pulses", c.init_pulses);
    f.get("pulses_per_potentiation", c.pulses_per_potentiation);
    f.get("g_per_weight", c.g_per_weight);
    f.get("threads", c.threads);
    f.get("trace_every", c.trace_every);
    f.get("trace_synapses", c.trace_synapses);
    f.finish();
}

Json parse_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open " + file.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

void write_file(const Json& j, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot write " + file.string());
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("cannot write " + file.string());
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Characterize: return "characterize";
        case ExperimentKind::Calibrate: return "calibrate";
        case ExperimentKind::Scaling: return "scaling";
        case ExperimentKind::TrainAnn: return "train-ann";
        case ExperimentKind::TrainSnn: return "train-snn";
        case ExperimentKind::DetectCorrelation: return "detect-correlation";
    }
    return "?";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
    for (const auto k : {ExperimentKind::Characterize, ExperimentKind::Calibrate, ExperimentKind::Scaling,
                         ExperimentKind::TrainAnn, ExperimentKind::TrainSnn, ExperimentKind::DetectCorrelation})
        if (to_string(k) == text) return k;
    throw ConfigError("unknown experiment kind '" + text + "'");
}

void ExperimentConfig::validate() const {
    if (devices < 1) throw ConfigError("devices per synapse must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (output_dir.empty()) throw ConfigError("output directory must not be empty");
    if (pcm_model) pcm_model->validate();
    switch (kind) {
        case ExperimentKind::Characterize:
            if (characterize.devices == 0 || characterize.pulses < 0)
                throw ConfigError("characterize: needs devices and a non-negative pulse count");
            break;
        case ExperimentKind::Calibrate: break;
        case ExperimentKind::Scaling:
            if (scaling.device_counts.empty() || scaling.synapses == 0)
                throw ConfigError("scaling: needs device counts and synapses");
            for (const int n : scaling.device_counts)
                if (n < 1) throw ConfigError("scaling: device counts must be >= 1");
            break;
        case ExperimentKind::TrainAnn: resolve_ann(*this).validate(); break;
        case ExperimentKind::TrainSnn: resolve_snn(*this).validate(); break;
        case ExperimentKind::DetectCorrelation: resolve_correlation(*this).validate(); break;
    }
}

Json model_to_json(const PcmModel& m) {
    return {{"type", "pcm"},
            {"version", m.version},
            {"g_max", m.g_max},
            {"depression_result", m.depression_result},
            {"drift_enabled", m.drift_enabled},
            {"nu_mean", m.nu_mean},
            {"read_noise_sigma", m.read_noise_sigma},
            {"mu_knots", knots_to_json(m.mu_knots)},
            {"sigma_knots", knots_to_json(m.sigma_knots)}};
}

PcmModel model_from_json(const Json& j) {
    PcmModel m;
    Fields f(j, "model");
    std::string type = "pcm";
    f.get("type", type);
    if (type != "pcm") throw ConfigError("model: expected type 'pcm', got '" + type + "'");
    f.get("version", m.version);
    f.get("g_max", m.g_max);
    f.get("depression_result", m.depression_result);
    f.get("drift_enabled", m.drift_enabled);
    f.get("nu_mean", m.nu_mean);
    f.get("read_noise_sigma", m.read_noise_sigma);
    const Json* mu = f.child("mu_knots");
    const Json* sigma = f.child("sigma_knots");
    if (!mu || !sigma) throw ConfigError("model: mu_knots and sigma_knots are required");
    m.mu_knots = knots_from_json(*mu, "model.mu_knots");
    m.sigma_knots = knots_from_json(*sigma, "model.sigma_knots");
    f.finish();
    m.validate();
    return m;
}

Json model_to_json(const LinearModel& m) {
    return {{"mean_step", m.mean_step}, {"sigma_step", m.sigma_step}, {"g_max", m.g_max}};
}

LinearModel linear_model_from_json(const Json& j) {
    LinearModel m;
    Fields f(j, "linear_model");
    f.get("mean_step", m.mean_step);
    f.get("sigma_step", m.sigma_step);
    f.get("g_max", m.g_max);
    f.finish();
    m.validate();
    return m;
}

PcmModel load_model(const std::filesystem::path& file) {
    try {
        return model_from_json(parse_file(file));
    } catch (const ConfigError& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

void save_model(const PcmModel& model, const std::filesystem::path& file) { write_file(model_to_json(model), file); }

Json to_json(const ExperimentConfig& c) {
    Json j = {{"kind", to_string(c.kind)},
              {"mode", to_string(c.mode)},
              {"architecture", to_string(c.architecture)},
              {"devices", c.devices},
              {"seed", c.seed},
              {"model_file", c.model_file},
              {"dataset_dir", c.dataset_dir},
              {"output_dir", c.output_dir},
              {"epochs", c.epochs},
              {"steps", c.steps},
              {"characterize",
               {{"devices", c.characterize.devices},
                {"pulses", c.characterize.pulses},
                {"init_g", c.characterize.init_g}}},
              {"calibrate",
               {{"target_file", c.calibrate.target_file},
                {"knot_count", c.calibrate.options.knot_count},
                {"g_max", c.calibrate.options.g_max},
                {"n_devices", c.calibrate.options.n_devices},
                {"seed", c.calibrate.options.seed},
                {"max_iterations", c.calibrate.options.max_iterations},
                {"tolerance", c.calibrate.options.tolerance},
                {"default_sigma", c.calibrate.options.default_sigma},
                {"smoothing", c.calibrate.options.smoothing}}},
              {"scaling",
               {{"device_counts", c.scaling.device_counts},
                {"synapses", c.scaling.synapses},
                {"pulses_per_device", c.scaling.pulses_per_device},
                {"init_g", c.scaling.init_g}}},
              {"ann", ann_json(c.ann)},
              {"snn", snn_json(c.snn)},
              {"correlation", correlation_json(c.correlation)},
              {"linear_model", model_to_json(c.linear_model)}};
    if (c.pcm_model) j["pcm_model"] = model_to_json(*c.pcm_model);
    return j;
}

ExperimentConfig config_from_json(const Json& j) {
    ExperimentConfig c;
    Fields f(j, "config");
    f.get_enum("kind", c.kind, parse_experiment_kind);
    f.get_enum("mode", c.mode, parse_weight_mode);
    f.get_enum("architecture", c.architecture, parse_architecture);
    f.get("devices", c.devices);
    f.get("seed", c.seed);
    f.get("model_file", c.model_file);
    f.get("dataset_dir", c.dataset_dir);
    f.get("output_dir", c.output_dir);
    f.get("epochs", c.epochs);
    f.get("steps", c.steps);
    if (const Json* s = f.child("characterize")) {
        Fields g(*s, "characterize");
        g.get("devices", c.characterize.devices);
        g.get("pulses", c.characterize.pulses);
        g.get("init_g", c.characterize.init_g);
        g.finish();
    }
    if (const Json* s = f.child("calibrate")) {
        Fields g(*s, "calibrate");
        auto& o = c.calibrate.options;
        g.get("target_file", c.calibrate.target_file);
        g.get("knot_count", o.knot_count);
        g.get("g_max", o.g_max);
        g.get("n_devices", o.n_devices);
        g.get("seed", o.seed);
        g.get("max_iterations", o.max_iterations);
        g.get("tolerance", o.tolerance);
        g.get("default_sigma", o.default_sigma);
        g.get("smoothing", o.smoothing);
        g.finish();
    }
    if (const Json* s = f.child("scaling")) {
        Fields g(*s, "scaling");
        g.get("device_counts", c.scaling.device_counts);
        g.get("synapses", c.scaling.synapses);
        g.get("pulses_per_device", c.scaling.pulses_per_device);
        g.get("init_g", c.scaling.init_g);
        g.finish();
    }
    if (const Json* s = f.child("ann")) read_ann(*s, c.ann);
    if (const Json* s = f.child("snn")) read_snn(*s, c.snn);
    if (const Json* s = f.child("correlation")) read_correlation(*s, c.correlation);
    if (const Json* s = f.child("linear_model")) c.linear_model = linear_model_from_json(*s);
    if (const Json* s = f.child("pcm_model")) c.pcm_model = model_from_json(*s);
    f.finish();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    try {
        return config_from_json(parse_file(file));
    } catch (const ConfigError& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& file) {
    write_file(to_json(config), file);
}

AnnConfig resolve_ann(const ExperimentConfig& config) {
    AnnConfig c = config.ann;
    c.mode = config.mode;
    c.architecture = config.architecture;
    c.devices = config.devices;
    c.seed = config.seed;
    if (config.epochs > 0) c.epochs = config.epochs;
    c.pcm_model = config.pcm_model;
    c.linear_model = config.linear_model;
    return c;
}

SnnConfig resolve_snn(const ExperimentConfig& config) {
    SnnConfig c = config.snn;
    c.mode = config.mode;
    c.architecture = config.architecture;
    c.devices = config.devices;
    c.seed = config.seed;
    if (config.epochs > 0) c.epochs = config.epochs;
    c.pcm_model = config.pcm_model;
    c.linear_model = config.linear_model;
    return c;
}

CorrelationConfig resolve_correlation(const ExperimentConfig& config) {
    CorrelationConfig c = config.correlation;
    c.mode = config.mode;
    c.devices = config.devices;
    c.seed = config.seed;
    if (config.steps > 0) c.steps = config.steps;
    c.pcm_model = config.pcm_model;
    c.linear_model = config.linear_model;
    return c;
}

}  // namespace mmsyn
