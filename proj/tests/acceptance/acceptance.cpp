// Acceptance checks. Prints one PASS/FAIL line per criterion and a summary.
// With --strict the exit status is non-zero if any criterion fails.
//
//   acceptance [--long] [--strict] [--mnist DIR] [--only 1,4,...] [--threads T]
//
// Without --long the MNIST criteria run their reduced variants (one-epoch
// ANN trend, 6,000-image SNN trend); --long adds the full-length runs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mmsyn/ann.hpp"
#include "mmsyn/config.hpp"
#include "mmsyn/correlation.hpp"
#include "mmsyn/mnist.hpp"
#include "mmsyn/run.hpp"
#include "mmsyn/snn.hpp"
#include "mmsyn/synapse.hpp"

using namespace mmsyn;
namespace fs = std::filesystem;

namespace {

struct Options {
    bool long_runs = false;
    bool strict = false;
    std::string mnist_dir;
    std::set<int> only;
    std::size_t threads = 1;
};

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(std::string(ok ? "" : "!") + what);
    }
};

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[200];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

void log(const std::string& line) {
    std::fprintf(stderr, "  %s\n", line.c_str());
    std::fflush(stderr);
}

std::optional<Mnist> load_dataset(const Options& o) {
    std::string dir = o.mnist_dir;
    if (dir.empty()) {
        const char* env = std::getenv(kMnistDirEnv);
        if (env) dir = env;
    }
    if (dir.empty()) return std::nullopt;
    try {
        return load_mnist(dir);
    } catch (const std::exception& e) {
        log(std::string("dataset: ") + e.what());
        return std::nullopt;
    }
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] < v[k - 1])) return false;
    return true;
}

bool increasing(const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] > v[k - 1])) return false;
    return true;
}

// 1. Mean and variance of the cumulative conductance change scale with N.
Outcome scaling(const Options&) {
    Outcome out;
    Clock clock;
    const std::vector<int> ns{1, 3, 7};
    const auto rows = scaling_experiment(ns, 1000, 10, DeviceModel(PcmModel::default_model()), 1, 0.1);
    const double secs = clock.seconds();
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const double n = rows[k].devices;
        const double mr = rows[k].mean / rows[0].mean;
        const double vr = rows[k].variance / rows[0].variance;
        out.check(std::abs(mr - n) <= 0.1 * n, fmt("N=%g mean ratio %.3f", n, mr));
        out.check(std::abs(vr - n) <= 0.3 * n, fmt("N=%g variance ratio %.3f", n, vr));
    }
    out.check(secs < 10.0, fmt("%.2f s", secs));
    return out;
}

// 2. Equal-mean updates of a 4-device synapse have half the spread.
Outcome resolution(const Options&) {
    Outcome out;
    // Start mid-range with a small step spread so the device bounds never clip.
    const DeviceModel linear(LinearModel{0.5, 0.1, 100.0});
    const std::size_t trials = 10000;
    auto spread = [&](int n) {
        SynapseSpec spec;
        spec.devices = n;
        spec.map = {0.0, 0.0, 10.0, 1.0 / n};
        SynapseArray array(trials, spec, linear, derive_seed(7, static_cast<std::uint64_t>(n)));
        for (std::size_t s = 0; s < trials; ++s)
            for (int d = 0; d < n; ++d) array.set_conductance(s, d, 50.0);
        ArbitrationState arb = ArbitrationState::make(n);
        const UpdateRules rules{0.05 / n, 0.0};
        std::vector<double> change(trials);
        for (std::size_t s = 0; s < trials; ++s) {
            // One request of n pulses per synapse: the same mean change for every n.
            const double before = array.weight(s);
            apply_update(array, s, arb, 0.05, rules, 0.0);
            change[s] = array.weight(s) - before;
        }
        const double mean = std::accumulate(change.begin(), change.end(), 0.0) / trials;
        double ss = 0.0;
        for (const double c : change) ss += (c - mean) * (c - mean);
        return std::sqrt(ss / (trials - 1));
    };
    const double ratio = spread(1) / spread(4);
    out.check(ratio >= 1.8 && ratio <= 2.2, fmt("std ratio N=1/N=4 %.3f", ratio));
    return out;
}

// 3. Every device of a synapse is selected floor(M/N) or ceil(M/N) times,
// exactly as predicted by the modular inverse of the increment.
Outcome coverage(const Options&) {
    Outcome out;
    Clock clock;
    const DeviceModel exact(LinearModel{0.5, 0.0, 1e9});
    std::size_t cases = 0, bad = 0;
    for (int n = 1; n <= 12; ++n)
        for (int k = 1; k <= std::max(1, n - 1); ++k) {
            if (std::gcd(n, k) != 1) continue;
            int inverse = 1;
            while ((inverse * k) % n != 1 % n) ++inverse;
            SynapseSpec spec;
            spec.devices = n;
            SynapseArray array(1, spec, exact, 1);
            ArbitrationState arb = ArbitrationState::make(n, k);
            const UpdateRules rules{0.05, 0.0};  // one 0.5 uS pulse = 0.05 per request
            std::vector<int> counts(n, 0);
            for (int m = 1; m <= 1000; ++m) {
                std::vector<double> before(n);
                for (int d = 0; d < n; ++d) before[d] = array.device(0, d).conductance;
                apply_update(array, 0, arb, 0.05, rules, 0.0);
                for (int d = 0; d < n; ++d)
                    if (array.device(0, d).conductance != before[d]) ++counts[d];
                ++cases;
                for (int d = 0; d < n; ++d) {
                    const int expected = m / n + (((d * inverse) % n) < m % n ? 1 : 0);
                    if (counts[d] != expected) ++bad;
                }
            }
        }
    const double secs = clock.seconds();
    out.check(bad == 0, fmt("%g (N, k, M) cases, %g mismatches", static_cast<double>(cases), static_cast<double>(bad)));
    out.check(secs < 1.0, fmt("%.3f s", secs));
    return out;
}

// 4. Small-scale correlation detection improves with N.
Outcome correlation_small(const Options& o) {
    Outcome out;
    Clock clock;
    std::vector<double> means;
    for (const int n : {1, 3, 7}) {
        double sum = 0.0;
        std::string per_seed;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            CorrelationConfig c;
            c.devices = n;
            c.seed = seed;
            c.threads = o.threads;
            c.trace_every = 0;
            const auto r = run_correlation(c);
            sum += static_cast<double>(r.classification.misclassified);
            per_seed += " " + std::to_string(r.classification.misclassified);
        }
        means.push_back(sum / 5.0);
        log("N=" + std::to_string(n) + " misclassified per seed:" + per_seed);
    }
    const double secs = clock.seconds();
    out.check(strictly_decreasing(means), fmt("mean misclassified N=1,3,7: %.1f %.1f %.1f", means[0], means[1], means[2]));
    out.check(means[2] <= 2.0, fmt("N=7 mean %.1f", means[2]));
    out.check(secs < 60.0, fmt("%.1f s", secs));
    return out;
}

// 5. Large-scale correlation detection.
Outcome correlation_large(const Options& o) {
    Outcome out;
    Clock clock;
    CorrelationConfig c;
    c.streams.n_streams = 144000;
    c.streams.n_correlated = 14400;
    c.devices = 7;
    c.steps = 3000;
    // The threshold scales with the number of inputs.
    c.neuron_threshold = 52.0 * 144.0;
    c.threads = o.threads;
    c.trace_every = 0;
    const auto r = run_correlation(c, [](const std::string& s) { log(s); });
    const double frac = static_cast<double>(r.classification.misclassified) / 144000.0;
    out.check(frac <= 0.003, fmt("misclassified %g (%.3f%%)", static_cast<double>(r.classification.misclassified),
                                 100.0 * frac));
    out.notes.push_back(fmt("%.0f s with %g threads", clock.seconds(), static_cast<double>(o.threads)));
    return out;
}

AnnResult ann_run(const Mnist& data, WeightMode mode, Architecture arch, int n, int epochs, std::size_t train_limit,
                  std::size_t test_limit, std::size_t eval_window, std::uint64_t seed) {
    AnnConfig c;
    c.mode = mode;
    c.architecture = arch;
    c.devices = n;
    c.epochs = epochs;
    c.train_limit = train_limit;
    c.test_limit = test_limit;
    c.eval_window = eval_window;
    c.seed = seed;
    Clock clock;
    const AnnResult r = train_ann(c, data);
    log(to_string(mode) + " " + to_string(arch) + " N=" + std::to_string(n) + " epochs=" + std::to_string(epochs) +
        fmt(" accuracy %.4f (%.0f s)", r.final_accuracy, clock.seconds()));
    return r;
}

// 6. ANN accuracies.
Outcome ann(const Options& o, const std::optional<Mnist>& data) {
    Outcome out;
    if (!data) {
        out.check(false, "MNIST not available (set MMSYN_MNIST_DIR)");
        return out;
    }
    // One-epoch trend with the PCM model, non-differential architecture.
    // Small N stays at chance after one epoch, so the points are spread out.
    std::vector<double> acc;
    for (const int n : {1, 7, 20}) {
        const auto r = ann_run(*data, WeightMode::Pcm, Architecture::NonDifferential, n, 1, 0, 2000, 10000, 1);
        acc.push_back(r.final_accuracy);
    }
    out.check(increasing(acc), fmt("1-epoch PCM N=1,7,20: %.3f %.3f %.3f", acc[0], acc[1], acc[2]));
    if (!o.long_runs) {
        out.notes.push_back("full 10-epoch runs need --long");
        return out;
    }
    const auto full = [&](WeightMode m, Architecture a, int n) {
        return 100.0 * ann_run(*data, m, a, n, 10, 0, 0, 20000, 1).final_accuracy;
    };
    const double fl = full(WeightMode::Float64, Architecture::NonDifferential, 1);
    out.check(std::abs(fl - 97.8) <= 0.3, fmt("float64 %.2f%%", fl));
    const double lin = full(WeightMode::Linear, Architecture::Differential, 20);
    out.check(lin >= 96.5, fmt("linear differential N=20 %.2f%%", lin));
    for (const int n : {8, 16}) {
        const double d = full(WeightMode::Pcm, Architecture::Differential, n);
        out.check(d >= 88.0, fmt("PCM differential N=%g %.2f%%", n, d));
    }
    const double nd = full(WeightMode::Pcm, Architecture::NonDifferential, 20);
    out.check(nd >= 89.0, fmt("PCM non-differential N=20 %.2f%%", nd));
    const double d2 = full(WeightMode::Pcm, Architecture::Differential, 2);
    out.check(d2 <= 20.0, fmt("PCM differential N=2 %.2f%%", d2));
    return out;
}

SnnResult snn_run(const Mnist& data, WeightMode mode, Architecture arch, int n, int epochs, std::size_t train_limit,
                  std::size_t assign_limit, std::size_t test_limit, std::size_t eval_every, std::uint64_t seed) {
    SnnConfig c;
    c.mode = mode;
    c.architecture = arch;
    c.devices = n;
    c.epochs = epochs;
    c.train_limit = train_limit;
    c.assign_limit = assign_limit;
    c.test_limit = test_limit;
    c.eval_every = eval_every;
    c.seed = seed;
    Clock clock;
    const SnnResult r = train_snn(c, data);
    log(to_string(mode) + " " + to_string(arch) + " N=" + std::to_string(n) + " seed=" + std::to_string(seed) +
        fmt(" accuracy %.4f (%.0f s)", r.final_accuracy, clock.seconds()));
    return r;
}

// 7. SNN accuracies.
Outcome snn(const Options& o, const std::optional<Mnist>& data) {
    Outcome out;
    if (!data) {
        out.check(false, "MNIST not available (set MMSYN_MNIST_DIR)");
        return out;
    }
    // 6,000-image variant: one pass over 6,000 training images, evaluated once.
    std::vector<double> acc;
    for (const int n : {1, 7, 13}) {
        double sum = 0.0;
        for (std::uint64_t seed = 1; seed <= 3; ++seed)
            sum += snn_run(*data, WeightMode::Pcm, Architecture::NonDifferential, n, 1, 6000, 3000, 1000, 6000, seed)
                       .final_accuracy;
        acc.push_back(sum / 3.0);
    }
    out.check(increasing(acc), fmt("6000-image PCM N=1,7,13 (3 seeds): %.3f %.3f %.3f", acc[0], acc[1], acc[2]));
    if (!o.long_runs) {
        out.notes.push_back("full 3-epoch runs need --long");
        return out;
    }
    // Five evaluations over the last 20,000 images.
    const auto full = [&](WeightMode m, Architecture a, int n) {
        return 100.0 * snn_run(*data, m, a, n, 3, 0, 0, 0, 4000, 1).final_accuracy;
    };
    const double fl = full(WeightMode::Float64, Architecture::NonDifferential, 1);
    out.check(std::abs(fl - 77.2) <= 3.0, fmt("float64 %.2f%%", fl));
    const double p13 = full(WeightMode::Pcm, Architecture::NonDifferential, 13);
    out.check(p13 > 70.0, fmt("PCM N=13 %.2f%%", p13));
    const double d2 = full(WeightMode::Pcm, Architecture::Differential, 2);
    out.check(d2 <= 25.0, fmt("PCM differential N=2 %.2f%%", d2));
    return out;
}

// 8. Oracle suites.
Outcome oracles(const Options&) {
    Outcome out;

    // Back-propagation against central finite differences.
    Mlp net({4, 3, 2});
    RngStream rng(3, 0);
    for (int l = 0; l < net.layer_count(); ++l)
        for (auto& w : net.weights(l)) w = rng.uniform(-1.0, 1.0);
    const std::vector<double> x{0.1, 0.9, -0.4, 0.6};
    const std::vector<double> t{0.0, 1.0};
    net.forward(x);
    net.backward(t);
    const auto deltas = net.weight_deltas(1.0);
    double err2 = 0.0, norm2 = 0.0;
    for (int l = 0; l < net.layer_count(); ++l)
        for (std::size_t k = 0; k < net.weights(l).size(); ++k) {
            double& w = net.weights(l)[k];
            const double w0 = w, h = 1e-5;
            w = w0 + h;
            net.forward(x);
            const double up = net.loss(t);
            w = w0 - h;
            net.forward(x);
            const double down = net.loss(t);
            w = w0;
            const double fd = (up - down) / (2 * h);
            err2 += (fd + deltas[l][k]) * (fd + deltas[l][k]);
            norm2 += deltas[l][k] * deltas[l][k];
        }
    const double rel = std::sqrt(err2 / norm2);
    out.check(rel < 1e-6, fmt("gradient relative error %.2e", rel));

    // apply_update against an ideal quantizer on a noise-free device.
    const double eps = 0.05;
    SynapseSpec spec;
    spec.architecture = Architecture::Differential;
    spec.devices = 4;
    spec.map = {0.0, 0.0, 10.0, eps / 0.5 * 10.0};
    SynapseArray array(1, spec, DeviceModel(LinearModel{0.5, 0.0, 1e9}), 1);
    ArbitrationState arb = ArbitrationState::make(2);
    double ideal = 0.0, worst = 0.0;
    for (int k = 0; k < 2000; ++k) {
        const double dw = rng.uniform(-0.2, 0.2);
        apply_update(array, 0, arb, dw, UpdateRules{eps, 0.0}, 0.0);
        const double q = std::abs(dw) / eps;
        ideal += std::copysign(eps * (std::floor(q) + (q - std::floor(q) >= 0.5 ? 1.0 : 0.0)), dw);
        worst = std::max(worst, std::abs(array.weight(0) - ideal));
    }
    out.check(worst < 1e-9, fmt("quantizer max deviation %.1e", worst));

    // Stream generator statistics over 1e5 steps.
    StreamConfig sc;
    sc.n_streams = 6;
    sc.n_correlated = 3;
    const auto s = generate_streams(sc, 100000, 5);
    double worst_rate = 0.0;
    for (const auto& row : s)
        worst_rate = std::max(worst_rate, std::abs(std::count(row.begin(), row.end(), 1) / 1e5 - 0.1));
    auto pearson = [](const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
        double sa = 0, sb = 0, sab = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            sa += a[i];
            sb += b[i];
            sab += a[i] * b[i];
        }
        const double n = static_cast<double>(a.size()), ma = sa / n, mb = sb / n;
        return (sab / n - ma * mb) / std::sqrt(ma * (1 - ma) * mb * (1 - mb));
    };
    const double c01 = pearson(s[0], s[1]), c12 = pearson(s[1], s[2]), c03 = pearson(s[0], s[3]);
    out.check(worst_rate <= 0.005, fmt("rate max deviation %.4f", worst_rate));
    out.check(std::abs(c01 - sc.c) <= 0.05 && std::abs(c12 - sc.c) <= 0.05,
              fmt("correlated pairs %.3f %.3f", c01, c12));
    out.check(std::abs(c03) <= 0.05, fmt("mixed pair %.3f", c03));
    return out;
}

// 9. Replaying a run record reproduces its CSVs byte for byte.
Outcome determinism(const Options& o, const std::optional<Mnist>&) {
    Outcome out;
    const fs::path root = fs::temp_directory_path() / "mmsyn_acceptance_replay";
    fs::remove_all(root);
    std::vector<ExperimentConfig> configs;
    ExperimentConfig c;
    c.kind = ExperimentKind::Characterize;
    c.characterize.devices = 1000;
    configs.push_back(c);
    c = {};
    c.kind = ExperimentKind::Calibrate;
    c.calibrate.options.n_devices = 1000;
    configs.push_back(c);
    c = {};
    c.kind = ExperimentKind::Scaling;
    configs.push_back(c);
    c = {};
    c.kind = ExperimentKind::DetectCorrelation;
    c.devices = 3;
    c.steps = 1000;
    c.correlation.threads = o.threads;
    configs.push_back(c);
    std::string dir = o.mnist_dir;
    if (dir.empty() && std::getenv(kMnistDirEnv)) dir = std::getenv(kMnistDirEnv);
    if (!dir.empty()) {
        c = {};
        c.kind = ExperimentKind::TrainAnn;
        c.dataset_dir = dir;
        c.devices = 4;
        c.architecture = Architecture::Differential;
        c.epochs = 1;
        c.ann.train_limit = 500;
        c.ann.test_limit = 200;
        c.ann.eval_every = 250;
        configs.push_back(c);
        c = {};
        c.kind = ExperimentKind::TrainSnn;
        c.dataset_dir = dir;
        c.devices = 3;
        c.epochs = 1;
        c.snn.train_limit = 200;
        c.snn.assign_limit = 100;
        c.snn.test_limit = 100;
        c.snn.eval_every = 100;
        configs.push_back(c);
    } else {
        out.check(false, "MNIST not available: train-ann/train-snn not replayed");
    }
    for (auto& cfg : configs) {
        const std::string name = to_string(cfg.kind);
        cfg.output_dir = (root / name).string();
        try {
            run_and_write(cfg);
            const ReplayResult r = replay(root / name / "record.json", root / (name + ".replay"));
            out.check(r.mismatched.empty(), name + (r.mismatched.empty() ? " identical" : " differs"));
        } catch (const std::exception& e) {
            out.check(false, name + ": " + e.what());
        }
    }
    fs::remove_all(root);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    Options o;
    std::vector<int> only;
    app.add_flag("--long", o.long_runs, "run the full-length ANN/SNN experiments");
    app.add_flag("--strict", o.strict, "exit non-zero if any criterion fails");
    app.add_option("--mnist", o.mnist_dir, "MNIST directory (default $MMSYN_MNIST_DIR)");
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_option("--threads", o.threads, "threads for the correlation runs");
    CLI11_PARSE(app, argc, argv);
    if (const char* env = std::getenv("MMSYN_LONG_TESTS"); env && std::string(env) == "1") o.long_runs = true;
    if (o.threads == 0) o.threads = 1;
    if (!app.count("--threads")) o.threads = std::max(1u, std::thread::hardware_concurrency());
    o.only.insert(only.begin(), only.end());

    std::optional<Mnist> data;
    const bool needs_data = o.only.empty() || o.only.count(6) || o.only.count(7);
    if (needs_data) data = load_dataset(o);

    const std::vector<std::pair<int, std::pair<const char*, std::function<Outcome()>>>> criteria{
        {1, {"N-scaling of mean and variance", [&] { return scaling(o); }}},
        {2, {"sqrt(N) update resolution", [&] { return resolution(o); }}},
        {3, {"selection counter coverage", [&] { return coverage(o); }}},
        {4, {"correlation detection, 1,000 synapses", [&] { return correlation_small(o); }}},
        {5, {"correlation detection, 144,000 synapses", [&] { return correlation_large(o); }}},
        {6, {"ANN on MNIST", [&] { return ann(o, data); }}},
        {7, {"SNN on MNIST", [&] { return snn(o, data); }}},
        {8, {"oracle suites", [&] { return oracles(o); }}},
        {9, {"replay determinism", [&] { return determinism(o, data); }}},
    };

    int failed = 0, evaluated = 0;
    for (const auto& [id, entry] : criteria) {
        if (!o.only.empty() && !o.only.count(id)) continue;
        const auto& [name, fn] = entry;
        Clock clock;
        Outcome r;
        try {
            r = fn();
        } catch (const std::exception& e) {
            r.check(false, std::string("error: ") + e.what());
        }
        std::string detail;
        for (const auto& n : r.notes) detail += (detail.empty() ? "" : "; ") + n;
        std::printf("%s %d %s: %s [%.1f s]\n", r.pass ? "PASS" : "FAIL", id, name, detail.c_str(), clock.seconds());
        std::fflush(stdout);
        if (!r.pass) ++failed;
        ++evaluated;
    }
    std::printf("%d of %d criteria passed\n", evaluated - failed, evaluated);
    return o.strict && failed > 0 ? 1 : 0;
}
