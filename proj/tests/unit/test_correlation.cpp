#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mmsyn/correlation.hpp"
#include "mmsyn/error.hpp"

using namespace mmsyn;

namespace {

double pearson(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    const double n = static_cast<double>(a.size());
    double sa = 0, sb = 0, sab = 0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        sa += a[t];
        sb += b[t];
        sab += a[t] * b[t];
    }
    const double ma = sa / n, mb = sb / n;
    return (sab / n - ma * mb) / std::sqrt(ma * (1 - ma) * mb * (1 - mb));
}

double rate(const std::vector<std::uint8_t>& a) {
    return static_cast<double>(std::count(a.begin(), a.end(), 1)) / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("c = 1 copies the shared process into every correlated stream") {
    StreamConfig sc;
    sc.n_streams = 20;
    sc.n_correlated = 5;
    sc.c = 1.0;
    const StreamGenerator gen(sc, 3);
    for (std::uint64_t t = 0; t < 2000; ++t) {
        const bool b = gen.common_event(t);
        for (std::size_t i = 0; i < 5; ++i) CHECK(gen.spike(i, t, b) == b);
    }
}

TEST_CASE("stream marginal rate and pairwise correlation") {
    for (const double c : {0.0, 0.3, 0.75, 1.0}) {
        StreamConfig sc;
        sc.n_streams = 8;
        sc.n_correlated = 4;
        sc.c = c;
        const auto s = generate_streams(sc, 100000, 17);
        for (const auto& row : s) CHECK(std::abs(rate(row) - 0.1) <= 0.005);
        CHECK(std::abs(pearson(s[0], s[1]) - c) <= 0.05);
        CHECK(std::abs(pearson(s[2], s[3]) - c) <= 0.05);
        CHECK(std::abs(pearson(s[0], s[5])) <= 0.05);
        CHECK(std::abs(pearson(s[4], s[6])) <= 0.05);
    }
    StreamConfig bad;
    bad.c = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("threshold neuron") {
    CHECK_FALSE(neuron_fires(0.0, 52.0));
    CHECK(neuron_fires(100 * 0.6, 52.0));
    CHECK_FALSE(neuron_fires(52.0, 52.0));
}

TEST_CASE("exponential STDP") {
    const ExpStdp rule;
    CHECK(rule.potentiation(0) == doctest::Approx(0.002));
    CHECK(rule.potentiation(3) == doctest::Approx(0.002 * std::exp(-1.0)));
    CHECK(rule.potentiation(3) == doctest::Approx(7.36e-4).epsilon(1e-3));
    CHECK(stdp_action(rule.potentiation(3), rule.program_threshold) == StdpAction::None);
    CHECK(stdp_action(rule.potentiation(0), rule.program_threshold) == StdpAction::Potentiate);
    CHECK(stdp_action(-0.0005, rule.program_threshold) == StdpAction::None);
    CHECK(stdp_action(-0.001, rule.program_threshold) == StdpAction::Depress);
    CHECK(rule.depression(1) == doctest::Approx(-0.004 * std::exp(-1.0 / 3.0)));

    const StdpTables tables(rule);
    CHECK(tables.potentiation(0) == 0.0);
    CHECK(tables.potentiation(0b1) == doctest::Approx(0.002));
    CHECK(tables.potentiation(0b1001) == doctest::Approx(0.002 + rule.potentiation(3)));
    CHECK(tables.depression(0b1) == 0.0);  // same-step pairs potentiate
    CHECK(tables.depression(0b110) == doctest::Approx(rule.depression(1) + rule.depression(2)));
    // Bits beyond the 10-step horizon are ignored.
    CHECK(tables.potentiation(0b100000000000 | 1) == doctest::Approx(0.002));
}

TEST_CASE("classify_weights") {
    const std::vector<double> sep{0.1, 0.2, 0.9, 0.8, 0.15};
    const std::vector<std::uint8_t> lab{0, 0, 1, 1, 0};
    const Classification c = classify_weights(sep, lab);
    CHECK(c.misclassified == 0);
    CHECK(c.threshold > 0.2);
    CHECK(c.threshold < 0.8);

    const std::vector<double> flat(10, 0.5);
    const std::vector<std::uint8_t> three{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    CHECK(classify_weights(flat, three).misclassified == 3);

    // Brute force over every candidate threshold.
    RngStream rng(9, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> w(200);
        std::vector<std::uint8_t> l(200);
        for (auto& x : w) x = std::round(rng.uniform() * 50.0) / 50.0;
        for (auto& x : l) x = rng.uniform() < 0.3 ? 1 : 0;
        std::vector<double> cands{-1.0, 2.0};
        for (const double x : w) cands.push_back(x + 1e-9);
        std::size_t best = w.size();
        for (const double th : cands) {
            std::size_t e = 0;
            for (std::size_t i = 0; i < w.size(); ++i) e += (w[i] > th) != (l[i] == 1);
            best = std::min(best, e);
        }
        const Classification r = classify_weights(w, l);
        CHECK(r.misclassified == best);
        std::size_t e = 0;
        for (std::size_t i = 0; i < w.size(); ++i) e += (w[i] > r.threshold) != (l[i] == 1);
        CHECK(e == r.misclassified);
    }
    CHECK_THROWS_AS(classify_weights(sep, std::vector<std::uint8_t>{1}), InputError);
}

TEST_CASE("results do not depend on the thread count") {
    CorrelationConfig c;
    c.streams.n_streams = 10000;
    c.streams.n_correlated = 1000;
    c.devices = 3;
    c.steps = 150;
    c.neuron_threshold = 520.0;
    c.trace_every = 50;
    const CorrelationResult one = run_correlation(c);
    c.threads = 3;
    const CorrelationResult three = run_correlation(c);
    CHECK(one.weights == three.weights);
    CHECK(one.output_spikes == three.output_spikes);
    CHECK(one.output_spikes > 0);
    CHECK(one.trace.size() == 4);
}

TEST_CASE("uncorrelated input gives no separation") {
    CorrelationConfig c;
    c.streams.c = 0.0;
    c.devices = 3;
    c.steps = 1500;
    const CorrelationResult r = run_correlation(c);
    CHECK(r.classification.misclassified >= 70);

    c.mode = WeightMode::Float64;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}
