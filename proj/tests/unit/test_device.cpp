#include <doctest.h>

#include <cmath>

#include "mmsyn/device.hpp"
#include "mmsyn/error.hpp"

using namespace mmsyn;

namespace {

PcmModel flat_model(double mu, double sigma) {
    PcmModel m;
    m.mu_knots = {{0.0, mu}, {10.0, 0.0}};
    m.sigma_knots = {{0.0, sigma}, {10.0, sigma}};
    return m;
}

}  // namespace

TEST_CASE("interpolate: knots, midpoints and clamping") {
    const std::vector<Knot> k{{0.0, 1.0}, {2.0, 3.0}, {10.0, 0.0}};
    CHECK(interpolate(k, 2.0) == 3.0);
    CHECK(interpolate(k, 1.0) == doctest::Approx(2.0));
    CHECK(interpolate(k, 6.0) == doctest::Approx(1.5));
    CHECK(interpolate(k, 11.0) == interpolate(k, 10.0));
    CHECK(interpolate(k, -1.0) == 1.0);
}

TEST_CASE("model validation") {
    PcmModel m = flat_model(1.0, 0.0);
    CHECK_NOTHROW(m.validate());
    m.mu_knots = {{0.0, 1.0}, {0.0, 2.0}, {10.0, 0.0}};
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = flat_model(1.0, 0.0);
    m.sigma_knots = {{0.0, -0.1}, {10.0, 0.0}};
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m = flat_model(1.0, 0.0);
    m.mu_knots.clear();
    CHECK_THROWS_AS(m.validate(), ConfigError);
    CHECK_NOTHROW(PcmModel::default_model().validate());
    CHECK_THROWS_AS(LinearModel({0.0, 0.5, 10.0}).validate(), ConfigError);
}

TEST_CASE("potentiate: deterministic limit and saturation") {
    const PcmModel m = flat_model(1.0, 0.0);
    RngStream rng(1, 0);
    CHECK(potentiate(DeviceState{0.0, 0.0, 0.0}, m, rng).conductance == 1.0);
    const DeviceState top = potentiate(DeviceState{10.0, 0.0, 0.0}, m, rng);
    CHECK(top.conductance == 10.0);
    CHECK(potentiate(DeviceState{9.95, 0.0, 0.0}, flat_model(1.0, 0.0), rng).conductance <= 10.0);
}

TEST_CASE("potentiate: sample mean matches mu(g)") {
    const PcmModel m = PcmModel::default_model();
    const double g = 5.0;
    const Response r = m.response(g);
    RngStream rng(7, 0);
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) sum += potentiate(DeviceState{g, 0.0, 0.0}, m, rng).conductance - g;
    CHECK(std::abs(sum / n - r.mu) <= 3.0 * r.sigma / 100.0);
}

TEST_CASE("potentiate consumes exactly one draw") {
    RngStream rng(3, 0);
    potentiate(DeviceState{1.0, 0.0, 0.0}, PcmModel::default_model(), rng);
    CHECK(rng.position() == 1);
}

TEST_CASE("depress is abrupt and idempotent") {
    CHECK(depress(DeviceState{7.3, 0.0, 0.0}).conductance == 0.0);
    CHECK(depress(DeviceState{0.0, 0.0, 0.0}).conductance == 0.0);
    RngStream rng(1, 0);
    const DeviceState d = potentiate(depress(DeviceState{7.3, 0.0, 0.0}), flat_model(1.0, 0.0), rng);
    CHECK(d.conductance == 1.0);
}

TEST_CASE("read: drift and noise") {
    PcmModel m = flat_model(1.0, 0.0);
    RngStream rng(1, 0);
    CHECK(read(DeviceState{4.0, 0.0, 0.0}, m, 1e6, rng) == 4.0);

    m.drift_enabled = true;
    const double g = read(DeviceState{10.0, 0.0, 0.05}, m, 99.0 * kDriftReferenceTime, rng);
    CHECK(g == doctest::Approx(10.0 * std::pow(100.0, -0.05)));
    CHECK(g == doctest::Approx(7.943).epsilon(1e-3));

    CHECK(read(DeviceState{3.0, 1.0, 0.05}, m, 5.0, rng) == read(DeviceState{3.0, 1.0, 0.05}, m, 5.0, rng));
    CHECK_THROWS_AS(read(DeviceState{3.0, 5.0, 0.0}, m, 4.0, rng), TimeOrderError);
}

TEST_CASE("linear model") {
    const LinearModel exact{0.5, 0.0, 10.0};
    RngStream rng(1, 0);
    DeviceState d{0.0, 0.0, 0.0};
    for (int p = 1; p <= 20; ++p) {
        d = potentiate_linear(d, exact, rng);
        CHECK(d.conductance == doctest::Approx(0.5 * p));
    }
    CHECK(potentiate_linear(d, exact, rng).conductance == 10.0);

    const LinearModel noisy{0.5, 0.5, 10.0};
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) sum += potentiate_linear(DeviceState{5.0, 0.0, 0.0}, noisy, rng).conductance - 5.0;
    CHECK(std::abs(sum / n - 0.5) <= 0.015);
}

TEST_CASE("characterize") {
    const DeviceModel model(PcmModel::default_model());
    const auto zero = characterize(model, 100, 0, 0.1, 1);
    REQUIRE(zero.size() == 1);
    CHECK(zero[0].mean == doctest::Approx(0.1));
    CHECK(zero[0].std < 1e-12);

    const auto det = characterize(DeviceModel(flat_model(1.0, 0.0)), 50, 10, 0.0, 1);
    for (const auto& r : det) CHECK(r.std < 1e-12);

    const auto rows = characterize(model, 2000, 20, 0.1, 1);
    REQUIRE(rows.size() == 21);
    for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k].mean >= rows[k - 1].mean - 1e-12);
    CHECK(rows.back().mean < model.g_max());
    CHECK(rows.back().mean - rows[19].mean < rows[1].mean - rows[0].mean);
    CHECK_THROWS_AS(characterize(model, 0, 1, 0.1, 1), InputError);
}
