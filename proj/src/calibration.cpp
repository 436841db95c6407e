#include "mmsyn/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mmsyn/error.hpp"

namespace mmsyn {

std::vector<TrajectoryRow> default_target_trajectory() {
    // pulse, mean uS, std uS
    return {
        {0, 0.10, 0.00},  {1, 1.35, 0.76},  {2, 2.43, 0.99},  {3, 3.38, 1.12},  {4, 4.20, 1.18},
        {5, 4.93, 1.21},  {6, 5.56, 1.22},  {7, 6.11, 1.22},  {8, 6.60, 1.20},  {9, 7.03, 1.18},
        {10, 7.40, 1.16}, {11, 7.72, 1.12}, {12, 8.00, 1.09}, {13, 8.24, 1.05}, {14, 8.45, 1.01},
        {15, 8.62, 0.97}, {16, 8.77, 0.92}, {17, 8.89, 0.88}, {18, 9.00, 0.84}, {19, 9.08, 0.80},
        {20, 9.15, 0.77},
    };
}

namespace {

// Fits knot ordinates c on the grid so that sum_i hat_i(x_k) c_i ~ y_k, with
// a second-difference penalty that keeps the table smooth and extends it
// linearly into knots the data never reaches.
Eigen::VectorXd fit_hat_basis(const std::vector<double>& grid, const std::vector<double>& x,
                              const std::vector<double>& y, double smoothing) {
    const int k = static_cast<int>(grid.size());
    const int n = static_cast<int>(x.size());
    const int penalties = std::max(k - 2, 0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + penalties, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + penalties);
    const double h = grid[1] - grid[0];
    for (int r = 0; r < n; ++r) {
        const double pos = std::clamp((x[r] - grid[0]) / h, 0.0, static_cast<double>(k - 1));
        const int lo = std::min(static_cast<int>(pos), k - 2);
        const double t = pos - lo;
        a(r, lo) = 1.0 - t;
        a(r, lo + 1) = t;
        b(r) = y[r];
    }
    const double w = std::sqrt(smoothing);
    for (int i = 0; i < penalties; ++i) {
        a(n + i, i) = w;
        a(n + i, i + 1) = -2.0 * w;
        a(n + i, i + 2) = w;
    }
    return a.colPivHouseholderQr().solve(b);
}

}  // namespace

CalibrationResult calibrate(std::span<const TrajectoryRow> target, const CalibrationOptions& options) {
    if (target.size() < 2) throw InputError("calibrate: target trajectory needs at least two rows");
    if (options.knot_count < 2) throw InputError("calibrate: knot_count must be >= 2");

    const int pulses = static_cast<int>(target.size()) - 1;
    const bool fit_sigma = std::any_of(target.begin(), target.end(), [](const auto& r) { return r.std > 0.0; });

    std::vector<double> grid(options.knot_count);
    for (int i = 0; i < options.knot_count; ++i)
        grid[i] = options.g_max * static_cast<double>(i) / static_cast<double>(options.knot_count - 1);

    double scale = 0.0;
    for (const auto& r : target) scale = std::max(scale, std::abs(r.mean));
    if (!(scale > 0.0)) throw InputError("calibrate: target trajectory is identically zero");

    std::vector<double> x(pulses), y_mu(pulses), y_var(pulses);
    for (int k = 0; k < pulses; ++k) {
        x[k] = target[k].mean;
        y_mu[k] = target[k + 1].mean - target[k].mean;
        y_var[k] = std::max(0.0, target[k + 1].std * target[k + 1].std - target[k].std * target[k].std);
    }

    auto build = [&]() {
        PcmModel m;
        m.g_max = options.g_max;
        const Eigen::VectorXd mu = fit_hat_basis(grid, x, y_mu, options.smoothing);
        Eigen::VectorXd var;
        if (fit_sigma) var = fit_hat_basis(grid, x, y_var, options.smoothing);
        for (int i = 0; i < options.knot_count; ++i) {
            m.mu_knots.push_back({grid[i], std::max(0.0, mu(i))});
            const double s = fit_sigma ? std::sqrt(std::max(0.0, var(i))) : options.default_sigma;
            m.sigma_knots.push_back({grid[i], s});
        }
        return m;
    };

    CalibrationResult best;
    best.mean_rms = std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        PcmModel model = build();
        const auto sim = characterize(DeviceModel(model), options.n_devices, pulses, target[0].mean, options.seed);

        double se_mean = 0.0, se_std = 0.0;
        for (int k = 0; k <= pulses; ++k) {
            se_mean += std::pow(sim[k].mean - target[k].mean, 2);
            se_std += std::pow(sim[k].std - target[k].std, 2);
        }
        const double mean_rms = std::sqrt(se_mean / (pulses + 1)) / scale;
        const double std_rms = fit_sigma ? std::sqrt(se_std / (pulses + 1)) / scale : 0.0;
        if (mean_rms + std_rms < best.mean_rms + best.std_rms) {
            best = {std::move(model), mean_rms, std_rms, iter};
        }

        // Fixed-point correction: shift each per-step regression target by the
        // mismatch between target and simulated increments.
        for (int k = 0; k < pulses; ++k) {
            y_mu[k] += (target[k + 1].mean - target[k].mean) - (sim[k + 1].mean - sim[k].mean);
            if (fit_sigma) {
                const double t_inc = target[k + 1].std * target[k + 1].std - target[k].std * target[k].std;
                const double s_inc = sim[k + 1].std * sim[k + 1].std - sim[k].std * sim[k].std;
                y_var[k] = std::max(0.0, y_var[k] + t_inc - s_inc);
            }
        }
    }

    if (best.mean_rms > options.tolerance) {
        throw CalibrationError("calibrate: best fit leaves a relative RMS residual of " +
                                   std::to_string(best.mean_rms) + " (tolerance " +
                                   std::to_string(options.tolerance) + ")",
                               best.mean_rms);
    }
    best.model.version = "calibrated";
    return best;
}

}  // namespace mmsyn
