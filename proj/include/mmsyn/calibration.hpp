#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmsyn/device.hpp"

namespace mmsyn {

struct CalibrationOptions {
    int knot_count = 11;
    double g_max = 10.0;
    std::size_t n_devices = 4000;
    std::uint64_t seed = 20180625;
    int max_iterations = 40;
    // Accepted RMS mismatch of the simulated mean trajectory, relative to the
    // largest target mean.
    double tolerance = 0.05;
    // Used for every sigma knot when the target has no std column.
    double default_sigma = 0.5;
    // Weight of the curvature penalty on the knot tables.
    double smoothing = 1.0;
};

struct CalibrationResult {
    PcmModel model;
    double mean_rms = 0.0;  // relative, see CalibrationOptions::tolerance
    double std_rms = 0.0;   // same normalization, 0 if no std column was fitted
    int iterations = 0;
};

/// Mean-conductance-vs-pulse trajectory of a fresh device population
/// (starts near 0.1 uS, ~1 uS steps early on, saturating close to 10 uS
/// after 20 pulses). This is the target the default PCM table is fitted to.
std::vector<TrajectoryRow> default_target_trajectory();

/// Least-squares fit of mu (and sigma, when the target carries a non-zero
/// std column) knot ordinates on an equispaced conductance grid so that the
/// simulated trajectory of `characterize` reproduces `target`.
/// Throws CalibrationError (with the residual) when the best fit misses the
/// tolerance, InputError when the target has fewer than two rows.
CalibrationResult calibrate(std::span<const TrajectoryRow> target, const CalibrationOptions& options = {});

}  // namespace mmsyn
