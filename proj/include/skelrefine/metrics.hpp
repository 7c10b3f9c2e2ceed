#pragma once

#include "skelrefine/skeleton.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace skelrefine::metrics {

inline constexpr int kHistogramBins = 10;
inline constexpr double kHistogramBinWidth = 0.03;  // last bin is [0.27, inf)

/// Mean Euclidean joint distance over all frames and joints (meters).
double ape(const SkeletonSequence& pred, const SkeletonSequence& truth);

/// Backward third difference z_t - 3z_{t-1} + 3z_{t-2} - z_{t-3} for t >= 3 (m/frame^3).
std::vector<PoseVector> jerk(const SkeletonSequence& seq);

/// Jerk scaled by frame_rate^3 (m/s^3); reporting only.
std::vector<PoseVector> physical_jerk(const SkeletonSequence& seq);

/// |jerk(pred) - jerk(truth)| per component and frame.
std::vector<PoseVector> jerk_error(const SkeletonSequence& pred, const SkeletonSequence& truth);

double aje(const SkeletonSequence& pred, const SkeletonSequence& truth);

using Histogram = std::array<double, kHistogramBins>;

int histogram_bin(double jerk_error);
double bin_lower(int bin);
double bin_upper(int bin);  // +inf for the last bin

/// Per-bin jerk-error sums divided by M = 48 x (frames with a defined jerk).
Histogram aje_histogram(const SkeletonSequence& pred, const SkeletonSequence& truth);

struct EvalReport {
    double ape = 0.0;
    double aje = 0.0;
    Histogram histogram{};
    std::size_t M = 0;            // jerk component-frames
    std::size_t frames = 0;       // frames counted by APE
    std::size_t jerk_frames = 0;  // frames with a defined jerk
};

/// Pools several (pred, truth) pairs; jerk never spans two sequences.
EvalReport evaluate(std::span<const SkeletonSequence> preds, std::span<const SkeletonSequence> truths);
EvalReport evaluate(const SkeletonSequence& pred, const SkeletonSequence& truth);

std::string report_json(const EvalReport& report);
void write_histogram_csv(std::ostream& os, const EvalReport& report);

}  // namespace skelrefine::metrics
