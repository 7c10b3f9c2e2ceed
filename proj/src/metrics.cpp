#include "skelrefine/metrics.hpp"

#include "skelrefine/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace skelrefine::metrics {

namespace {

void check_pair(const SkeletonSequence& pred, const SkeletonSequence& truth) {
    if (pred.size() != truth.size())
        throw DimensionError("sequence length mismatch: " + std::to_string(pred.size()) + " vs " +
                             std::to_string(truth.size()));
    if (pred.empty()) throw InsufficientFramesError(0, 1);
    if (pred.encoding() != Encoding::Absolute || truth.encoding() != Encoding::Absolute)
        throw EncodingError("metrics expect absolute sequences");
}

// Accumulates raw sums so that pooled reports divide once.
struct Sums {
    double distance = 0.0;
    std::size_t joints = 0;
    double je = 0.0;
    Histogram bins{};
    std::size_t jerk_frames = 0;
    std::size_t frames = 0;
};

void accumulate(const SkeletonSequence& pred, const SkeletonSequence& truth, Sums& s) {
    check_pair(pred, truth);
    for (std::size_t t = 0; t < pred.size(); ++t)
        for (int j = 0; j < kNumJoints; ++j)
            s.distance += (pred.frames[t].coords.segment<3>(3 * j) - truth.frames[t].coords.segment<3>(3 * j)).norm();
    s.joints += pred.size() * kNumJoints;
    s.frames += pred.size();
    if (pred.size() < 4) return;
    for (const auto& e : jerk_error(pred, truth)) {
        for (int k = 0; k < kPoseDim; ++k) {
            s.je += e(k);
            s.bins[static_cast<std::size_t>(histogram_bin(e(k)))] += e(k);
        }
        ++s.jerk_frames;
    }
}

}  // namespace

double ape(const SkeletonSequence& pred, const SkeletonSequence& truth) {
    Sums s;
    accumulate(pred, truth, s);
    return s.distance / static_cast<double>(s.joints);
}

std::vector<PoseVector> jerk(const SkeletonSequence& seq) {
    if (seq.size() < 4) throw InsufficientFramesError(seq.size(), 4);
    if (seq.encoding() != Encoding::Absolute) throw EncodingError("jerk expects an absolute sequence");
    std::vector<PoseVector> out;
    out.reserve(seq.size() - 3);
    const auto& f = seq.frames;
    for (std::size_t t = 3; t < seq.size(); ++t)
        out.push_back(f[t].coords - 3.0 * f[t - 1].coords + 3.0 * f[t - 2].coords - f[t - 3].coords);
    return out;
}

std::vector<PoseVector> physical_jerk(const SkeletonSequence& seq) {
    auto out = jerk(seq);
    const double scale = std::pow(seq.frame_rate_hz, 3);
    for (auto& j : out) j *= scale;
    return out;
}

std::vector<PoseVector> jerk_error(const SkeletonSequence& pred, const SkeletonSequence& truth) {
    check_pair(pred, truth);
    const auto jp = jerk(pred);
    const auto jt = jerk(truth);
    std::vector<PoseVector> out(jp.size());
    for (std::size_t t = 0; t < jp.size(); ++t) out[t] = (jp[t] - jt[t]).cwiseAbs();
    return out;
}

double aje(const SkeletonSequence& pred, const SkeletonSequence& truth) {
    return evaluate(pred, truth).aje;
}

int histogram_bin(double je) {
    int bin = 0;
    while (bin < kHistogramBins - 1 && je >= bin_lower(bin + 1)) ++bin;
    return bin;
}

// Computed as a single rounding of the decimal edge so that e.g. 0.09 lands in bin 3.
double bin_lower(int bin) { return static_cast<double>(3 * bin) / 100.0; }

double bin_upper(int bin) {
    return bin == kHistogramBins - 1 ? std::numeric_limits<double>::infinity() : bin_lower(bin + 1);
}

Histogram aje_histogram(const SkeletonSequence& pred, const SkeletonSequence& truth) {
    return evaluate(pred, truth).histogram;
}

EvalReport evaluate(std::span<const SkeletonSequence> preds, std::span<const SkeletonSequence> truths) {
    if (preds.size() != truths.size()) throw DimensionError("unequal numbers of predicted and truth sequences");
    if (preds.empty()) throw DataError("nothing to evaluate");
    Sums s;
    for (std::size_t i = 0; i < preds.size(); ++i) accumulate(preds[i], truths[i], s);
    if (s.jerk_frames == 0) throw InsufficientFramesError(s.frames, 4);
    EvalReport r;
    r.frames = s.frames;
    r.jerk_frames = s.jerk_frames;
    r.M = kPoseDim * s.jerk_frames;
    const double m = static_cast<double>(r.M);
    r.ape = s.distance / static_cast<double>(s.joints);
    r.aje = s.je / m;
    for (int b = 0; b < kHistogramBins; ++b) r.histogram[b] = s.bins[b] / m;
    return r;
}

EvalReport evaluate(const SkeletonSequence& pred, const SkeletonSequence& truth) {
    return evaluate(std::span<const SkeletonSequence>(&pred, 1), std::span<const SkeletonSequence>(&truth, 1));
}

std::string report_json(const EvalReport& r) {
    nlohmann::json j;
    j["ape"] = r.ape;
    j["aje"] = r.aje;
    j["histogram"] = r.histogram;
    j["M"] = r.M;
    j["frames"] = r.frames;
    j["jerk_frames"] = r.jerk_frames;
    return j.dump();
}

void write_histogram_csv(std::ostream& os, const EvalReport& r) {
    os << "bin_lower,bin_upper,value\n" << std::setprecision(17);
    for (int b = 0; b < kHistogramBins; ++b) {
        os << bin_lower(b) << ',';
        if (b == kHistogramBins - 1)
            os << "inf";
        else
            os << bin_upper(b);
        os << ',' << r.histogram[b] << '\n';
    }
}

}  // namespace skelrefine::metrics
