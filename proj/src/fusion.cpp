#include "skelrefine/fusion.hpp"

#include "skelrefine/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace skelrefine::fusion {

namespace {

PoseVector sample_variance(const std::vector<PoseVector>& r) {
    PoseVector mean = PoseVector::Zero();
    for (const auto& v : r) mean += v;
    mean /= static_cast<double>(r.size());
    PoseVector var = PoseVector::Zero();
    for (const auto& v : r) var += (v - mean).cwiseAbs2();
    return var / static_cast<double>(r.size() - 1);
}

}  // namespace

double GateModel::tail_probability(double deviation, double sigma2) {
    return std::erfc(std::abs(deviation) / std::sqrt(2.0 * sigma2));
}

bool GateModel::passes(int component, double deviation) const {
    if (theta <= 0.0) return true;
    return tail_probability(deviation, sigma2(component)) > theta;
}

void GateModel::validate() const {
    if (!(sigma2.array() > 0.0).all() || !sigma2.allFinite()) throw ConfigError("gate variances must be positive");
    if (!(theta >= 0.0 && theta < 1.0)) throw ConfigError("gate threshold must lie in [0, 1)");
}

GateModel estimate_gate(const std::vector<VelocityVector>& residuals, double theta, std::vector<int>* floored) {
    if (residuals.size() < 2) throw InsufficientFramesError(residuals.size(), 2);
    GateModel gate;
    gate.theta = theta;
    gate.sigma2.setZero();
    for (const auto& r : residuals) gate.sigma2 += r.cwiseAbs2();
    gate.sigma2 /= static_cast<double>(residuals.size());
    for (int j = 0; j < kPoseDim; ++j) {
        if (!(gate.sigma2(j) >= kVarianceFloor)) {
            gate.sigma2(j) = kVarianceFloor;
            if (floored) floored->push_back(j);
        }
    }
    gate.validate();
    return gate;
}

NeighborStore::NeighborStore(Eigen::MatrixXd keys, Eigen::MatrixXd targets, int k)
    : keys_(std::move(keys)), targets_(std::move(targets)), k_(k) {
    if (keys_.cols() == 0) throw DataError("neighbor store is empty");
    if (keys_.rows() != kPoseDim || targets_.rows() != kPoseDim)
        throw DimensionError("neighbor store keys and targets must be 48-dimensional");
    if (keys_.cols() != targets_.cols()) throw DimensionError("neighbor store has unequal key and target counts");
    if (k_ < 1) throw ConfigError("neighbor count K must be at least 1");
}

std::vector<int> NeighborStore::nearest(const PoseVector& query) const {
    const int n = static_cast<int>(keys_.cols());
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double* key = keys_.col(i).data();
        double d = 0.0;
        for (int j = 0; j < kPoseDim; ++j) {
            const double e = key[j] - query(j);
            d += e * e;
        }
        dist[static_cast<std::size_t>(i)] = d;
    }
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    auto closer = [&dist](int a, int b) {
        const double da = dist[static_cast<std::size_t>(a)];
        const double db = dist[static_cast<std::size_t>(b)];
        return da < db || (da == db && a < b);
    };
    const auto k = static_cast<std::size_t>(std::min(k_, n));
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), closer);
    idx.resize(k);
    return idx;
}

SoftKnnResult soft_knn(const NeighborStore& store, const GateModel& gate, const PoseVector& query,
                       const VelocityVector& velocity, const PoseVector& anchor) {
    const auto nn = store.nearest(query);
    const auto& keys = store.keys();
    const auto& targets = store.targets();
    SoftKnnResult out;
    for (int j = 0; j < kPoseDim; ++j) {
        double kept_sum = 0.0;
        double all_sum = 0.0;
        int kept = 0;
        for (int i : nn) {
            const double target = targets(j, i);
            all_sum += target;
            const double candidate_velocity = keys(j, i) - anchor(j);
            if (gate.passes(j, std::abs(candidate_velocity - velocity(j)))) {
                kept_sum += target;
                ++kept;
            }
        }
        out.retained(j) = kept;
        out.pose(j) = kept > 0 ? kept_sum / kept : all_sum / static_cast<double>(nn.size());
    }
    return out;
}

PoseVector sknn_step(const NeighborStore& store, const GateModel& gate, const PoseVector& refined_pose,
                     const VelocityVector& refined_velocity, const PoseVector& previous_fused) {
    return soft_knn(store, gate, refined_pose, refined_velocity, previous_fused).pose;
}

PoseVector sknnkf_step(const NeighborStore& store_plus, const GateModel& gate_plus, const PoseVector& kalman_state,
                       const VelocityVector& refined_velocity_plus, const PoseVector& previous_fused) {
    return soft_knn(store_plus, gate_plus, kalman_state, refined_velocity_plus, previous_fused).pose;
}

KalmanState KalmanState::initial(const PoseVector& first_measurement, const PoseVector& Q, const PoseVector& R) {
    if ((Q.array() < 0.0).any() || (R.array() < 0.0).any())
        throw ConfigError("Kalman noise variances must be non-negative");
    KalmanState s;
    s.x = first_measurement;
    s.P = R;
    s.Q = Q;
    s.R = R;
    return s;
}

KalmanStepResult kalman_step(const KalmanState& state, const VelocityVector& control, const PoseVector& measurement) {
    KalmanStepResult out;
    out.state = state;
    const PoseVector x_prior = state.x + control;
    out.prior_variance = state.P + state.Q;
    for (int j = 0; j < kPoseDim; ++j) {
        const double s = out.prior_variance(j) + state.R(j);
        if (!(s > 0.0)) throw NumericalError("Kalman innovation variance is zero in component " + std::to_string(j));
        const double k = out.prior_variance(j) / s;
        out.gain(j) = k;
        out.state.x(j) = x_prior(j) + k * (measurement(j) - x_prior(j));
        out.state.P(j) = (1.0 - k) * out.prior_variance(j);
    }
    out.pose = out.state.x;
    return out;
}

NoiseCovariances estimate_noise_covariances(const std::vector<PoseVector>& position_residuals,
                                            const std::vector<VelocityVector>& velocity_residuals) {
    if (position_residuals.size() < 2) throw InsufficientFramesError(position_residuals.size(), 2);
    if (velocity_residuals.size() < 2) throw InsufficientFramesError(velocity_residuals.size(), 2);
    NoiseCovariances n;
    n.R = sample_variance(position_residuals).cwiseMax(kVarianceFloor);
    n.Q = sample_variance(velocity_residuals).cwiseMax(kVarianceFloor);
    return n;
}

std::vector<PoseVector> kalman_filter(const std::vector<PoseVector>& measurements,
                                      const std::vector<VelocityVector>& controls, const NoiseCovariances& noise) {
    if (measurements.empty()) throw InsufficientFramesError(0, 1);
    if (controls.size() + 1 != measurements.size())
        throw DimensionError("Kalman filter needs one control per frame after the first");
    std::vector<PoseVector> out;
    out.reserve(measurements.size());
    auto state = KalmanState::initial(measurements.front(), noise.Q, noise.R);
    out.push_back(state.x);
    for (std::size_t t = 1; t < measurements.size(); ++t) {
        auto step = kalman_step(state, controls[t - 1], measurements[t]);
        state = step.state;
        out.push_back(step.pose);
    }
    return out;
}

}  // namespace skelrefine::fusion
