#pragma once

#include "skelrefine/skeleton.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace skelrefine::fusion {

/// Zero-mean Gaussian per pose component. A deviation d passes when its two-sided tail
/// probability P(|N(0, sigma2)| > d) exceeds theta; theta = 0 passes everything.
struct GateModel {
    PoseVector sigma2 = PoseVector::Constant(1.0);
    double theta = 0.05;

    static double tail_probability(double deviation, double sigma2);
    bool passes(int component, double deviation) const;
    void validate() const;
};

inline constexpr double kVarianceFloor = 1e-12;

/// sigma2[j] = mean squared residual, floored at kVarianceFloor. Indices of floored
/// components are appended to `floored` when given.
GateModel estimate_gate(const std::vector<VelocityVector>& residuals, double theta = 0.05,
                        std::vector<int>* floored = nullptr);

/// Paired (key pose, target pose) examples searched by exact Euclidean distance.
class NeighborStore {
public:
    NeighborStore(Eigen::MatrixXd keys, Eigen::MatrixXd targets, int k = 300);

    int k() const noexcept { return k_; }
    Eigen::Index size() const noexcept { return keys_.cols(); }
    const Eigen::MatrixXd& keys() const noexcept { return keys_; }
    const Eigen::MatrixXd& targets() const noexcept { return targets_; }

    /// min(K, N) store indices ordered by (squared distance, index).
    std::vector<int> nearest(const PoseVector& query) const;

private:
    Eigen::MatrixXd keys_;
    Eigen::MatrixXd targets_;
    int k_;
};

struct SoftKnnResult {
    PoseVector pose;
    Eigen::Matrix<int, kPoseDim, 1> retained;  // per-component K~; 0 marks the ungated fallback
};

/// Soft-KNN regression. For each component j a neighbor i is kept when the gate passes on
/// |(key_i[j] - anchor[j]) - velocity[j]|; the output is the mean of kept targets, or of all
/// K neighbor targets when none is kept.
SoftKnnResult soft_knn(const NeighborStore& store, const GateModel& gate, const PoseVector& query,
                       const VelocityVector& velocity, const PoseVector& anchor);

/// One soft-KNN fusion step: query z~_t, refined velocity v~_t, previous fused pose z^_{t-1}.
PoseVector sknn_step(const NeighborStore& store, const GateModel& gate, const PoseVector& refined_pose,
                     const VelocityVector& refined_velocity, const PoseVector& previous_fused);

/// The same step over Kalman states: query x_t, velocity v~+_t, previous output z^+_{t-1}.
PoseVector sknnkf_step(const NeighborStore& store_plus, const GateModel& gate_plus, const PoseVector& kalman_state,
                       const VelocityVector& refined_velocity_plus, const PoseVector& previous_fused);

/// Diagonal Kalman filter state with identity transition, control and measurement maps.
struct KalmanState {
    PoseVector x = PoseVector::Zero();
    PoseVector P = PoseVector::Zero();
    PoseVector Q = PoseVector::Zero();
    PoseVector R = PoseVector::Zero();

    /// x0 = first measurement, P0 = R.
    static KalmanState initial(const PoseVector& first_measurement, const PoseVector& Q, const PoseVector& R);
};

struct KalmanStepResult {
    KalmanState state;
    PoseVector pose;
    PoseVector gain;
    PoseVector prior_variance;
};

/// Predict with x + v (variance P + Q), correct with measurement z (variance R).
KalmanStepResult kalman_step(const KalmanState& state, const VelocityVector& control, const PoseVector& measurement);

struct NoiseCovariances {
    PoseVector R = PoseVector::Constant(kVarianceFloor);  // measurement (position residuals)
    PoseVector Q = PoseVector::Constant(kVarianceFloor);  // process (velocity residuals)
};

/// Per-component sample variances of the residuals, floored at kVarianceFloor.
NoiseCovariances estimate_noise_covariances(const std::vector<PoseVector>& position_residuals,
                                            const std::vector<VelocityVector>& velocity_residuals);

/// Runs the filter over a sequence of measurements and controls (controls[t-1] drives frame t).
std::vector<PoseVector> kalman_filter(const std::vector<PoseVector>& measurements,
                                      const std::vector<VelocityVector>& controls, const NoiseCovariances& noise);

}  // namespace skelrefine::fusion
