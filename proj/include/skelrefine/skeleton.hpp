#pragma once

#include <Eigen/Core>

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace skelrefine {

inline constexpr int kNumJoints = 16;
inline constexpr int kPoseDim = 3 * kNumJoints;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using PoseVector = Eigen::Matrix<double, kPoseDim, 1>;

/// Per-frame joint displacement in meters per frame.
using VelocityVector = PoseVector;

/// The 16 tracked joints. Values are the index of the joint's xyz triple in a pose.
enum class JointId : int {
    SpineMid = 0,
    SpineBase,
    SpineShoulder,
    Neck,
    ShoulderLeft,
    ElbowLeft,
    WristLeft,
    ShoulderRight,
    ElbowRight,
    WristRight,
    HipLeft,
    KneeLeft,
    AnkleLeft,
    HipRight,
    KneeRight,
    AnkleRight,
};

constexpr int index(JointId j) noexcept { return static_cast<int>(j); }
std::string_view joint_name(JointId j);
JointId joint_from_index(int i);

enum class Encoding { Absolute, RelativeToParent };

std::string_view encoding_name(Encoding e);
Encoding parse_encoding(std::string_view name);

struct SkeletonPose {
    PoseVector coords = PoseVector::Zero();
    Encoding encoding = Encoding::Absolute;

    Vec3 joint(JointId j) const { return coords.segment<3>(3 * index(j)); }
    void set_joint(JointId j, const Vec3& p) { coords.segment<3>(3 * index(j)) = p; }
    bool all_finite() const { return coords.allFinite(); }
};

struct SkeletonSequence {
    std::vector<SkeletonPose> frames;
    double frame_rate_hz = 30.0;

    std::size_t size() const noexcept { return frames.size(); }
    bool empty() const noexcept { return frames.empty(); }
    Encoding encoding() const;

    /// Throws DataError when the sequence is empty, mixes encodings, holds
    /// non-finite values or has a non-positive frame rate.
    void validate() const;
};

/// Parent map of the joint hierarchy. The root maps to itself.
class KinematicTree {
public:
    explicit KinematicTree(std::array<JointId, kNumJoints> parents);

    /// spinemid root; spine, hip, shoulder, arm and leg chains of the Kinect v2 layout.
    static const KinematicTree& kinect();

    JointId root() const noexcept { return root_; }
    JointId parent(JointId j) const { return parents_[index(j)]; }
    /// Joints ordered so every parent precedes its children.
    const std::array<JointId, kNumJoints>& topological_order() const noexcept { return order_; }
    int depth(JointId j) const;

private:
    std::array<JointId, kNumJoints> parents_;
    std::array<JointId, kNumJoints> order_;
    JointId root_;
};

SkeletonPose to_relative(const SkeletonPose& pose, const KinematicTree& tree = KinematicTree::kinect());
SkeletonPose to_absolute(const SkeletonPose& pose, const KinematicTree& tree = KinematicTree::kinect());
SkeletonSequence to_relative(const SkeletonSequence& seq, const KinematicTree& tree = KinematicTree::kinect());
SkeletonSequence to_absolute(const SkeletonSequence& seq, const KinematicTree& tree = KinematicTree::kinect());

/// Element t is frames[t+1] - frames[t]; requires an absolute sequence of at least two frames.
std::vector<VelocityVector> velocities(const SkeletonSequence& seq);

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

/// Least-squares rigid transform mapping src onto dst (orthogonal Procrustes).
RigidTransform rigid_align(std::span<const Vec3> src, std::span<const Vec3> dst);

/// Applies a rigid transform to every joint of an absolute pose.
SkeletonPose transform_pose(const SkeletonPose& pose, const RigidTransform& xf);

}  // namespace skelrefine
