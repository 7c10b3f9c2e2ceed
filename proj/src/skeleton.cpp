#include "skelrefine/skeleton.hpp"

#include "skelrefine/errors.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <string>

namespace skelrefine {

namespace {

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "spinemid",  "spinebase",     "spineshoulder", "neck",       "shoulderleft", "elbowleft",
    "wristleft", "shoulderright", "elbowright",    "wristright", "hipleft",      "kneeleft",
    "ankleleft", "hipright",      "kneeright",     "ankleright",
};

// Spread of a centered point set along its two largest principal axes.
Eigen::Vector3d principal_spread(std::span<const Vec3> pts, const Vec3& centroid) {
    Mat3 scatter = Mat3::Zero();
    for (const auto& p : pts) {
        const Vec3 d = p - centroid;
        scatter += d * d.transpose();
    }
    Eigen::JacobiSVD<Mat3> svd(scatter);
    return svd.singularValues();
}

}  // namespace

std::string_view joint_name(JointId j) { return kJointNames[index(j)]; }

JointId joint_from_index(int i) {
    if (i < 0 || i >= kNumJoints) throw DimensionError("joint index out of range: " + std::to_string(i));
    return static_cast<JointId>(i);
}

std::string_view encoding_name(Encoding e) {
    return e == Encoding::Absolute ? "absolute" : "relative";
}

Encoding parse_encoding(std::string_view name) {
    if (name == "absolute") return Encoding::Absolute;
    if (name == "relative" || name == "relative_to_parent") return Encoding::RelativeToParent;
    throw EncodingError("unknown encoding '" + std::string(name) + "'");
}

Encoding SkeletonSequence::encoding() const {
    if (frames.empty()) throw InsufficientFramesError(0, 1);
    return frames.front().encoding;
}

void SkeletonSequence::validate() const {
    if (frames.empty()) throw InsufficientFramesError(0, 1);
    if (!(frame_rate_hz > 0.0)) throw DataError("frame rate must be positive");
    const Encoding enc = frames.front().encoding;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (frames[t].encoding != enc) throw EncodingError("mixed encodings in sequence at frame " + std::to_string(t));
        if (!frames[t].all_finite()) throw DataError("non-finite coordinate at frame " + std::to_string(t));
    }
}

KinematicTree::KinematicTree(std::array<JointId, kNumJoints> parents) : parents_(parents) {
    int roots = 0;
    for (int i = 0; i < kNumJoints; ++i) {
        if (parents_[i] == static_cast<JointId>(i)) {
            root_ = static_cast<JointId>(i);
            ++roots;
        }
    }
    if (roots != 1) throw ConfigError("kinematic tree must have exactly one root");

    // Depth-ordered emission; a joint that never reaches the root is a cycle.
    std::array<int, kNumJoints> depth{};
    for (int i = 0; i < kNumJoints; ++i) {
        int d = 0;
        JointId j = static_cast<JointId>(i);
        while (j != root_) {
            j = parents_[index(j)];
            if (++d > kNumJoints) throw ConfigError("kinematic tree contains a cycle");
        }
        depth[i] = d;
    }
    int n = 0;
    for (int d = 0; d < kNumJoints && n < kNumJoints; ++d)
        for (int i = 0; i < kNumJoints; ++i)
            if (depth[i] == d) order_[n++] = static_cast<JointId>(i);
}

const KinematicTree& KinematicTree::kinect() {
    using J = JointId;
    static const KinematicTree tree({
        J::SpineMid,       // spinemid (root)
        J::SpineMid,       // spinebase
        J::SpineMid,       // spineshoulder
        J::SpineShoulder,  // neck
        J::SpineShoulder,  // shoulderleft
        J::ShoulderLeft,   // elbowleft
        J::ElbowLeft,      // wristleft
        J::SpineShoulder,  // shoulderright
        J::ShoulderRight,  // elbowright
        J::ElbowRight,     // wristright
        J::SpineBase,      // hipleft
        J::HipLeft,        // kneeleft
        J::KneeLeft,       // ankleleft
        J::SpineBase,      // hipright
        J::HipRight,       // kneeright
        J::KneeRight,      // ankleright
    });
    return tree;
}

int KinematicTree::depth(JointId j) const {
    int d = 0;
    while (j != root_) {
        j = parent(j);
        ++d;
    }
    return d;
}

SkeletonPose to_relative(const SkeletonPose& pose, const KinematicTree& tree) {
    if (pose.encoding != Encoding::Absolute) throw EncodingError("to_relative expects an absolute pose");
    SkeletonPose out;
    out.encoding = Encoding::RelativeToParent;
    for (int i = 0; i < kNumJoints; ++i) {
        const JointId j = static_cast<JointId>(i);
        if (j == tree.root())
            out.set_joint(j, pose.joint(j));
        else
            out.set_joint(j, pose.joint(j) - pose.joint(tree.parent(j)));
    }
    return out;
}

SkeletonPose to_absolute(const SkeletonPose& pose, const KinematicTree& tree) {
    if (pose.encoding != Encoding::RelativeToParent) throw EncodingError("to_absolute expects a relative pose");
    SkeletonPose out;
    out.encoding = Encoding::Absolute;
    for (JointId j : tree.topological_order()) {
        if (j == tree.root())
            out.set_joint(j, pose.joint(j));
        else
            out.set_joint(j, out.joint(tree.parent(j)) + pose.joint(j));
    }
    return out;
}

SkeletonSequence to_relative(const SkeletonSequence& seq, const KinematicTree& tree) {
    SkeletonSequence out;
    out.frame_rate_hz = seq.frame_rate_hz;
    out.frames.reserve(seq.size());
    for (const auto& f : seq.frames) out.frames.push_back(to_relative(f, tree));
    return out;
}

SkeletonSequence to_absolute(const SkeletonSequence& seq, const KinematicTree& tree) {
    SkeletonSequence out;
    out.frame_rate_hz = seq.frame_rate_hz;
    out.frames.reserve(seq.size());
    for (const auto& f : seq.frames) out.frames.push_back(to_absolute(f, tree));
    return out;
}

std::vector<VelocityVector> velocities(const SkeletonSequence& seq) {
    if (seq.size() < 2) throw InsufficientFramesError(seq.size(), 2);
    if (seq.encoding() != Encoding::Absolute) throw EncodingError("velocities expect an absolute sequence");
    std::vector<VelocityVector> out;
    out.reserve(seq.size() - 1);
    for (std::size_t t = 1; t < seq.size(); ++t) out.push_back(seq.frames[t].coords - seq.frames[t - 1].coords);
    return out;
}

RigidTransform rigid_align(std::span<const Vec3> src, std::span<const Vec3> dst) {
    if (src.size() != dst.size()) throw DimensionError("rigid_align: point lists differ in length");
    if (src.size() < 3) throw DegenerateGeometryError("rigid_align needs at least three correspondences");

    Vec3 src_c = Vec3::Zero();
    Vec3 dst_c = Vec3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        src_c += src[i];
        dst_c += dst[i];
    }
    src_c /= static_cast<double>(src.size());
    dst_c /= static_cast<double>(dst.size());

    // Rank < 2 of the centered source leaves the rotation about the line undetermined.
    const Eigen::Vector3d spread = principal_spread(src, src_c);
    if (!(spread(0) > 0.0) || spread(1) <= 1e-12 * spread(0))
        throw DegenerateGeometryError("rigid_align: source points are coincident or collinear");

    Mat3 cross = Mat3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) cross += (dst[i] - dst_c) * (src[i] - src_c).transpose();

    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3& u = svd.matrixU();
    const Mat3& v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    if ((u * v.transpose()).determinant() < 0.0) d(2, 2) = -1.0;

    RigidTransform xf;
    xf.rotation = u * d * v.transpose();
    xf.translation = dst_c - xf.rotation * src_c;
    return xf;
}

SkeletonPose transform_pose(const SkeletonPose& pose, const RigidTransform& xf) {
    if (pose.encoding != Encoding::Absolute) throw EncodingError("transform_pose expects an absolute pose");
    SkeletonPose out = pose;
    for (int i = 0; i < kNumJoints; ++i) {
        const JointId j = static_cast<JointId>(i);
        out.set_joint(j, xf.apply(pose.joint(j)));
    }
    return out;
}

}  // namespace skelrefine
