#include "skelrefine/refine.hpp"

#include "skelrefine/errors.hpp"

namespace skelrefine {

Eigen::MatrixXd to_matrix(const SkeletonSequence& seq) {
    Eigen::MatrixXd m(kPoseDim, static_cast<Eigen::Index>(seq.size()));
    for (std::size_t t = 0; t < seq.size(); ++t) m.col(static_cast<Eigen::Index>(t)) = seq.frames[t].coords;
    return m;
}

Eigen::MatrixXd to_matrix(const std::vector<VelocityVector>& v) {
    Eigen::MatrixXd m(kPoseDim, static_cast<Eigen::Index>(v.size()));
    for (std::size_t t = 0; t < v.size(); ++t) m.col(static_cast<Eigen::Index>(t)) = v[t];
    return m;
}

SkeletonSequence sequence_from_matrix(const Eigen::MatrixXd& m, Encoding encoding, double frame_rate_hz) {
    if (m.rows() != kPoseDim) throw DimensionError("pose matrix must have 48 rows");
    SkeletonSequence seq;
    seq.frame_rate_hz = frame_rate_hz;
    seq.frames.resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index t = 0; t < m.cols(); ++t) {
        seq.frames[static_cast<std::size_t>(t)].coords = m.col(t);
        seq.frames[static_cast<std::size_t>(t)].encoding = encoding;
    }
    return seq;
}

std::vector<VelocityVector> velocities_from_matrix(const Eigen::MatrixXd& m) {
    if (m.rows() != kPoseDim) throw DimensionError("velocity matrix must have 48 rows");
    std::vector<VelocityVector> v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index t = 0; t < m.cols(); ++t) v[static_cast<std::size_t>(t)] = m.col(t);
    return v;
}

SkeletonSequence refine_positions(const drnn::DrnnParams& net, const SkeletonSequence& seq,
                                  const KinematicTree& tree) {
    if (seq.empty()) throw InsufficientFramesError(0, 1);
    if (seq.encoding() != Encoding::Absolute) throw EncodingError("position refinement expects an absolute sequence");
    const auto rel = to_relative(seq, tree);
    const auto out = drnn::forward(net, to_matrix(rel)).outputs;
    return to_absolute(sequence_from_matrix(out, Encoding::RelativeToParent, seq.frame_rate_hz), tree);
}

std::vector<VelocityVector> refine_velocities(const drnn::DrnnParams& net, const SkeletonSequence& seq) {
    return refine_velocity_stream(net, velocities(seq));
}

std::vector<VelocityVector> refine_velocity_stream(const drnn::DrnnParams& net, const std::vector<VelocityVector>& v) {
    if (v.empty()) throw InsufficientFramesError(0, 1);
    return velocities_from_matrix(drnn::forward(net, to_matrix(v)).outputs);
}

}  // namespace skelrefine
