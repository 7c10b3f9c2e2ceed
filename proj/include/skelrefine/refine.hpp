#pragma once

#include "skelrefine/drnn.hpp"
#include "skelrefine/skeleton.hpp"

#include <vector>

namespace skelrefine {

/// 48 x T matrix with one pose per column.
Eigen::MatrixXd to_matrix(const SkeletonSequence& seq);
Eigen::MatrixXd to_matrix(const std::vector<VelocityVector>& v);
SkeletonSequence sequence_from_matrix(const Eigen::MatrixXd& m, Encoding encoding, double frame_rate_hz);
std::vector<VelocityVector> velocities_from_matrix(const Eigen::MatrixXd& m);

// Inference streams the whole sequence through the network with h0 = 0 at the first
// frame and the recurrent state carried forward; output t is the step-t output.

/// Position refinement: relative-to-parent encoding in, relative out, back to absolute.
SkeletonSequence refine_positions(const drnn::DrnnParams& net, const SkeletonSequence& seq,
                                  const KinematicTree& tree = KinematicTree::kinect());

/// Velocity refinement of an absolute sequence; element t-1 is the refined velocity at frame t.
std::vector<VelocityVector> refine_velocities(const drnn::DrnnParams& net, const SkeletonSequence& seq);

/// Velocity refinement of an explicit velocity stream.
std::vector<VelocityVector> refine_velocity_stream(const drnn::DrnnParams& net, const std::vector<VelocityVector>& v);

}  // namespace skelrefine
