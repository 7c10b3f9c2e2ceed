#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace skelrefine::drnn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Shape of a deep recurrent network whose temporal connection lives at a single hidden layer.
struct DrnnConfig {
    int input_dim = 48;
    int output_dim = 48;
    std::vector<int> hidden_sizes{256, 256, 256};
    int recurrent_layer = 2;  // 1-based
    int window_length = 7;
    std::uint64_t seed = 0;

    void validate() const;

    static DrnnConfig position_network();  // pDRNN, window 7
    static DrnnConfig velocity_network();  // vDRNN and vDRNN+, window 20
};

/// Network weights. Layer l computes relu(U[l]^T h_{l-1} + b[l]) and the recurrent layer
/// additionally adds W^T h_{t-1}; the output is the linear map V^T h_L + c.
struct DrnnParams {
    std::vector<MatrixXd> U;  // U[l]: size(l-1) x size(l)
    std::vector<VectorXd> b;
    MatrixXd W;  // recurrent, size(r) x size(r)
    MatrixXd V;  // size(L) x output_dim
    VectorXd c;
    int recurrent = 0;  // 0-based index of the recurrent layer

    static DrnnParams zeros(const DrnnConfig& cfg);
    /// Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)); biases start at zero.
    static DrnnParams glorot(const DrnnConfig& cfg);

    int layers() const noexcept { return static_cast<int>(U.size()); }
    int input_dim() const { return static_cast<int>(U.front().rows()); }
    int output_dim() const { return static_cast<int>(V.cols()); }
    int hidden_size(int layer) const { return static_cast<int>(U[layer].cols()); }

    Eigen::Index parameter_count() const;
    VectorXd flatten() const;
    void assign(const VectorXd& flat);
    bool same_shape(const DrnnParams& other) const;
    bool all_finite() const;
    /// Throws DimensionError unless the shapes match cfg.
    void check_shapes(const DrnnConfig& cfg) const;

    DrnnParams& operator+=(const DrnnParams& other);
    DrnnParams& operator*=(double s);
};

struct ForwardResult {
    MatrixXd outputs;  // output_dim x T
    VectorXd final_hidden;
};

/// Runs the network over a window (input_dim x T, one column per step).
/// An empty h0 means a zero initial recurrent state.
ForwardResult forward(const DrnnParams& params, const MatrixXd& window, const VectorXd& h0 = VectorXd());

/// Paired input/target windows; every column is one time step.
struct TrainingBatch {
    std::vector<MatrixXd> inputs;
    std::vector<MatrixXd> targets;

    std::size_t size() const noexcept { return inputs.size(); }
    bool empty() const noexcept { return inputs.empty(); }
    void validate(int input_dim, int output_dim) const;
    void append(const TrainingBatch& other);
};

/// All windows of the given length with temporal stride 1; sequences are dim x T matrices.
TrainingBatch make_windows(const std::vector<MatrixXd>& input_sequences,
                           const std::vector<MatrixXd>& target_sequences, int window_length);

struct LossAndGradient {
    double loss = 0.0;
    DrnnParams gradient;
};

/// Sum over windows and steps of the squared output error, with its gradient by
/// backpropagation through time (h0 = 0 for every window).
LossAndGradient loss_and_gradient(const DrnnParams& params, const TrainingBatch& batch);
double loss(const DrnnParams& params, const TrainingBatch& batch);

}  // namespace skelrefine::drnn
