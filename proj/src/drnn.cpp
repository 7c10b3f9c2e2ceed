#include "skelrefine/drnn.hpp"

#include "skelrefine/errors.hpp"

#include <cmath>
#include <random>
#include <string>

namespace skelrefine::drnn {

namespace {

// Windows per packed chunk; bounds activation memory and fixes the summation order.
constexpr std::size_t kChunk = 256;

std::string shape(const MatrixXd& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

template <class F>
void for_each_block(DrnnParams& p, F&& f) {
    for (auto& u : p.U) f(u.data(), u.size());
    for (auto& v : p.b) f(v.data(), v.size());
    f(p.W.data(), p.W.size());
    f(p.V.data(), p.V.size());
    f(p.c.data(), p.c.size());
}

template <class F>
void for_each_block(const DrnnParams& p, F&& f) {
    for (const auto& u : p.U) f(u.data(), u.size());
    for (const auto& v : p.b) f(v.data(), v.size());
    f(p.W.data(), p.W.size());
    f(p.V.data(), p.V.size());
    f(p.c.data(), p.c.size());
}

// Activations of one packed chunk: hidden[t][l] is size(l) x B.
struct ChunkActivations {
    std::vector<std::vector<MatrixXd>> hidden;
    std::vector<MatrixXd> outputs;
};

ChunkActivations forward_chunk(const DrnnParams& p, const std::vector<MatrixXd>& steps) {
    const int depth = p.layers();
    ChunkActivations act;
    act.hidden.resize(steps.size());
    act.outputs.resize(steps.size());
    for (std::size_t t = 0; t < steps.size(); ++t) {
        auto& h = act.hidden[t];
        h.resize(depth);
        const MatrixXd* in = &steps[t];
        for (int l = 0; l < depth; ++l) {
            MatrixXd z = p.U[l].transpose() * *in;
            z.colwise() += p.b[l];
            if (l == p.recurrent && t > 0) z.noalias() += p.W.transpose() * act.hidden[t - 1][l];
            h[l] = z.cwiseMax(0.0);
            in = &h[l];
        }
        MatrixXd y = p.V.transpose() * *in;
        y.colwise() += p.c;
        act.outputs[t] = std::move(y);
    }
    return act;
}

// Packs windows [first, last) into per-step matrices (dim x B).
std::vector<MatrixXd> pack(const std::vector<MatrixXd>& windows, std::size_t first, std::size_t last) {
    const Eigen::Index dim = windows[first].rows();
    const Eigen::Index steps = windows[first].cols();
    const Eigen::Index count = static_cast<Eigen::Index>(last - first);
    std::vector<MatrixXd> out(steps, MatrixXd(dim, count));
    for (std::size_t w = first; w < last; ++w)
        for (Eigen::Index t = 0; t < steps; ++t) out[t].col(static_cast<Eigen::Index>(w - first)) = windows[w].col(t);
    return out;
}

// Chunk boundaries: at most kChunk windows and a single window length per chunk.
std::vector<std::pair<std::size_t, std::size_t>> chunks(const TrainingBatch& batch) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t first = 0;
    while (first < batch.size()) {
        std::size_t last = first + 1;
        while (last < batch.size() && last - first < kChunk && batch.inputs[last].cols() == batch.inputs[first].cols())
            ++last;
        out.emplace_back(first, last);
        first = last;
    }
    return out;
}

}  // namespace

void DrnnConfig::validate() const {
    if (input_dim < 1 || output_dim < 1) throw ConfigError("network input/output dimensions must be positive");
    if (hidden_sizes.empty()) throw ConfigError("network needs at least one hidden layer");
    for (int s : hidden_sizes)
        if (s < 1) throw ConfigError("hidden layer sizes must be positive");
    if (recurrent_layer < 1 || recurrent_layer > static_cast<int>(hidden_sizes.size()))
        throw ConfigError("recurrent layer index " + std::to_string(recurrent_layer) + " outside 1.." +
                          std::to_string(hidden_sizes.size()));
    if (window_length < 2) throw ConfigError("window length must be at least 2");
}

DrnnConfig DrnnConfig::position_network() {
    DrnnConfig cfg;
    cfg.window_length = 7;
    return cfg;
}

DrnnConfig DrnnConfig::velocity_network() {
    DrnnConfig cfg;
    cfg.window_length = 20;
    return cfg;
}

DrnnParams DrnnParams::zeros(const DrnnConfig& cfg) {
    cfg.validate();
    DrnnParams p;
    int prev = cfg.input_dim;
    for (int s : cfg.hidden_sizes) {
        p.U.push_back(MatrixXd::Zero(prev, s));
        p.b.push_back(VectorXd::Zero(s));
        prev = s;
    }
    p.recurrent = cfg.recurrent_layer - 1;
    const int r = cfg.hidden_sizes[p.recurrent];
    p.W = MatrixXd::Zero(r, r);
    p.V = MatrixXd::Zero(prev, cfg.output_dim);
    p.c = VectorXd::Zero(cfg.output_dim);
    return p;
}

DrnnParams DrnnParams::glorot(const DrnnConfig& cfg) {
    DrnnParams p = zeros(cfg);
    std::mt19937_64 rng(cfg.seed);
    auto fill = [&rng](MatrixXd& m) {
        const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
        std::uniform_real_distribution<double> dist(-a, a);
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
    };
    for (auto& u : p.U) fill(u);
    fill(p.W);
    fill(p.V);
    return p;
}

Eigen::Index DrnnParams::parameter_count() const {
    Eigen::Index n = 0;
    for_each_block(*this, [&n](const double*, Eigen::Index size) { n += size; });
    return n;
}

VectorXd DrnnParams::flatten() const {
    VectorXd flat(parameter_count());
    Eigen::Index offset = 0;
    for_each_block(*this, [&](const double* data, Eigen::Index size) {
        flat.segment(offset, size) = Eigen::Map<const VectorXd>(data, size);
        offset += size;
    });
    return flat;
}

void DrnnParams::assign(const VectorXd& flat) {
    if (flat.size() != parameter_count())
        throw DimensionError("flat parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
                             std::to_string(parameter_count()));
    Eigen::Index offset = 0;
    for_each_block(*this, [&](double* data, Eigen::Index size) {
        Eigen::Map<VectorXd>(data, size) = flat.segment(offset, size);
        offset += size;
    });
}

bool DrnnParams::same_shape(const DrnnParams& o) const {
    if (U.size() != o.U.size() || recurrent != o.recurrent) return false;
    for (std::size_t l = 0; l < U.size(); ++l)
        if (U[l].rows() != o.U[l].rows() || U[l].cols() != o.U[l].cols() || b[l].size() != o.b[l].size()) return false;
    return W.rows() == o.W.rows() && W.cols() == o.W.cols() && V.rows() == o.V.rows() && V.cols() == o.V.cols() &&
           c.size() == o.c.size();
}

bool DrnnParams::all_finite() const {
    bool ok = true;
    for_each_block(*this, [&ok](const double* data, Eigen::Index size) {
        ok = ok && Eigen::Map<const VectorXd>(data, size).allFinite();
    });
    return ok;
}

void DrnnParams::check_shapes(const DrnnConfig& cfg) const {
    cfg.validate();
    if (!same_shape(zeros(cfg))) throw DimensionError("network parameters do not match the configured shapes");
}

DrnnParams& DrnnParams::operator+=(const DrnnParams& other) {
    for (std::size_t l = 0; l < U.size(); ++l) {
        U[l] += other.U[l];
        b[l] += other.b[l];
    }
    W += other.W;
    V += other.V;
    c += other.c;
    return *this;
}

DrnnParams& DrnnParams::operator*=(double s) {
    for_each_block(*this, [s](double* data, Eigen::Index size) { Eigen::Map<VectorXd>(data, size) *= s; });
    return *this;
}

ForwardResult forward(const DrnnParams& p, const MatrixXd& window, const VectorXd& h0) {
    if (window.cols() < 1) throw DimensionError("forward needs a window of at least one step");
    if (window.rows() != p.input_dim())
        throw DimensionError("window has " + std::to_string(window.rows()) + " rows, network expects " +
                             std::to_string(p.input_dim()));
    const int r = p.recurrent;
    VectorXd h = h0.size() == 0 ? VectorXd::Zero(p.hidden_size(r)) : h0;
    if (h.size() != p.hidden_size(r)) throw DimensionError("initial hidden state has the wrong size");

    ForwardResult out;
    out.outputs.resize(p.output_dim(), window.cols());
    VectorXd in;
    for (Eigen::Index t = 0; t < window.cols(); ++t) {
        in = window.col(t);
        for (int l = 0; l < p.layers(); ++l) {
            VectorXd z = p.U[l].transpose() * in + p.b[l];
            if (l == r) z.noalias() += p.W.transpose() * h;
            in = z.cwiseMax(0.0);
            if (l == r) h = in;
        }
        out.outputs.col(t) = p.V.transpose() * in + p.c;
    }
    if (!out.outputs.allFinite()) throw NumericalError("non-finite network output");
    out.final_hidden = std::move(h);
    return out;
}

void TrainingBatch::validate(int input_dim, int output_dim) const {
    if (inputs.empty()) throw DataError("training batch is empty");
    if (inputs.size() != targets.size()) throw DimensionError("batch has unequal input and target counts");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].cols() < 1 || inputs[i].cols() != targets[i].cols())
            throw DimensionError("window " + std::to_string(i) + " has mismatched lengths " + shape(inputs[i]) +
                                 " vs " + shape(targets[i]));
        if (inputs[i].rows() != input_dim || targets[i].rows() != output_dim)
            throw DimensionError("window " + std::to_string(i) + " has the wrong dimension");
    }
}

void TrainingBatch::append(const TrainingBatch& other) {
    inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
}

TrainingBatch make_windows(const std::vector<MatrixXd>& input_sequences,
                           const std::vector<MatrixXd>& target_sequences, int window_length) {
    if (input_sequences.size() != target_sequences.size())
        throw DimensionError("unequal numbers of input and target sequences");
    if (window_length < 1) throw ConfigError("window length must be positive");
    TrainingBatch batch;
    for (std::size_t s = 0; s < input_sequences.size(); ++s) {
        const auto& x = input_sequences[s];
        const auto& y = target_sequences[s];
        if (x.cols() != y.cols()) throw DimensionError("input and target sequences differ in length");
        for (Eigen::Index t = 0; t + window_length <= x.cols(); ++t) {
            batch.inputs.push_back(x.middleCols(t, window_length));
            batch.targets.push_back(y.middleCols(t, window_length));
        }
    }
    return batch;
}

LossAndGradient loss_and_gradient(const DrnnParams& p, const TrainingBatch& batch) {
    batch.validate(p.input_dim(), p.output_dim());
    LossAndGradient result;
    result.gradient = p;
    result.gradient *= 0.0;
    auto& g = result.gradient;
    const int depth = p.layers();
    const int r = p.recurrent;

    for (auto [first, last] : chunks(batch)) {
        const auto x = pack(batch.inputs, first, last);
        const auto target = pack(batch.targets, first, last);
        const auto act = forward_chunk(p, x);
        const auto steps = x.size();

        MatrixXd carry;  // d loss / d h_r at step t, through the recurrent edge from t+1
        for (std::size_t k = steps; k-- > 0;) {
            const MatrixXd residual = act.outputs[k] - target[k];
            const double sse = residual.colwise().squaredNorm().sum();
            if (!std::isfinite(sse)) throw NumericalError("non-finite activations in loss evaluation");
            result.loss += sse;

            const MatrixXd dy = 2.0 * residual;
            const auto& h = act.hidden[k];
            g.V.noalias() += h[depth - 1] * dy.transpose();
            g.c += dy.rowwise().sum();
            MatrixXd dh = p.V * dy;
            for (int l = depth - 1; l >= 0; --l) {
                if (l == r && carry.size() != 0) dh += carry;
                const MatrixXd dz = dh.cwiseProduct((h[l].array() > 0.0).cast<double>().matrix());
                const MatrixXd& below = l == 0 ? x[k] : h[l - 1];
                g.U[l].noalias() += below * dz.transpose();
                g.b[l] += dz.rowwise().sum();
                if (l == r) {
                    if (k > 0) {
                        g.W.noalias() += act.hidden[k - 1][r] * dz.transpose();
                        carry = p.W * dz;
                    } else {
                        carry.resize(0, 0);
                    }
                }
                if (l > 0) dh = p.U[l] * dz;
            }
        }
    }
    if (!std::isfinite(result.loss) || !g.all_finite()) throw NumericalError("non-finite loss or gradient");
    return result;
}

double loss(const DrnnParams& p, const TrainingBatch& batch) {
    batch.validate(p.input_dim(), p.output_dim());
    double total = 0.0;
    for (auto [first, last] : chunks(batch)) {
        const auto x = pack(batch.inputs, first, last);
        const auto target = pack(batch.targets, first, last);
        const auto act = forward_chunk(p, x);
        for (std::size_t k = 0; k < x.size(); ++k) total += (act.outputs[k] - target[k]).colwise().squaredNorm().sum();
    }
    if (!std::isfinite(total)) throw NumericalError("non-finite activations in loss evaluation");
    return total;
}

}  // namespace skelrefine::drnn
