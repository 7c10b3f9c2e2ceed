#include "skelrefine/train.hpp"

#include "skelrefine/errors.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace skelrefine::drnn {

namespace {

double component_count(const TrainingBatch& batch) {
    double n = 0.0;
    for (const auto& t : batch.targets) n += static_cast<double>(t.size());
    return n;
}

}  // namespace

OptimizerSpec::Method OptimizerSpec::parse_method(const std::string& name) {
    if (name == "lbfgs") return Method::Lbfgs;
    if (name == "gd" || name == "gradient_descent") return Method::GradientDescent;
    throw ConfigError("unknown optimizer '" + name + "'");
}

namespace {

// Minimizes the SSE on the given (possibly standardized) batches. Recorded losses are
// multiplied by loss_scale to report them in original units.
TrainResult run(const DrnnConfig& cfg, DrnnParams init, const TrainingBatch& train_set,
                const TrainingBatch& validation_set, const OptimizerSpec& spec, double loss_scale) {
    const double n_train = component_count(train_set);
    const double n_val = component_count(validation_set);

    // The optional L2 penalty covers weight matrices only and is scaled by the number of target
    // components, so weight_decay reads as a per-component trade-off against the mean squared error.
    DrnnParams mask = init;
    mask *= 0.0;
    for (auto& u : mask.U) u.setOnes();
    mask.W.setOnes();
    mask.V.setOnes();
    const Eigen::VectorXd decay = mask.flatten() * (spec.weight_decay * n_train);
    auto penalty = [&decay](const Eigen::VectorXd& x) { return x.cwiseAbs2().dot(decay); };

    DrnnParams work = init;
    optim::Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        work.assign(x);
        try {
            auto lg = loss_and_gradient(work, train_set);
            grad = lg.gradient.flatten();
            if (spec.weight_decay == 0.0) return lg.loss;
            grad += 2.0 * decay.cwiseProduct(x);
            return lg.loss + penalty(x);
        } catch (const NumericalError&) {
            grad.setConstant(std::numeric_limits<double>::quiet_NaN());
            return std::numeric_limits<double>::infinity();
        }
    };

    TrainResult result;
    auto record = [&](int iteration, double train_loss, const DrnnParams& params) {
        double val_loss = std::numeric_limits<double>::infinity();
        try {
            val_loss = loss(params, validation_set);
        } catch (const NumericalError&) {
        }
        const double tl = train_loss * loss_scale;
        const double vl = val_loss * loss_scale;
        result.history.push_back({iteration, tl, vl, tl / n_train, vl / n_val});
        return val_loss;
    };

    double init_loss = 0.0;
    try {
        init_loss = loss(init, train_set);
    } catch (const NumericalError&) {
        throw TrainingDivergedError(0);
    }
    double best_val = record(0, init_loss, init);
    result.params = init;
    result.best_iteration = 0;

    DrnnParams probe = init;
    optim::IterationCallback on_step = [&](const optim::IterationRecord& rec, const Eigen::VectorXd& x) {
        if (!std::isfinite(rec.value)) throw TrainingDivergedError(rec.iteration);
        probe.assign(x);
        const double val = record(rec.iteration, rec.value - penalty(x), probe);
        if (!spec.keep_best_validation || val < best_val) {
            best_val = val;
            result.params = probe;
            result.best_iteration = rec.iteration;
        }
        return true;
    };

    optim::MinimizeResult out;
    if (spec.method == OptimizerSpec::Method::Lbfgs)
        out = optim::minimize_lbfgs(objective, init.flatten(), spec.lbfgs, on_step);
    else
        out = optim::minimize_gradient_descent(objective, init.flatten(), spec.gradient_descent, on_step);
    if (!std::isfinite(out.value)) throw TrainingDivergedError(out.iterations);
    result.status = out.status;
    return result;
}

void check_inputs(const DrnnConfig& cfg, const TrainingBatch& train_set, const TrainingBatch& validation_set) {
    cfg.validate();
    train_set.validate(cfg.input_dim, cfg.output_dim);
    validation_set.validate(cfg.input_dim, cfg.output_dim);
}

}  // namespace

Standardizer Standardizer::fit(const TrainingBatch& batch) {
    const Eigen::Index in_dim = batch.inputs.front().rows();
    const Eigen::Index out_dim = batch.targets.front().rows();
    double n = 0.0;
    VectorXd in_sum = VectorXd::Zero(in_dim), in_sq = VectorXd::Zero(in_dim);
    VectorXd out_sum = VectorXd::Zero(out_dim);
    for (std::size_t w = 0; w < batch.size(); ++w) {
        in_sum += batch.inputs[w].rowwise().sum();
        in_sq += batch.inputs[w].cwiseAbs2().rowwise().sum();
        out_sum += batch.targets[w].rowwise().sum();
        n += static_cast<double>(batch.inputs[w].cols());
    }
    Standardizer s;
    s.input_mean = in_sum / n;
    s.input_scale = (in_sq / n - s.input_mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index k = 0; k < in_dim; ++k)
        if (!(s.input_scale(k) > 1e-12)) s.input_scale(k) = 1.0;
    s.output_mean = out_sum / n;
    double out_sq = 0.0;
    for (const auto& t : batch.targets) out_sq += (t.colwise() - s.output_mean).squaredNorm();
    const double rms = std::sqrt(out_sq / (n * static_cast<double>(out_dim)));
    s.output_scale = rms > 1e-12 ? rms : 1.0;
    return s;
}

TrainingBatch Standardizer::apply(const TrainingBatch& batch) const {
    TrainingBatch out;
    out.inputs.reserve(batch.size());
    out.targets.reserve(batch.size());
    const VectorXd inv_in = input_scale.cwiseInverse();
    for (std::size_t w = 0; w < batch.size(); ++w) {
        out.inputs.push_back(inv_in.asDiagonal() * (batch.inputs[w].colwise() - input_mean));
        out.targets.push_back((batch.targets[w].colwise() - output_mean) / output_scale);
    }
    return out;
}

DrnnParams Standardizer::fold(const DrnnParams& p) const {
    DrnnParams out = p;
    const VectorXd inv_in = input_scale.cwiseInverse();
    out.U[0] = inv_in.asDiagonal() * p.U[0];
    out.b[0] = p.b[0] - p.U[0].transpose() * input_mean.cwiseProduct(inv_in);
    out.V = p.V * output_scale;
    out.c = p.c * output_scale + output_mean;
    return out;
}

TrainResult train(const DrnnConfig& cfg, const TrainingBatch& train_set, const TrainingBatch& validation_set,
                  const OptimizerSpec& spec) {
    check_inputs(cfg, train_set, validation_set);
    if (!spec.standardize) return run(cfg, DrnnParams::glorot(cfg), train_set, validation_set, spec, 1.0);
    const auto s = Standardizer::fit(train_set);
    auto result = run(cfg, DrnnParams::glorot(cfg), s.apply(train_set), s.apply(validation_set), spec,
                      s.output_scale * s.output_scale);
    result.params = s.fold(result.params);
    return result;
}

TrainResult train_from(const DrnnConfig& cfg, DrnnParams init, const TrainingBatch& train_set,
                       const TrainingBatch& validation_set, const OptimizerSpec& spec) {
    check_inputs(cfg, train_set, validation_set);
    init.check_shapes(cfg);
    return run(cfg, std::move(init), train_set, validation_set, spec, 1.0);
}

void write_loss_csv(std::ostream& os, const std::vector<LossRecord>& history) {
    os << "iteration,train_loss,validation_loss,train_mse,validation_mse\n" << std::setprecision(17);
    for (const auto& r : history)
        os << r.iteration << ',' << r.train_loss << ',' << r.validation_loss << ',' << r.train_mse << ','
           << r.validation_mse << '\n';
}

}  // namespace skelrefine::drnn
