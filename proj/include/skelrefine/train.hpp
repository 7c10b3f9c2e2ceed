#pragma once

#include "skelrefine/drnn.hpp"
#include "skelrefine/lbfgs.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace skelrefine::drnn {

struct OptimizerSpec {
    enum class Method { Lbfgs, GradientDescent };

    Method method = Method::Lbfgs;
    optim::LbfgsOptions lbfgs;
    optim::GradientDescentOptions gradient_descent;
    /// Return the iterate with the lowest validation loss instead of the last one.
    bool keep_best_validation = true;
    /// Train on standardized data and fold the affine maps back into the weights. Inputs get
    /// per-component z-scores; targets are centered per component and share one scale, so the
    /// objective stays proportional to the unscaled SSE.
    bool standardize = true;
    /// L2 penalty on weight matrices (not biases), relative to the mean squared error. 0 trains on the plain SSE.
    double weight_decay = 0.0;

    static Method parse_method(const std::string& name);
};

struct LossRecord {
    int iteration = 0;
    double train_loss = 0.0;       // SSE over the training windows
    double validation_loss = 0.0;  // SSE over the validation windows
    double train_mse = 0.0;        // per output component
    double validation_mse = 0.0;
};

struct TrainResult {
    DrnnParams params;
    std::vector<LossRecord> history;  // entry 0 is the initialization
    optim::Status status = optim::Status::MaxIterations;
    int best_iteration = 0;
};

/// Fits a network from Glorot initialization (seeded by cfg.seed) by minimizing the SSE over
/// train. Throws TrainingDivergedError when the loss becomes non-finite.
TrainResult train(const DrnnConfig& cfg, const TrainingBatch& train_set, const TrainingBatch& validation_set,
                  const OptimizerSpec& spec = {});

/// Continues training from the given parameters, without standardization.
TrainResult train_from(const DrnnConfig& cfg, DrnnParams init, const TrainingBatch& train_set,
                       const TrainingBatch& validation_set, const OptimizerSpec& spec = {});

/// Affine maps applied around a network: x' = (x - input_mean) / input_scale and
/// y = output_scale * y' + output_mean.
struct Standardizer {
    VectorXd input_mean;
    VectorXd input_scale;
    VectorXd output_mean;
    double output_scale = 1.0;

    static Standardizer fit(const TrainingBatch& batch);
    TrainingBatch apply(const TrainingBatch& batch) const;
    /// Returns parameters acting on raw data that reproduce `normalized` wrapped in these maps.
    DrnnParams fold(const DrnnParams& normalized) const;
};

/// CSV with columns iteration,train_loss,validation_loss,train_mse,validation_mse.
void write_loss_csv(std::ostream& os, const std::vector<LossRecord>& history);

}  // namespace skelrefine::drnn
