#pragma once

#include "skelrefine/checkpoint.hpp"
#include "skelrefine/fusion.hpp"
#include "skelrefine/skeleton.hpp"
#include "skelrefine/synth.hpp"
#include "skelrefine/train.hpp"

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace skelrefine {

enum class Variant {
    Raw,
    Pdrnn,
    Sknn,
    Kf,
    Sknnkf,
    SknnMinusPdrnn,  // keys and queries are raw poses, store S-
    SknnMinusVdrnn,  // gate on unrefined velocities of the refined poses
    NaiveSknn,       // candidate velocities anchored at z~_{t-1} instead of z^_{t-1}
    KfMinusPdrnn,    // raw measurements, control from the velocity network on raw velocities
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();

struct FusionParams {
    int k = 300;
    double theta = 0.05;
    double theta_plus = 0.05;
};

/// Everything a variant may need. Missing members raise ConfigError when a variant needs them.
struct PipelineModels {
    std::optional<drnn::DrnnModel> pdrnn;
    std::optional<drnn::DrnnModel> vdrnn;
    std::optional<drnn::DrnnModel> vdrnn_plus;

    std::optional<fusion::NeighborStore> store;        // S  = {(z~, z^M)}
    std::optional<fusion::NeighborStore> store_plus;   // S+ = {(x, x^M)}
    std::optional<fusion::NeighborStore> store_minus;  // S- = {(z, z^M)}

    std::optional<fusion::GateModel> gate;               // |v^M - v~|
    std::optional<fusion::GateModel> gate_plus;          // |v^M - v~+|
    std::optional<fusion::GateModel> gate_raw_velocity;  // |v^M - v|, v from z~ without refinement
    std::optional<fusion::GateModel> gate_minus_pdrnn;   // |v^M - vDRNN(velocities(z))|

    std::optional<fusion::NoiseCovariances> kalman;              // R from z~, Q from v~
    std::optional<fusion::NoiseCovariances> kalman_minus_pdrnn;  // R from z, Q from vDRNN(velocities(z))
};

/// Refines one absolute sequence with the given variant; output length equals input length.
SkeletonSequence run_pipeline(Variant variant, const SkeletonSequence& seq, const PipelineModels& models);

// Building blocks shared by run_pipeline, model fitting and tests.

/// Kalman fusion of measured poses with controls (controls[t-1] drives frame t).
SkeletonSequence kalman_fusion(const SkeletonSequence& measurements, const std::vector<VelocityVector>& controls,
                               const fusion::NoiseCovariances& noise);

enum class Anchor { PreviousFused, PreviousQuery };

/// Soft-KNN recursion over a query sequence; output frame 0 is the first query.
SkeletonSequence soft_knn_fusion(const SkeletonSequence& queries, const std::vector<VelocityVector>& velocities,
                                 const fusion::NeighborStore& store, const fusion::GateModel& gate,
                                 Anchor anchor = Anchor::PreviousFused);

// ---- model fitting from a paired corpus ----

enum class Stage { Pdrnn, Vdrnn, VdrnnPlus };

struct StageConfig {
    drnn::DrnnConfig pdrnn = drnn::DrnnConfig::position_network();
    drnn::DrnnConfig vdrnn = drnn::DrnnConfig::velocity_network();
    drnn::DrnnConfig vdrnn_plus = drnn::DrnnConfig::velocity_network();
    drnn::OptimizerSpec optimizer;  // shared by every network unless overridden below
    std::optional<drnn::OptimizerSpec> pdrnn_optimizer;
    std::optional<drnn::OptimizerSpec> vdrnn_optimizer;
    std::optional<drnn::OptimizerSpec> vdrnn_plus_optimizer;
    FusionParams fusion;

    const drnn::OptimizerSpec& optimizer_for(Stage stage) const;
};

/// Relative-encoded (kinect -> mocap) windows for the position network.
drnn::TrainingBatch position_windows(const std::vector<synth::PairedSequence>& pairs, int window_length);

drnn::TrainResult train_position_network(const synth::Corpus& corpus, const StageConfig& cfg);
/// Requires models.pdrnn.
drnn::TrainResult train_velocity_network(const synth::Corpus& corpus, const PipelineModels& models,
                                         const StageConfig& cfg);
/// Requires pdrnn and vdrnn; fills the stores S and S-, the gates and both covariance models.
void fit_fusion_models(const synth::Corpus& corpus, PipelineModels& models, const FusionParams& params);
/// Requires pdrnn, vdrnn and kalman.
drnn::TrainResult train_velocity_plus_network(const synth::Corpus& corpus, const PipelineModels& models,
                                              const StageConfig& cfg);
/// Requires vdrnn_plus as well; fills S+ and its gate.
void fit_fusion_plus_models(const synth::Corpus& corpus, PipelineModels& models, const FusionParams& params);

/// Trains every network and fits every fusion model in dependency order.
PipelineModels fit_all(const synth::Corpus& corpus, const StageConfig& cfg,
                       std::vector<std::vector<drnn::LossRecord>>* histories = nullptr);

// ---- persistence ----

void save_gate(const std::filesystem::path& path, const fusion::GateModel& gate);
fusion::GateModel load_gate(const std::filesystem::path& path);
void save_covariances(const std::filesystem::path& path, const fusion::NoiseCovariances& noise);
fusion::NoiseCovariances load_covariances(const std::filesystem::path& path);
void save_store(const std::filesystem::path& keys_path, const std::filesystem::path& targets_path,
                const fusion::NeighborStore& store);
fusion::NeighborStore load_store(const std::filesystem::path& keys_path, const std::filesystem::path& targets_path,
                                 int k);

/// Writes whichever models are present into dir using fixed file names.
void save_models(const std::filesystem::path& dir, const PipelineModels& models);
/// Loads whichever model files exist in dir.
PipelineModels load_models(const std::filesystem::path& dir, const FusionParams& params);

}  // namespace skelrefine
