#include "skelrefine/pipeline.hpp"

#include "skelrefine/errors.hpp"
#include "skelrefine/refine.hpp"
#include "skelrefine/sequence_io.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <string>

namespace skelrefine {

namespace {

using fusion::GateModel;
using fusion::NeighborStore;
using fusion::NoiseCovariances;
using synth::Corpus;
using synth::PairedSequence;

constexpr std::array<std::pair<Variant, std::string_view>, 9> kVariantNames = {{
    {Variant::Raw, "raw"},
    {Variant::Pdrnn, "pdrnn"},
    {Variant::Sknn, "sknn"},
    {Variant::Kf, "kf"},
    {Variant::Sknnkf, "sknnkf"},
    {Variant::SknnMinusPdrnn, "sknn_minus_pdrnn"},
    {Variant::SknnMinusVdrnn, "sknn_minus_vdrnn"},
    {Variant::NaiveSknn, "naive_sknn"},
    {Variant::KfMinusPdrnn, "kf_minus_pdrnn"},
}};

template <class T>
const T& need(const std::optional<T>& model, std::string_view stage, std::string_view name) {
    if (!model) throw DependencyError(std::string(stage), std::string(name));
    return *model;
}

// Per-pair intermediate streams of the refinement chain.
struct Refined {
    SkeletonSequence positions;               // z~
    std::vector<VelocityVector> velocities;   // v~
};

Refined refine_pair(const PipelineModels& m, const SkeletonSequence& kinect) {
    Refined r;
    r.positions = refine_positions(need(m.pdrnn, "refine", "pdrnn").params, kinect);
    r.velocities = refine_velocities(need(m.vdrnn, "refine", "vdrnn").params, r.positions);
    return r;
}

SkeletonSequence kalman_states(const PipelineModels& m, const Refined& r) {
    return kalman_fusion(r.positions, r.velocities, need(m.kalman, "kalman", "kalman"));
}

void append_columns(Eigen::MatrixXd& dst, const Eigen::MatrixXd& src) {
    const Eigen::Index old = dst.cols();
    dst.conservativeResize(kPoseDim, old + src.cols());
    dst.rightCols(src.cols()) = src;
}

std::vector<PoseVector> differences(const SkeletonSequence& a, const SkeletonSequence& b) {
    std::vector<PoseVector> out;
    for (std::size_t t = 0; t < a.size(); ++t) out.push_back(a.frames[t].coords - b.frames[t].coords);
    return out;
}

std::vector<VelocityVector> differences(const std::vector<VelocityVector>& a, const std::vector<VelocityVector>& b) {
    std::vector<VelocityVector> out;
    for (std::size_t t = 0; t < a.size(); ++t) out.push_back(a[t] - b[t]);
    return out;
}

void extend(std::vector<PoseVector>& dst, const std::vector<PoseVector>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

drnn::TrainingBatch velocity_batch(const std::vector<std::vector<VelocityVector>>& inputs,
                                   const std::vector<std::vector<VelocityVector>>& targets, int window_length) {
    std::vector<Eigen::MatrixXd> in, out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        in.push_back(to_matrix(inputs[i]));
        out.push_back(to_matrix(targets[i]));
    }
    return drnn::make_windows(in, out, window_length);
}

drnn::TrainResult train_checked(const drnn::DrnnConfig& cfg, const drnn::TrainingBatch& train,
                                const drnn::TrainingBatch& val, const drnn::OptimizerSpec& spec,
                                std::string_view stage) {
    if (train.empty()) throw DataError(std::string(stage) + ": training split yields no windows");
    if (val.empty()) throw DataError(std::string(stage) + ": validation split yields no windows");
    return drnn::train(cfg, train, val, spec);
}

nlohmann::json vec_json(const PoseVector& v) { return std::vector<double>(v.data(), v.data() + kPoseDim); }

PoseVector vec_from_json(const nlohmann::json& j, const char* name) {
    const auto v = j.at(name).get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(kPoseDim))
        throw DimensionError(std::string("'") + name + "' must hold 48 values");
    return Eigen::Map<const PoseVector>(v.data());
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    os << j.dump() << '\n';
}

}  // namespace

std::string_view variant_name(Variant v) {
    for (const auto& [variant, name] : kVariantNames)
        if (variant == v) return name;
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    for (const auto& [variant, n] : kVariantNames)
        if (n == name) return variant;
    throw ConfigError("unknown variant '" + std::string(name) + "'");
}

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v = [] {
        std::vector<Variant> out;
        for (const auto& [variant, name] : kVariantNames) out.push_back(variant);
        return out;
    }();
    return v;
}

SkeletonSequence kalman_fusion(const SkeletonSequence& measurements, const std::vector<VelocityVector>& controls,
                               const NoiseCovariances& noise) {
    std::vector<PoseVector> z;
    for (const auto& f : measurements.frames) z.push_back(f.coords);
    const auto x = fusion::kalman_filter(z, controls, noise);
    SkeletonSequence out = measurements;
    for (std::size_t t = 0; t < x.size(); ++t) out.frames[t].coords = x[t];
    return out;
}

SkeletonSequence soft_knn_fusion(const SkeletonSequence& queries, const std::vector<VelocityVector>& velocities,
                                 const NeighborStore& store, const GateModel& gate, Anchor anchor) {
    if (queries.empty()) throw InsufficientFramesError(0, 1);
    if (velocities.size() + 1 != queries.size())
        throw DimensionError("soft-KNN needs one velocity per frame after the first");
    SkeletonSequence out = queries;
    for (std::size_t t = 1; t < queries.size(); ++t) {
        const PoseVector& prev =
            anchor == Anchor::PreviousFused ? out.frames[t - 1].coords : queries.frames[t - 1].coords;
        out.frames[t].coords = fusion::sknn_step(store, gate, queries.frames[t].coords, velocities[t - 1], prev);
    }
    return out;
}

SkeletonSequence run_pipeline(Variant variant, const SkeletonSequence& seq, const PipelineModels& m) {
    seq.validate();
    if (seq.encoding() != Encoding::Absolute) throw EncodingError("pipelines expect an absolute sequence");
    const std::string stage(variant_name(variant));

    switch (variant) {
        case Variant::Raw:
            return seq;
        case Variant::Pdrnn:
            return refine_positions(need(m.pdrnn, stage, "pdrnn").params, seq);
        default:
            break;
    }
    if (seq.size() < 2) {
        // A single frame has no velocity; every fusion method starts from its first input.
        if (variant == Variant::SknnMinusPdrnn || variant == Variant::KfMinusPdrnn) return seq;
        return refine_positions(need(m.pdrnn, stage, "pdrnn").params, seq);
    }

    switch (variant) {
        case Variant::Sknn: {
            const auto r = refine_pair(m, seq);
            return soft_knn_fusion(r.positions, r.velocities, need(m.store, stage, "store"), need(m.gate, stage, "gate"));
        }
        case Variant::Kf: {
            const auto r = refine_pair(m, seq);
            return kalman_fusion(r.positions, r.velocities, need(m.kalman, stage, "kalman"));
        }
        case Variant::Sknnkf: {
            const auto r = refine_pair(m, seq);
            const auto x = kalman_fusion(r.positions, r.velocities, need(m.kalman, stage, "kalman"));
            const auto v_plus = refine_velocities(need(m.vdrnn_plus, stage, "vdrnn_plus").params, x);
            return soft_knn_fusion(x, v_plus, need(m.store_plus, stage, "store_plus"),
                                   need(m.gate_plus, stage, "gate_plus"));
        }
        case Variant::SknnMinusPdrnn: {
            const auto v = refine_velocities(need(m.vdrnn, stage, "vdrnn").params, seq);
            return soft_knn_fusion(seq, v, need(m.store_minus, stage, "store_minus"),
                                   need(m.gate_minus_pdrnn, stage, "gate_minus_pdrnn"));
        }
        case Variant::SknnMinusVdrnn: {
            const auto z = refine_positions(need(m.pdrnn, stage, "pdrnn").params, seq);
            return soft_knn_fusion(z, velocities(z), need(m.store, stage, "store"),
                                   need(m.gate_raw_velocity, stage, "gate_raw_velocity"));
        }
        case Variant::NaiveSknn: {
            const auto r = refine_pair(m, seq);
            return soft_knn_fusion(r.positions, r.velocities, need(m.store, stage, "store"),
                                   need(m.gate, stage, "gate"), Anchor::PreviousQuery);
        }
        case Variant::KfMinusPdrnn: {
            const auto v = refine_velocities(need(m.vdrnn, stage, "vdrnn").params, seq);
            return kalman_fusion(seq, v, need(m.kalman_minus_pdrnn, stage, "kalman_minus_pdrnn"));
        }
        default:
            break;
    }
    throw ConfigError("unhandled variant " + stage);
}

const drnn::OptimizerSpec& StageConfig::optimizer_for(Stage stage) const {
    const auto& slot = stage == Stage::Pdrnn ? pdrnn_optimizer : stage == Stage::Vdrnn ? vdrnn_optimizer : vdrnn_plus_optimizer;
    return slot ? *slot : optimizer;
}

drnn::TrainingBatch position_windows(const std::vector<PairedSequence>& pairs, int window_length) {
    std::vector<Eigen::MatrixXd> in, out;
    for (const auto& p : pairs) {
        in.push_back(to_matrix(to_relative(p.kinect)));
        out.push_back(to_matrix(to_relative(p.mocap)));
    }
    return drnn::make_windows(in, out, window_length);
}

drnn::TrainResult train_position_network(const Corpus& corpus, const StageConfig& cfg) {
    const int w = cfg.pdrnn.window_length;
    return train_checked(cfg.pdrnn, position_windows(corpus.train, w), position_windows(corpus.validation, w),
                         cfg.optimizer_for(Stage::Pdrnn), "pdrnn");
}

drnn::TrainResult train_velocity_network(const Corpus& corpus, const PipelineModels& m, const StageConfig& cfg) {
    const auto& pdrnn = need(m.pdrnn, "vdrnn", "pdrnn");
    auto batch = [&](const std::vector<PairedSequence>& pairs) {
        std::vector<std::vector<VelocityVector>> in, out;
        for (const auto& p : pairs) {
            in.push_back(velocities(refine_positions(pdrnn.params, p.kinect)));
            out.push_back(velocities(p.mocap));
        }
        return velocity_batch(in, out, cfg.vdrnn.window_length);
    };
    return train_checked(cfg.vdrnn, batch(corpus.train), batch(corpus.validation), cfg.optimizer_for(Stage::Vdrnn), "vdrnn");
}

void fit_fusion_models(const Corpus& corpus, PipelineModels& m, const FusionParams& params) {
    need(m.pdrnn, "fusion", "pdrnn");
    need(m.vdrnn, "fusion", "vdrnn");

    Eigen::MatrixXd keys(kPoseDim, 0), raw_keys(kPoseDim, 0), targets(kPoseDim, 0);
    for (const auto& p : corpus.train) {
        append_columns(keys, to_matrix(refine_positions(m.pdrnn->params, p.kinect)));
        append_columns(raw_keys, to_matrix(p.kinect));
        append_columns(targets, to_matrix(p.mocap));
    }
    m.store.emplace(keys, targets, params.k);
    m.store_minus.emplace(raw_keys, targets, params.k);

    std::vector<PoseVector> pos_refined, pos_raw;
    std::vector<VelocityVector> vel_refined, vel_unrefined, vel_raw_refined;
    for (const auto& p : corpus.validation) {
        const auto r = refine_pair(m, p.kinect);
        const auto truth_v = velocities(p.mocap);
        extend(pos_refined, differences(p.mocap, r.positions));
        extend(pos_raw, differences(p.mocap, p.kinect));
        extend(vel_refined, differences(truth_v, r.velocities));
        extend(vel_unrefined, differences(truth_v, velocities(r.positions)));
        extend(vel_raw_refined, differences(truth_v, refine_velocities(m.vdrnn->params, p.kinect)));
    }
    m.gate = fusion::estimate_gate(vel_refined, params.theta);
    m.gate_raw_velocity = fusion::estimate_gate(vel_unrefined, params.theta);
    m.gate_minus_pdrnn = fusion::estimate_gate(vel_raw_refined, params.theta);
    m.kalman = fusion::estimate_noise_covariances(pos_refined, vel_refined);
    m.kalman_minus_pdrnn = fusion::estimate_noise_covariances(pos_raw, vel_raw_refined);
}

drnn::TrainResult train_velocity_plus_network(const Corpus& corpus, const PipelineModels& m, const StageConfig& cfg) {
    need(m.pdrnn, "vdrnn_plus", "pdrnn");
    need(m.vdrnn, "vdrnn_plus", "vdrnn");
    need(m.kalman, "vdrnn_plus", "kalman");
    auto batch = [&](const std::vector<PairedSequence>& pairs) {
        std::vector<std::vector<VelocityVector>> in, out;
        for (const auto& p : pairs) {
            in.push_back(velocities(kalman_states(m, refine_pair(m, p.kinect))));
            out.push_back(velocities(p.mocap));
        }
        return velocity_batch(in, out, cfg.vdrnn_plus.window_length);
    };
    return train_checked(cfg.vdrnn_plus, batch(corpus.train), batch(corpus.validation),
                         cfg.optimizer_for(Stage::VdrnnPlus), "vdrnn_plus");
}

void fit_fusion_plus_models(const Corpus& corpus, PipelineModels& m, const FusionParams& params) {
    const auto& plus = need(m.vdrnn_plus, "fusion_plus", "vdrnn_plus");
    need(m.kalman, "fusion_plus", "kalman");

    Eigen::MatrixXd keys(kPoseDim, 0), targets(kPoseDim, 0);
    for (const auto& p : corpus.train) {
        append_columns(keys, to_matrix(kalman_states(m, refine_pair(m, p.kinect))));
        append_columns(targets, to_matrix(p.mocap));
    }
    m.store_plus.emplace(keys, targets, params.k);

    std::vector<VelocityVector> residuals;
    for (const auto& p : corpus.validation) {
        const auto x = kalman_states(m, refine_pair(m, p.kinect));
        extend(residuals, differences(velocities(p.mocap), refine_velocities(plus.params, x)));
    }
    m.gate_plus = fusion::estimate_gate(residuals, params.theta_plus);
}

PipelineModels fit_all(const Corpus& corpus, const StageConfig& cfg,
                       std::vector<std::vector<drnn::LossRecord>>* histories) {
    PipelineModels m;
    auto keep = [histories](const drnn::TrainResult& r) {
        if (histories) histories->push_back(r.history);
    };
    auto p = train_position_network(corpus, cfg);
    keep(p);
    m.pdrnn = drnn::DrnnModel{cfg.pdrnn, std::move(p.params)};
    auto v = train_velocity_network(corpus, m, cfg);
    keep(v);
    m.vdrnn = drnn::DrnnModel{cfg.vdrnn, std::move(v.params)};
    fit_fusion_models(corpus, m, cfg.fusion);
    auto vp = train_velocity_plus_network(corpus, m, cfg);
    keep(vp);
    m.vdrnn_plus = drnn::DrnnModel{cfg.vdrnn_plus, std::move(vp.params)};
    fit_fusion_plus_models(corpus, m, cfg.fusion);
    return m;
}

void save_gate(const std::filesystem::path& path, const GateModel& gate) {
    write_json(path, {{"sigma2", vec_json(gate.sigma2)}, {"theta", gate.theta}});
}

GateModel load_gate(const std::filesystem::path& path) {
    const auto j = read_json(path);
    GateModel g;
    try {
        g.sigma2 = vec_from_json(j, "sigma2");
        g.theta = j.at("theta").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    g.validate();
    return g;
}

void save_covariances(const std::filesystem::path& path, const NoiseCovariances& noise) {
    write_json(path, {{"R", vec_json(noise.R)}, {"Q", vec_json(noise.Q)}});
}

NoiseCovariances load_covariances(const std::filesystem::path& path) {
    const auto j = read_json(path);
    NoiseCovariances n;
    try {
        n.R = vec_from_json(j, "R");
        n.Q = vec_from_json(j, "Q");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if ((n.R.array() < 0.0).any() || (n.Q.array() < 0.0).any())
        throw ParseError(path.string() + ": negative variance");
    return n;
}

void save_store(const std::filesystem::path& keys_path, const std::filesystem::path& targets_path,
                const NeighborStore& store) {
    save_sequence(keys_path, sequence_from_matrix(store.keys(), Encoding::Absolute, 30.0));
    save_sequence(targets_path, sequence_from_matrix(store.targets(), Encoding::Absolute, 30.0));
}

NeighborStore load_store(const std::filesystem::path& keys_path, const std::filesystem::path& targets_path, int k) {
    return NeighborStore(to_matrix(load_sequence(keys_path)), to_matrix(load_sequence(targets_path)), k);
}

namespace {

struct StoreFiles {
    const char* keys;
    const char* targets;
};

constexpr StoreFiles kStoreS{"store_keys.jsonl", "store_targets.jsonl"};
constexpr StoreFiles kStorePlus{"store_plus_keys.jsonl", "store_plus_targets.jsonl"};
constexpr StoreFiles kStoreMinus{"store_minus_keys.jsonl", "store_minus_targets.jsonl"};

}  // namespace

void save_models(const std::filesystem::path& dir, const PipelineModels& m) {
    std::filesystem::create_directories(dir);
    if (m.pdrnn) drnn::save_checkpoint(dir / "pdrnn.json", *m.pdrnn);
    if (m.vdrnn) drnn::save_checkpoint(dir / "vdrnn.json", *m.vdrnn);
    if (m.vdrnn_plus) drnn::save_checkpoint(dir / "vdrnn_plus.json", *m.vdrnn_plus);
    if (m.store) save_store(dir / kStoreS.keys, dir / kStoreS.targets, *m.store);
    if (m.store_plus) save_store(dir / kStorePlus.keys, dir / kStorePlus.targets, *m.store_plus);
    if (m.store_minus) save_store(dir / kStoreMinus.keys, dir / kStoreMinus.targets, *m.store_minus);
    if (m.gate) save_gate(dir / "gate.json", *m.gate);
    if (m.gate_plus) save_gate(dir / "gate_plus.json", *m.gate_plus);
    if (m.gate_raw_velocity) save_gate(dir / "gate_raw_velocity.json", *m.gate_raw_velocity);
    if (m.gate_minus_pdrnn) save_gate(dir / "gate_minus_pdrnn.json", *m.gate_minus_pdrnn);
    if (m.kalman) save_covariances(dir / "kalman.json", *m.kalman);
    if (m.kalman_minus_pdrnn) save_covariances(dir / "kalman_minus_pdrnn.json", *m.kalman_minus_pdrnn);
}

PipelineModels load_models(const std::filesystem::path& dir, const FusionParams& params) {
    namespace fs = std::filesystem;
    PipelineModels m;
    auto has = [&dir](const char* name) { return fs::exists(dir / name); };
    if (has("pdrnn.json")) m.pdrnn = drnn::load_checkpoint(dir / "pdrnn.json");
    if (has("vdrnn.json")) m.vdrnn = drnn::load_checkpoint(dir / "vdrnn.json");
    if (has("vdrnn_plus.json")) m.vdrnn_plus = drnn::load_checkpoint(dir / "vdrnn_plus.json");
    if (has(kStoreS.keys)) m.store = load_store(dir / kStoreS.keys, dir / kStoreS.targets, params.k);
    if (has(kStorePlus.keys)) m.store_plus = load_store(dir / kStorePlus.keys, dir / kStorePlus.targets, params.k);
    if (has(kStoreMinus.keys))
        m.store_minus = load_store(dir / kStoreMinus.keys, dir / kStoreMinus.targets, params.k);
    auto gate = [&](const char* name, std::optional<GateModel>& dst, double theta) {
        if (!has(name)) return;
        dst = load_gate(dir / name);
        dst->theta = theta;
    };
    gate("gate.json", m.gate, params.theta);
    gate("gate_plus.json", m.gate_plus, params.theta_plus);
    gate("gate_raw_velocity.json", m.gate_raw_velocity, params.theta);
    gate("gate_minus_pdrnn.json", m.gate_minus_pdrnn, params.theta);
    if (has("kalman.json")) m.kalman = load_covariances(dir / "kalman.json");
    if (has("kalman_minus_pdrnn.json")) m.kalman_minus_pdrnn = load_covariances(dir / "kalman_minus_pdrnn.json");
    return m;
}

}  // namespace skelrefine
