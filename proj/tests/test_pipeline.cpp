#include "skelrefine/errors.hpp"
#include "skelrefine/metrics.hpp"
#include "skelrefine/pipeline.hpp"
#include "skelrefine/refine.hpp"

#include <doctest.h>

#include <filesystem>

using namespace skelrefine;

namespace {

StageConfig tiny_stage_config() {
    StageConfig c;
    for (auto* d : {&c.pdrnn, &c.vdrnn, &c.vdrnn_plus}) d->hidden_sizes = {8, 8, 8};
    c.vdrnn.window_length = 10;
    c.vdrnn_plus.window_length = 10;
    c.optimizer.lbfgs.max_iterations = 5;
    c.fusion.k = 20;
    return c;
}

struct Fixture {
    synth::Corpus corpus;
    PipelineModels models;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture x;
        synth::CorpusConfig c;
        c.total_frames = 600;
        c.sequence_frames = 100;
        x.corpus = synth::build_corpus(c);
        x.models = fit_all(x.corpus, tiny_stage_config());
        return x;
    }();
    return f;
}

const SkeletonSequence& probe() { return fixture().corpus.test.front().kinect; }

bool same(const SkeletonSequence& a, const SkeletonSequence& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t t = 0; t < a.size(); ++t)
        if (a.frames[t].coords != b.frames[t].coords) return false;
    return true;
}

double max_diff(const SkeletonSequence& a, const SkeletonSequence& b) {
    double m = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) m = std::max(m, (a.frames[t].coords - b.frames[t].coords).cwiseAbs().maxCoeff());
    return m;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("variant names round trip") {
    for (Variant v : all_variants()) CHECK(parse_variant(variant_name(v)) == v);
    CHECK(all_variants().size() == 9u);
    CHECK_THROWS_AS(parse_variant("kf_minus_vdrnn"), ConfigError);
}

TEST_CASE("raw is a pass-through") {
    CHECK(same(run_pipeline(Variant::Raw, probe(), PipelineModels{}), probe()));
}

TEST_CASE("missing models raise a dependency error naming them") {
    try {
        run_pipeline(Variant::Sknnkf, probe(), PipelineModels{});
        FAIL("expected a dependency error");
    } catch (const DependencyError& e) {
        CHECK(e.missing() == "pdrnn");
    }
    PipelineModels partial = fixture().models;
    partial.store_plus.reset();
    try {
        run_pipeline(Variant::Sknnkf, probe(), partial);
        FAIL("expected a dependency error");
    } catch (const DependencyError& e) {
        CHECK(e.missing() == "store_plus");
    }
    CHECK_THROWS_AS(train_velocity_network(fixture().corpus, PipelineModels{}, tiny_stage_config()), DependencyError);
}

TEST_CASE("every variant keeps the sequence length and stays finite") {
    for (Variant v : all_variants()) {
        const auto out = run_pipeline(v, probe(), fixture().models);
        CHECK(out.size() == probe().size());
        CHECK_NOTHROW(out.validate());
        CHECK(out.encoding() == Encoding::Absolute);
    }
}

TEST_CASE("single-frame input") {
    SkeletonSequence one;
    one.frames.push_back(probe().frames[0]);
    for (Variant v : all_variants()) CHECK(run_pipeline(v, one, fixture().models).size() == 1u);
    CHECK(same(run_pipeline(Variant::KfMinusPdrnn, one, fixture().models), one));
}

TEST_CASE("sknnkf equals the manual chain pdrnn, kf, sknnkf_step") {
    const auto& m = fixture().models;
    SkeletonSequence seq = probe();
    seq.frames.resize(50);

    const auto z = refine_positions(m.pdrnn->params, seq);
    const auto v = refine_velocities(m.vdrnn->params, z);
    auto state = fusion::KalmanState::initial(z.frames[0].coords, m.kalman->Q, m.kalman->R);
    std::vector<PoseVector> x{state.x};
    for (std::size_t t = 1; t < z.size(); ++t) {
        state = fusion::kalman_step(state, v[t - 1], z.frames[t].coords).state;
        x.push_back(state.x);
    }
    SkeletonSequence xs = seq;
    for (std::size_t t = 0; t < x.size(); ++t) xs.frames[t].coords = x[t];
    const auto v_plus = refine_velocities(m.vdrnn_plus->params, xs);
    std::vector<PoseVector> out{x[0]};
    for (std::size_t t = 1; t < x.size(); ++t)
        out.push_back(fusion::sknnkf_step(*m.store_plus, *m.gate_plus, x[t], v_plus[t - 1], out.back()));

    const auto got = run_pipeline(Variant::Sknnkf, seq, m);
    double worst = 0.0;
    for (std::size_t t = 0; t < out.size(); ++t) worst = std::max(worst, (got.frames[t].coords - out[t]).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-12);
}

TEST_CASE("sknn and naive_sknn differ only in the anchor") {
    const auto& m = fixture().models;
    const auto z = refine_positions(m.pdrnn->params, probe());
    const auto v = refine_velocities(m.vdrnn->params, z);
    std::vector<PoseVector> fused{z.frames[0].coords}, naive{z.frames[0].coords};
    for (std::size_t t = 1; t < z.size(); ++t) {
        fused.push_back(fusion::sknn_step(*m.store, *m.gate, z.frames[t].coords, v[t - 1], fused.back()));
        naive.push_back(fusion::sknn_step(*m.store, *m.gate, z.frames[t].coords, v[t - 1], z.frames[t - 1].coords));
    }
    const auto a = run_pipeline(Variant::Sknn, probe(), m);
    const auto b = run_pipeline(Variant::NaiveSknn, probe(), m);
    for (std::size_t t = 0; t < z.size(); ++t) {
        CHECK(a.frames[t].coords == fused[t]);
        CHECK(b.frames[t].coords == naive[t]);
    }
}

TEST_CASE("kf_minus_pdrnn filters raw poses with network velocities") {
    const auto& m = fixture().models;
    const auto v = refine_velocities(m.vdrnn->params, probe());
    const auto want = kalman_fusion(probe(), v, *m.kalman_minus_pdrnn);
    CHECK(same(run_pipeline(Variant::KfMinusPdrnn, probe(), m), want));
}

TEST_CASE("fitted stores hold every training frame") {
    const auto& f = fixture();
    Eigen::Index frames = 0;
    for (const auto& p : f.corpus.train) frames += static_cast<Eigen::Index>(p.kinect.size());
    CHECK(f.models.store->size() == frames);
    CHECK(f.models.store_plus->size() == frames);
    CHECK(f.models.store_minus->size() == frames);
    CHECK(f.models.store->k() == 20);
    CHECK(f.models.gate->theta == 0.05);
}

TEST_CASE("models survive a save and load") {
    const auto dir = std::filesystem::temp_directory_path() / "skelrefine_models_test";
    std::filesystem::remove_all(dir);
    save_models(dir, fixture().models);
    FusionParams params;
    params.k = 20;
    const auto loaded = load_models(dir, params);
    for (Variant v : all_variants())
        CHECK(same(run_pipeline(v, probe(), loaded), run_pipeline(v, probe(), fixture().models)));
    std::filesystem::remove_all(dir);
}

TEST_CASE("model fitting is deterministic") {
    const auto again = fit_all(fixture().corpus, tiny_stage_config());
    for (Variant v : all_variants())
        CHECK(max_diff(run_pipeline(v, probe(), again), run_pipeline(v, probe(), fixture().models)) == 0.0);
}

TEST_CASE("pipelines reject relative input") {
    CHECK_THROWS_AS(run_pipeline(Variant::Raw, to_relative(probe()), fixture().models), EncodingError);
}

}
