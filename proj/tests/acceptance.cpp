// Acceptance checks 1-8. Prints one PASS/FAIL line per criterion (also written to acceptance_report.txt in
// the working directory); exit status is the number of failures.
//   skelrefine_acceptance [pipeline-config.json] [--skip-pipeline]
#include "oracles.hpp"
#include "skelrefine/commands.hpp"
#include "skelrefine/fusion.hpp"
#include "skelrefine/metrics.hpp"
#include "skelrefine/pipeline.hpp"
#include "skelrefine/skeleton.hpp"
#include "skelrefine/synth.hpp"
#include "test_util.hpp"

#include <Eigen/Geometry>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

using namespace skelrefine;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

Outcome gradient_check() {
    Outcome o;
    const auto t0 = Clock::now();
    double worst = 0.0;
    const int nets = 25;
    for (int seed = 0; seed < nets; ++seed) {
        const auto n = oracle::random_tiny_net(1000 + static_cast<std::uint64_t>(seed));
        const auto analytic = drnn::loss_and_gradient(n.params, n.batch).gradient.flatten();
        const auto fd = oracle::finite_difference_gradient(n.params, n.batch);
        for (Eigen::Index i = 0; i < fd.size(); ++i)
            worst = std::max(worst, std::abs(analytic(i) - fd(i)) / std::max(1.0, std::abs(fd(i))));
    }
    const double elapsed = seconds_since(t0);
    o.require(worst < 1e-5, "worst relative error " + fmt(worst));
    o.require(elapsed < 10.0, "took " + fmt(elapsed) + " s");
    o.detail = std::to_string(nets) + " nets, worst relative error " + fmt(worst) + ", " + fmt(elapsed) + " s" +
               (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

Outcome kalman_oracle() {
    using namespace fusion;
    Outcome o;
    // Q = R = 1, x0 = z0 = 0, P0 = R; values worked out by hand.
    const double z[] = {0.0, 1.0, 3.0, 2.0, 4.0, 5.0};
    const double v[] = {0.5, 1.0, -0.5, 1.5, 0.5};
    const double gain[] = {2.0 / 3, 5.0 / 8, 13.0 / 21, 34.0 / 55, 89.0 / 144};
    const double x[] = {5.0 / 6, 41.0 / 16, 85.0 / 42, 42.0 / 11, 455.0 / 96};
    double table = 0.0;
    auto state = KalmanState::initial(PoseVector::Constant(z[0]), PoseVector::Ones(), PoseVector::Ones());
    for (int t = 1; t <= 5; ++t) {
        const auto step = kalman_step(state, VelocityVector::Constant(v[t - 1]), PoseVector::Constant(z[t]));
        table = std::max({table, (step.gain.array() - gain[t - 1]).abs().maxCoeff(),
                          (step.pose.array() - x[t - 1]).abs().maxCoeff(),
                          (step.state.P.array() - gain[t - 1]).abs().maxCoeff()});
        state = step.state;
    }
    o.require(table < 1e-12, "table deviation " + fmt(table));

    std::mt19937_64 rng(7);
    double prediction = 0.0, integration = 0.0;
    KalmanState a;  // R -> infinity: the filter follows the prediction
    a.x = testing::random_pose_vector(rng);
    a.P = PoseVector::Ones();
    a.Q = PoseVector::Ones();
    a.R = PoseVector::Constant(1e12);
    KalmanState b;  // Q = 0, P0 = 0: pure integration of the controls
    b.x = testing::random_pose_vector(rng);
    b.R = PoseVector::Ones();
    PoseVector integral = b.x;
    for (int t = 0; t < 20; ++t) {
        const PoseVector va = testing::random_pose_vector(rng);
        const PoseVector prior = a.x + va;
        const auto sa = kalman_step(a, va, testing::random_pose_vector(rng));
        prediction = std::max(prediction, (sa.pose - prior).cwiseAbs().maxCoeff());
        a = sa.state;

        const PoseVector vb = testing::random_pose_vector(rng);
        integral += vb;
        const auto sb = kalman_step(b, vb, testing::random_pose_vector(rng));
        integration = std::max(integration, (sb.pose - integral).cwiseAbs().maxCoeff());
        b = sb.state;
    }
    o.require(prediction < 1e-6, "R->inf deviation " + fmt(prediction));
    o.require(integration < 1e-6, "Q=0 deviation " + fmt(integration));
    o.detail = "table " + fmt(table) + ", R->inf " + fmt(prediction) + ", Q=0 " + fmt(integration) +
               (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

Outcome degeneracy() {
    Outcome o;
    // A corrupted 100-frame sequence filtered with its own velocities as controls.
    synth::MotionConfig m;
    m.n_frames = 100;
    m.seed = 11;
    synth::CorruptionConfig c;
    c.seed = 12;
    const auto z = synth::corrupt(synth::generate_ground_truth(m), c);
    std::mt19937_64 rng(13);
    fusion::NoiseCovariances noise;
    noise.R = testing::random_pose_vector(rng, 0.01).cwiseAbs().array() + 1e-6;
    noise.Q = testing::random_pose_vector(rng, 0.01).cwiseAbs().array() + 1e-6;
    const auto x = kalman_fusion(z, velocities(z), noise);
    double worst = 0.0;
    for (std::size_t t = 0; t < z.size(); ++t)
        worst = std::max(worst, (x.frames[t].coords - z.frames[t].coords).cwiseAbs().maxCoeff());
    o.require(x.size() == 100 && worst < 1e-12, "max deviation " + fmt(worst));
    o.detail = "max |x_t - z_t| over 100 frames " + fmt(worst);
    return o;
}

Outcome soft_knn_oracle() {
    using namespace fusion;
    Outcome o;
    std::mt19937_64 rng(5);
    std::vector<PoseVector> keys, targets;
    for (int i = 0; i < 1000; ++i) {
        // Every fifth key repeats an earlier one so that distance ties occur.
        keys.push_back(i % 5 == 4 ? keys[static_cast<std::size_t>(i / 2)] : testing::random_pose_vector(rng, 0.1));
        targets.push_back(testing::random_pose_vector(rng, 0.1));
    }
    Eigen::MatrixXd km(kPoseDim, 1000), tm(kPoseDim, 1000);
    for (int i = 0; i < 1000; ++i) {
        km.col(i) = keys[static_cast<std::size_t>(i)];
        tm.col(i) = targets[static_cast<std::size_t>(i)];
    }
    const int k = 300;
    NeighborStore store(km, tm, k);
    GateModel g;
    for (int j = 0; j < kPoseDim; ++j) g.sigma2(j) = j % 7 == 0 ? 1e-8 : 0.02;
    g.theta = 0.05;
    int mismatches = 0, fallbacks = 0, tied_queries = 0;
    for (int q = 0; q < 100; ++q) {
        const PoseVector query = q % 10 == 0 ? keys[static_cast<std::size_t>(q * 5 + 4)] : testing::random_pose_vector(rng, 0.1);
        tied_queries += q % 10 == 0;
        const PoseVector vel = testing::random_pose_vector(rng, 0.05);
        const PoseVector anchor = testing::random_pose_vector(rng, 0.1);
        std::vector<int> kept;
        const auto want = oracle::soft_knn(keys, targets, k, g.sigma2, g.theta, query, vel, anchor, &kept);
        const auto got = soft_knn(store, g, query, vel, anchor);
        bool same = got.pose == want;
        for (int j = 0; j < kPoseDim; ++j) {
            same = same && got.retained(j) == kept[static_cast<std::size_t>(j)];
            fallbacks += kept[static_cast<std::size_t>(j)] == 0;
        }
        mismatches += !same;
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " mismatching queries");
    o.require(fallbacks > 0, "fallback never exercised");
    o.detail = "100 queries, 1000 entries, K=300: " + std::to_string(mismatches) + " mismatches, " +
               std::to_string(fallbacks) + " fallback components, " + std::to_string(tied_queries) +
               " queries on duplicated keys";
    return o;
}

Outcome metric_identities() {
    using namespace metrics;
    Outcome o;
    std::mt19937_64 rng(4);
    const auto truth = testing::random_sequence(rng, 40, 0.1);
    const auto pred = testing::random_sequence(rng, 40, 0.1);
    o.require(aje(truth, truth) == 0.0, "AJE(x, x) != 0");

    auto shifted = pred;
    for (auto& f : shifted.frames) f.coords.array() += 0.37;
    const auto je = jerk_error(pred, truth), je_shift = jerk_error(shifted, truth);
    double offset = 0.0;
    for (std::size_t t = 0; t < je.size(); ++t) offset = std::max(offset, (je[t] - je_shift[t]).cwiseAbs().maxCoeff());
    o.require(offset < 1e-12, "offset changed JE by " + fmt(offset));

    SkeletonSequence quad;
    for (int t = 0; t < 40; ++t) {
        SkeletonPose p;
        for (int c = 0; c < kPoseDim; ++c) p.coords(c) = 0.1 * c - 0.03 * t + (0.002 + 1e-4 * c) * t * t;
        quad.frames.push_back(p);
    }
    double quadratic = 0.0;
    for (const auto& j : jerk(quad)) quadratic = std::max(quadratic, j.cwiseAbs().maxCoeff());
    o.require(quadratic < 1e-12, "quadratic jerk " + fmt(quadratic));

    const auto r = evaluate(pred, truth);
    double bins = 0.0;
    for (double h : r.histogram) bins += h;
    o.require(std::abs(bins - r.aje) < 1e-12, "histogram sum off by " + fmt(std::abs(bins - r.aje)));
    o.detail = "AJE(x,x)=" + fmt(aje(truth, truth)) + ", offset " + fmt(offset) + ", quadratic " + fmt(quadratic) +
               ", |sum(bins)-AJE| " + fmt(std::abs(bins - r.aje)) + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

Outcome round_trips() {
    Outcome o;
    std::mt19937_64 rng(11);
    double pose = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto p = testing::random_pose(rng);
        pose = std::max(pose, (to_absolute(to_relative(p)).coords - p.coords).cwiseAbs().maxCoeff());
        const auto r = testing::random_pose(rng, Encoding::RelativeToParent);
        pose = std::max(pose, (to_relative(to_absolute(r)).coords - r.coords).cwiseAbs().maxCoeff());
    }
    o.require(pose < 1e-12, "pose round trip " + fmt(pose));

    std::vector<Vec3> src, dst;
    std::normal_distribution<double> g(0.0, 0.5);
    const Mat3 rot = (Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()) *
                      Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ())).toRotationMatrix();
    const Vec3 shift(1.0, 2.0, 3.0);
    for (int i = 0; i < kNumJoints; ++i) {
        src.emplace_back(g(rng), g(rng), g(rng));
        dst.push_back(rot * src.back() + shift);
    }
    const auto xf = rigid_align(src, dst);
    const double align = std::max((xf.rotation - rot).cwiseAbs().maxCoeff(), (xf.translation - shift).cwiseAbs().maxCoeff());
    o.require(align < 1e-9, "rigid_align error " + fmt(align));
    o.detail = "pose round trip " + fmt(pose) + ", rigid_align " + fmt(align);
    return o;
}

// Runs the whole pipeline through the command-line front end into `dir`.
double run_pipeline_cli(const fs::path& config, const fs::path& dir) {
    fs::remove_all(dir);
    std::ostringstream out, err;
    const auto t0 = Clock::now();
    const int code = cli::run({"run", "--config", config.string(), "--out", dir.string()}, out, err);
    if (code != 0) throw std::runtime_error("pipeline run failed (exit " + std::to_string(code) + "): " + err.str());
    std::cout << err.str();
    return seconds_since(t0);
}

Outcome end_to_end(const fs::path& dir, double seconds) {
    Outcome o;
    std::ifstream is(dir / "reports" / "summary.json");
    const auto s = nlohmann::json::parse(is);
    auto ape = [&](const char* v) { return s.at(v).at("ape").get<double>(); };
    auto aje = [&](const char* v) { return s.at(v).at("aje").get<double>(); };
    auto below = [&](double a, double b, const std::string& what) {
        o.require(a <= 0.9 * b, what + " (" + fmt(a) + " vs " + fmt(b) + ")");
    };
    below(ape("pdrnn"), ape("raw"), "APE pdrnn not 10% below raw");
    below(aje("pdrnn"), aje("raw"), "AJE pdrnn not 10% below raw");
    for (const char* v : {"sknn", "kf", "sknnkf"}) below(aje(v), aje("pdrnn"), std::string("AJE ") + v + " not 10% below pdrnn");
    o.require(seconds < 1800.0, "pipeline took " + fmt(seconds) + " s");
    const std::string numbers = "APE raw " + fmt(ape("raw")) + " pdrnn " + fmt(ape("pdrnn")) + "; AJE raw " +
                                fmt(aje("raw")) + " pdrnn " + fmt(aje("pdrnn")) + " sknn " + fmt(aje("sknn")) + " kf " +
                                fmt(aje("kf")) + " sknnkf " + fmt(aje("sknnkf")) + "; " + fmt(seconds) + " s";
    o.detail = o.pass ? numbers : numbers + " (" + o.detail + ")";
    return o;
}

Outcome determinism(const fs::path& a, const fs::path& b) {
    Outcome o;
    std::size_t files = 0, differing = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        auto slurp = [](const fs::path& p) {
            std::ifstream is(p, std::ios::binary);
            std::stringstream ss;
            ss << is.rdbuf();
            return ss.str();
        };
        ++files;
        if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) {
            ++differing;
            o.require(false, "differs: " + rel.string());
        }
    }
    o.require(files > 0, "no output files");
    o.detail = std::to_string(files) + " files compared, " + std::to_string(differing) + " differ" +
               (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path config = SKELREFINE_ACCEPTANCE_CONFIG;
    bool pipeline = true;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--skip-pipeline")
            pipeline = false;
        else
            config = arg;
    }

    int failures = 0;
    std::ofstream log("acceptance_report.txt");
    auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failures += !o.pass;
        std::ostringstream line;
        line << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << '\n';
        std::cout << line.str() << std::flush;
        log << line.str() << std::flush;
    };

    report(1, "gradient correctness", gradient_check);
    report(2, "Kalman oracle", kalman_oracle);
    report(3, "kF-vDRNN degeneracy", degeneracy);
    report(4, "soft-KNN oracle", soft_knn_oracle);
    report(5, "metric identities", metric_identities);
    report(6, "round trips", round_trips);
    if (!pipeline) return failures;

    const fs::path root = fs::temp_directory_path() / "skelrefine_acceptance";
    double first = 0.0;
    bool ran = false;
    report(7, "end-to-end ordering", [&] {
        first = run_pipeline_cli(config, root / "a");
        ran = true;
        return end_to_end(root / "a", first);
    });
    report(8, "determinism", [&] {
        if (!ran) throw std::runtime_error("first pipeline run did not complete");
        run_pipeline_cli(config, root / "b");
        return determinism(root / "a", root / "b");
    });
    return failures;
}
