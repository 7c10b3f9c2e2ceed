#include "skelrefine/synth.hpp"

#include "skelrefine/errors.hpp"
#include "skelrefine/sequence_io.hpp"

#include <Eigen/Geometry>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace skelrefine::synth {

namespace {

using J = JointId;

// Rest-pose offsets from each joint's parent, body frame: x to the sensor's right, y up, z away.
const std::array<Vec3, kNumJoints>& rest_offsets() {
    static const std::array<Vec3, kNumJoints> offsets = {
        Vec3(0.0, 0.0, 0.0),      // spinemid
        Vec3(0.0, -0.22, 0.0),    // spinebase
        Vec3(0.0, 0.30, 0.0),     // spineshoulder
        Vec3(0.0, 0.08, 0.0),     // neck
        Vec3(-0.17, -0.02, 0.0),  // shoulderleft
        Vec3(0.0, -0.27, 0.0),    // elbowleft
        Vec3(0.0, -0.25, 0.0),    // wristleft
        Vec3(0.17, -0.02, 0.0),   // shoulderright
        Vec3(0.0, -0.27, 0.0),    // elbowright
        Vec3(0.0, -0.25, 0.0),    // wristright
        Vec3(-0.08, -0.06, 0.0),  // hipleft
        Vec3(0.0, -0.42, 0.0),    // kneeleft
        Vec3(0.0, -0.40, 0.0),    // ankleleft
        Vec3(0.08, -0.06, 0.0),   // hipright
        Vec3(0.0, -0.42, 0.0),    // kneeright
        Vec3(0.0, -0.40, 0.0),    // ankleright
    };
    return offsets;
}

// Peak joint-angle amplitude (radians) of the bone ending at each joint.
constexpr std::array<double, kNumJoints> kAngleLimit = {
    0.0, 0.10, 0.20, 0.15, 0.10, 1.00, 0.80, 0.10, 1.00, 0.80, 0.10, 0.60, 0.50, 0.10, 0.60, 0.50,
};

const Vec3 kRootBase(0.0, -0.2, 2.8);

constexpr int kHarmonics = 2;

// One activity: a base frequency and per-joint, per-axis harmonic amplitudes and phases.
struct Activity {
    double base_hz = 0.5;
    std::array<std::array<std::array<double, kHarmonics>, 3>, kNumJoints> amp{};
    std::array<std::array<std::array<double, kHarmonics>, 3>, kNumJoints> phase{};
};

Activity make_activity(std::uint64_t library_seed, int activity, double bandwidth_hz) {
    std::mt19937_64 rng(derive_seed(library_seed, 0xAC7, static_cast<std::uint64_t>(activity)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Activity a;
    a.base_hz = (0.25 + 0.25 * unit(rng)) * bandwidth_hz / kHarmonics;
    // Limb activity levels: left arm, right arm, left leg, right leg, trunk.
    std::array<double, 5> limb{};
    for (auto& l : limb) l = 0.2 + 0.8 * unit(rng);
    auto limb_of = [](int j) {
        if (j >= index(J::ShoulderLeft) && j <= index(J::WristLeft)) return 0;
        if (j >= index(J::ShoulderRight) && j <= index(J::WristRight)) return 1;
        if (j >= index(J::HipLeft) && j <= index(J::AnkleLeft)) return 2;
        if (j >= index(J::HipRight)) return 3;
        return 4;
    };
    for (int j = 1; j < kNumJoints; ++j)
        for (int axis = 0; axis < 3; ++axis)
            for (int h = 0; h < kHarmonics; ++h) {
                const double falloff = h == 0 ? 1.0 : 0.35;
                a.amp[j][axis][h] = kAngleLimit[j] * limb[limb_of(j)] * falloff * unit(rng);
                a.phase[j][axis][h] = 2.0 * std::numbers::pi * unit(rng);
            }
    return a;
}

Mat3 rotation_xyz(double ax, double ay, double az) {
    return (Eigen::AngleAxisd(az, Vec3::UnitZ()) * Eigen::AngleAxisd(ay, Vec3::UnitY()) *
            Eigen::AngleAxisd(ax, Vec3::UnitX()))
        .toRotationMatrix();
}

std::string pair_name(const char* split, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03zu", split, i);
    return buf;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ b);
}

std::array<double, kNumJoints> default_bone_lengths() {
    std::array<double, kNumJoints> len{};
    for (int j = 0; j < kNumJoints; ++j) len[j] = rest_offsets()[j].norm();
    return len;
}

void MotionConfig::validate() const {
    if (n_frames < 1) throw ConfigError("motion needs at least one frame");
    if (!(frame_rate_hz > 0.0)) throw ConfigError("frame rate must be positive");
    if (!(motion_bandwidth_hz > 0.0) || !(motion_bandwidth_hz < frame_rate_hz / 2.0))
        throw ConfigError("motion bandwidth must lie in (0, frame_rate/2)");
    for (int j = 1; j < kNumJoints; ++j)
        if (!(bone_lengths[j] > 0.0)) throw ConfigError("bone lengths must be positive");
    if (amplitude_scale < 0.0 || root_path_amplitude < 0.0) throw ConfigError("amplitudes must be non-negative");
    if (activity < 0) throw ConfigError("activity index must be non-negative");
}

void CorruptionConfig::validate() const {
    if (jitter_sigma < 0.0 || displacement_sigma < 0.0) throw ConfigError("corruption sigmas must be non-negative");
    if (occlusion_rate < 0.0 || occlusion_rate > 1.0) throw ConfigError("occlusion rate must lie in [0, 1]");
    if (occlusion_min_frames < 1 || occlusion_max_frames < occlusion_min_frames)
        throw ConfigError("occlusion duration range is invalid");
}

CorruptionConfig CorruptionConfig::none() {
    CorruptionConfig c;
    c.jitter_sigma = 0.0;
    c.occlusion_rate = 0.0;
    c.displacement_sigma = 0.0;
    return c;
}

SkeletonSequence generate_ground_truth(const MotionConfig& cfg) {
    cfg.validate();
    const Activity act = make_activity(cfg.library_seed, cfg.activity, cfg.motion_bandwidth_hz);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double two_pi = 2.0 * std::numbers::pi;

    // Per-sequence variation of the shared activity.
    const double freq = act.base_hz * (0.9 + 0.2 * unit(rng));
    const double phase0 = two_pi * unit(rng);
    const double gain = cfg.amplitude_scale * (0.8 + 0.4 * unit(rng));
    const double path_hz = std::min(0.15, cfg.motion_bandwidth_hz / 4.0);
    std::array<double, 3> path_phase{};
    for (auto& p : path_phase) p = two_pi * unit(rng);
    const double yaw_amp = 0.3 * unit(rng);
    const double yaw_phase = two_pi * unit(rng);
    const double path_scale = cfg.root_path_amplitude * cfg.amplitude_scale;

    std::array<Vec3, kNumJoints> dirs{};
    for (int j = 1; j < kNumJoints; ++j) dirs[j] = rest_offsets()[j].normalized() * cfg.bone_lengths[j];

    const auto& tree = KinematicTree::kinect();
    SkeletonSequence seq;
    seq.frame_rate_hz = cfg.frame_rate_hz;
    seq.frames.resize(static_cast<std::size_t>(cfg.n_frames));
    for (int t = 0; t < cfg.n_frames; ++t) {
        const double time = t / cfg.frame_rate_hz;
        std::array<Mat3, kNumJoints> frame{};
        std::array<Vec3, kNumJoints> pos{};

        const double yaw = cfg.amplitude_scale * yaw_amp * std::sin(two_pi * path_hz * time + yaw_phase);
        frame[0] = Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
        pos[0] = kRootBase + Vec3(path_scale * std::sin(two_pi * path_hz * time + path_phase[0]),
                                  0.1 * path_scale * std::sin(two_pi * freq * time + path_phase[1]),
                                  path_scale * std::sin(two_pi * 0.5 * path_hz * time + path_phase[2]));

        for (JointId jid : tree.topological_order()) {
            const int j = index(jid);
            if (jid == tree.root()) continue;
            std::array<double, 3> angle{};
            for (int axis = 0; axis < 3; ++axis)
                for (int h = 0; h < kHarmonics; ++h)
                    angle[axis] += gain * act.amp[j][axis][h] *
                                   std::sin(two_pi * (h + 1) * freq * time + act.phase[j][axis][h] + (h + 1) * phase0);
            const int parent = index(tree.parent(jid));
            frame[j] = frame[parent] * rotation_xyz(angle[0], angle[1], angle[2]);
            pos[j] = pos[parent] + frame[j] * dirs[j];
        }
        auto& pose = seq.frames[static_cast<std::size_t>(t)];
        pose.encoding = Encoding::Absolute;
        for (int j = 0; j < kNumJoints; ++j) pose.coords.segment<3>(3 * j) = pos[j];
    }
    return seq;
}

SkeletonSequence corrupt(const SkeletonSequence& seq, const CorruptionConfig& cfg) {
    cfg.validate();
    seq.validate();
    if (seq.encoding() != Encoding::Absolute) throw EncodingError("corrupt expects an absolute sequence");
    SkeletonSequence out = seq;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> duration(cfg.occlusion_min_frames, cfg.occlusion_max_frames);

    if (cfg.occlusion_rate > 0.0) {
        for (int j = 0; j < kNumJoints; ++j) {
            std::size_t t = 0;
            while (t < out.size()) {
                if (unit(rng) >= cfg.occlusion_rate) {
                    ++t;
                    continue;
                }
                const Vec3 held = seq.frames[t].coords.segment<3>(3 * j) +
                                  cfg.displacement_sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
                const std::size_t end = std::min(out.size(), t + static_cast<std::size_t>(duration(rng)));
                for (; t < end; ++t) out.frames[t].coords.segment<3>(3 * j) = held;
            }
        }
    }
    if (cfg.jitter_sigma > 0.0)
        for (auto& f : out.frames)
            for (int k = 0; k < kPoseDim; ++k) f.coords(k) += cfg.jitter_sigma * gauss(rng);
    return out;
}

void CorpusConfig::validate() const {
    double sum = 0.0;
    for (double r : split_ratios) {
        if (r < 0.0) throw ConfigError("split ratios must be non-negative");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    if (total_frames < 1) throw ConfigError("corpus needs at least one frame");
    if (sequence_frames < 1 || min_sequence_frames < 1) throw ConfigError("sequence lengths must be positive");
    if (activities < 1) throw ConfigError("corpus needs at least one activity");
    motion.validate();
    corruption.validate();
}

std::array<int, 3> CorpusConfig::split_frames() const {
    std::array<int, 3> f{};
    for (int s = 0; s < 3; ++s) f[s] = static_cast<int>(std::lround(split_ratios[s] * total_frames));
    return f;
}

std::vector<int> split_sequence_lengths(int frames, int sequence_frames, int min_sequence_frames) {
    std::vector<int> lengths;
    while (frames > 0) {
        int len = std::min(frames, sequence_frames);
        lengths.push_back(len);
        frames -= len;
    }
    // A short tail merges into its predecessor.
    if (lengths.size() > 1 && lengths.back() < min_sequence_frames) {
        const int tail = lengths.back();
        lengths.pop_back();
        lengths.back() += tail;
    }
    return lengths;
}

Corpus build_corpus(const CorpusConfig& cfg) {
    cfg.validate();
    Corpus corpus;
    const auto frames = cfg.split_frames();
    const char* names[3] = {"train", "validation", "test"};
    std::vector<PairedSequence>* dest[3] = {&corpus.train, &corpus.validation, &corpus.test};
    for (int s = 0; s < 3; ++s) {
        const auto lengths = split_sequence_lengths(frames[s], cfg.sequence_frames, cfg.min_sequence_frames);
        // Activities cycle from a seeded offset so every split covers the library evenly.
        const auto offset = derive_seed(cfg.seed, 0xA0 + s, 0);
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            PairedSequence p;
            p.name = pair_name(names[s], i);
            p.activity = static_cast<int>((offset + i) % static_cast<std::uint64_t>(cfg.activities));
            p.motion_seed = derive_seed(cfg.seed, 0x10 + s, i);
            p.corruption_seed = derive_seed(cfg.seed, 0x20 + s, i);
            MotionConfig m = cfg.motion;
            m.n_frames = lengths[i];
            m.activity = p.activity;
            m.seed = p.motion_seed;
            CorruptionConfig c = cfg.corruption;
            c.seed = p.corruption_seed;
            p.mocap = generate_ground_truth(m);
            p.kinect = corrupt(p.mocap, c);
            dest[s]->push_back(std::move(p));
        }
    }
    return corpus;
}

void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, const CorpusConfig& cfg) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "skelrefine-corpus";
    manifest["version"] = 1;
    manifest["seed"] = cfg.seed;
    manifest["total_frames"] = cfg.total_frames;
    manifest["split_ratios"] = cfg.split_ratios;
    manifest["sequence_frames"] = cfg.sequence_frames;
    manifest["activities"] = cfg.activities;
    manifest["motion"] = {{"frame_rate_hz", cfg.motion.frame_rate_hz},
                          {"bone_lengths", cfg.motion.bone_lengths},
                          {"motion_bandwidth_hz", cfg.motion.motion_bandwidth_hz},
                          {"amplitude_scale", cfg.motion.amplitude_scale},
                          {"root_path_amplitude", cfg.motion.root_path_amplitude},
                          {"library_seed", cfg.motion.library_seed}};
    manifest["corruption"] = {{"jitter_sigma", cfg.corruption.jitter_sigma},
                              {"occlusion_rate", cfg.corruption.occlusion_rate},
                              {"occlusion_min_frames", cfg.corruption.occlusion_min_frames},
                              {"occlusion_max_frames", cfg.corruption.occlusion_max_frames},
                              {"displacement_sigma", cfg.corruption.displacement_sigma}};
    const std::pair<const char*, const std::vector<PairedSequence>*> splits[] = {
        {"train", &corpus.train}, {"validation", &corpus.validation}, {"test", &corpus.test}};
    for (const auto& [split, pairs] : splits) {
        auto list = nlohmann::json::array();
        for (const auto& p : *pairs) {
            const std::string kinect = p.name + "_kinect.jsonl";
            const std::string mocap = p.name + "_mocap.jsonl";
            save_sequence(dir / kinect, p.kinect);
            save_sequence(dir / mocap, p.mocap);
            list.push_back({{"name", p.name},
                            {"kinect", kinect},
                            {"mocap", mocap},
                            {"frames", p.mocap.size()},
                            {"activity", p.activity},
                            {"motion_seed", p.motion_seed},
                            {"corruption_seed", p.corruption_seed}});
        }
        manifest["splits"][split] = std::move(list);
    }
    std::ofstream os(dir / "manifest.json");
    if (!os) throw DataError("cannot write corpus manifest in '" + dir.string() + "'");
    os << manifest.dump(2) << '\n';
}

Corpus load_corpus(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw DataError("no corpus manifest in '" + dir.string() + "'");
    Corpus corpus;
    try {
        const auto manifest = nlohmann::json::parse(is);
        const std::pair<const char*, std::vector<PairedSequence>*> splits[] = {
            {"train", &corpus.train}, {"validation", &corpus.validation}, {"test", &corpus.test}};
        for (const auto& [split, pairs] : splits) {
            for (const auto& e : manifest.at("splits").at(split)) {
                PairedSequence p;
                p.name = e.at("name").get<std::string>();
                p.activity = e.value("activity", 0);
                p.motion_seed = e.value("motion_seed", std::uint64_t{0});
                p.corruption_seed = e.value("corruption_seed", std::uint64_t{0});
                p.kinect = load_sequence(dir / e.at("kinect").get<std::string>());
                p.mocap = load_sequence(dir / e.at("mocap").get<std::string>());
                if (p.kinect.size() != p.mocap.size())
                    throw DimensionError("pair '" + p.name + "' has unequal kinect and mocap lengths");
                pairs->push_back(std::move(p));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed corpus manifest: ") + e.what());
    }
    return corpus;
}

}  // namespace skelrefine::synth
