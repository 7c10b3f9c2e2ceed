#pragma once

#include "skelrefine/skeleton.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace skelrefine::synth {

/// Default bone lengths (meters) of the standing rest pose, indexed by JointId;
/// the root entry is unused.
std::array<double, kNumJoints> default_bone_lengths();

struct MotionConfig {
    int n_frames = 250;
    double frame_rate_hz = 30.0;
    std::array<double, kNumJoints> bone_lengths = default_bone_lengths();
    double motion_bandwidth_hz = 2.0;  // highest joint-angle oscillation frequency
    double amplitude_scale = 1.0;      // 0 gives a constant standing pose
    double root_path_amplitude = 0.15; // meters
    int activity = 0;                  // motion prototype drawn from the library seed
    std::uint64_t library_seed = 7;
    std::uint64_t seed = 0;            // per-sequence phase, amplitude and path variation

    void validate() const;
};

struct CorruptionConfig {
    double jitter_sigma = 0.01;       // meters, iid per coordinate
    double occlusion_rate = 0.02;     // per joint per frame
    int occlusion_min_frames = 3;
    int occlusion_max_frames = 10;
    double displacement_sigma = 0.05; // meters, per axis
    std::uint64_t seed = 0;

    void validate() const;
    static CorruptionConfig none();
};

/// Smooth, bone-length-preserving motion from forward kinematics over the Kinect tree.
SkeletonSequence generate_ground_truth(const MotionConfig& cfg);

/// Kinect-like corruption: per-coordinate jitter plus occlusion episodes that hold a joint at
/// a displaced copy of its onset position and then snap back.
SkeletonSequence corrupt(const SkeletonSequence& seq, const CorruptionConfig& cfg);

struct PairedSequence {
    std::string name;
    SkeletonSequence kinect;  // corrupted
    SkeletonSequence mocap;   // ground truth
    int activity = 0;
    std::uint64_t motion_seed = 0;
    std::uint64_t corruption_seed = 0;
};

struct Corpus {
    std::vector<PairedSequence> train;
    std::vector<PairedSequence> validation;
    std::vector<PairedSequence> test;
};

struct CorpusConfig {
    int total_frames = 7300;
    std::array<double, 3> split_ratios{5000.0 / 7300.0, 800.0 / 7300.0, 1500.0 / 7300.0};
    int sequence_frames = 250;  // a split's last sequence may be shorter (never below min_sequence_frames)
    int min_sequence_frames = 40;
    int activities = 6;
    std::uint64_t seed = 2024;
    MotionConfig motion;          // n_frames, activity and seed are set per sequence
    CorruptionConfig corruption;  // seed is set per sequence

    void validate() const;
    std::array<int, 3> split_frames() const;
};

Corpus build_corpus(const CorpusConfig& cfg);

/// Sequence lengths a split is cut into.
std::vector<int> split_sequence_lengths(int frames, int sequence_frames, int min_sequence_frames);

/// Writes <split>_<nnn>_kinect.jsonl / _mocap.jsonl pairs and manifest.json.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus, const CorpusConfig& cfg);
Corpus load_corpus(const std::filesystem::path& dir);

/// Deterministic seed derivation (SplitMix64 over the inputs).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace skelrefine::synth
