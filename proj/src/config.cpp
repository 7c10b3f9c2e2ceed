#include "skelrefine/config.hpp"

#include "skelrefine/errors.hpp"

#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace skelrefine {

namespace {

using nlohmann::json;

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string("'") + section + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + section);
}

template <class T>
void read(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

void read_network(const json& j, const char* section, drnn::DrnnConfig& c) {
    check_keys(j, section, {"hidden_sizes", "recurrent_layer", "window_length", "seed", "optimizer"});
    read(j, "hidden_sizes", c.hidden_sizes);
    read(j, "recurrent_layer", c.recurrent_layer);
    read(j, "window_length", c.window_length);
    read(j, "seed", c.seed);
}

void read_optimizer(const json& o, const char* section, drnn::OptimizerSpec& spec) {
    check_keys(o, section,
               {"method", "max_iterations", "history", "gradient_tolerance", "function_tolerance", "step", "decay",
                "decay_every", "keep_best_validation", "standardize", "weight_decay"});
    if (o.contains("method")) spec.method = drnn::OptimizerSpec::parse_method(o.at("method").get<std::string>());
    if (o.contains("max_iterations")) {
        spec.lbfgs.max_iterations = o.at("max_iterations").get<int>();
        spec.gradient_descent.max_iterations = spec.lbfgs.max_iterations;
    }
    read(o, "history", spec.lbfgs.history);
    if (o.contains("gradient_tolerance")) {
        spec.lbfgs.gradient_tolerance = o.at("gradient_tolerance").get<double>();
        spec.gradient_descent.gradient_tolerance = spec.lbfgs.gradient_tolerance;
    }
    read(o, "function_tolerance", spec.lbfgs.function_tolerance);
    read(o, "step", spec.gradient_descent.step);
    read(o, "decay", spec.gradient_descent.decay);
    read(o, "decay_every", spec.gradient_descent.decay_every);
    read(o, "keep_best_validation", spec.keep_best_validation);
    read(o, "standardize", spec.standardize);
    read(o, "weight_decay", spec.weight_decay);
}

json optimizer_json(const drnn::OptimizerSpec& spec) {
    return {{"method", spec.method == drnn::OptimizerSpec::Method::Lbfgs ? "lbfgs" : "gd"},
            {"max_iterations", spec.lbfgs.max_iterations},
            {"history", spec.lbfgs.history},
            {"gradient_tolerance", spec.lbfgs.gradient_tolerance},
            {"function_tolerance", spec.lbfgs.function_tolerance},
            {"step", spec.gradient_descent.step},
            {"decay", spec.gradient_descent.decay},
            {"decay_every", spec.gradient_descent.decay_every},
            {"keep_best_validation", spec.keep_best_validation},
            {"standardize", spec.standardize},
            {"weight_decay", spec.weight_decay}};
}

json network_json(const drnn::DrnnConfig& c, const std::optional<drnn::OptimizerSpec>& optimizer) {
    json j = {{"hidden_sizes", c.hidden_sizes},
              {"recurrent_layer", c.recurrent_layer},
              {"window_length", c.window_length},
              {"seed", c.seed}};
    if (optimizer) j["optimizer"] = optimizer_json(*optimizer);
    return j;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    return p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

void PipelineConfig::validate() const {
    corpus.validate();
    stages.pdrnn.validate();
    stages.vdrnn.validate();
    stages.vdrnn_plus.validate();
    if (stages.fusion.k < 1) throw ConfigError("fusion k must be at least 1");
    for (double t : {stages.fusion.theta, stages.fusion.theta_plus})
        if (!(t >= 0.0 && t < 1.0)) throw ConfigError("gate thresholds must lie in [0, 1)");
    for (const auto* spec : {&stages.optimizer, &stages.optimizer_for(Stage::Pdrnn), &stages.optimizer_for(Stage::Vdrnn),
                             &stages.optimizer_for(Stage::VdrnnPlus)}) {
        if (spec->lbfgs.max_iterations < 0 || spec->gradient_descent.max_iterations < 0)
            throw ConfigError("iteration limits must be non-negative");
        if (spec->lbfgs.history < 1) throw ConfigError("L-BFGS history must be at least 1");
        if (!(spec->weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    }
    if (variants.empty()) throw ConfigError("no variants to evaluate");
}

void PipelineConfig::apply_seed(std::uint64_t seed) {
    corpus.seed = seed;
    stages.pdrnn.seed = synth::derive_seed(seed, 0x5EED, 1);
    stages.vdrnn.seed = synth::derive_seed(seed, 0x5EED, 2);
    stages.vdrnn_plus.seed = synth::derive_seed(seed, 0x5EED, 3);
}

PipelineConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    try {
        check_keys(j, "config",
                   {"corpus_dir", "models_dir", "output_dir", "seed", "corpus", "pdrnn", "vdrnn", "vdrnn_plus",
                    "optimizer", "fusion", "variants"});
        if (j.contains("corpus_dir")) c.corpus_dir = j.at("corpus_dir").get<std::string>();
        if (j.contains("models_dir")) c.models_dir = j.at("models_dir").get<std::string>();
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        c.corpus_dir = resolve(base_dir, c.corpus_dir);
        c.models_dir = resolve(base_dir, c.models_dir);
        c.output_dir = resolve(base_dir, c.output_dir);
        if (j.contains("seed")) c.apply_seed(j.at("seed").get<std::uint64_t>());

        if (j.contains("corpus")) {
            const auto& cj = j.at("corpus");
            check_keys(cj, "corpus",
                       {"total_frames", "split_ratios", "sequence_frames", "min_sequence_frames", "activities",
                        "seed", "motion", "corruption"});
            read(cj, "total_frames", c.corpus.total_frames);
            read(cj, "split_ratios", c.corpus.split_ratios);
            read(cj, "sequence_frames", c.corpus.sequence_frames);
            read(cj, "min_sequence_frames", c.corpus.min_sequence_frames);
            read(cj, "activities", c.corpus.activities);
            read(cj, "seed", c.corpus.seed);
            if (cj.contains("motion")) {
                const auto& m = cj.at("motion");
                check_keys(m, "corpus.motion",
                           {"frame_rate_hz", "bone_lengths", "motion_bandwidth_hz", "amplitude_scale",
                            "root_path_amplitude", "library_seed"});
                read(m, "frame_rate_hz", c.corpus.motion.frame_rate_hz);
                read(m, "bone_lengths", c.corpus.motion.bone_lengths);
                read(m, "motion_bandwidth_hz", c.corpus.motion.motion_bandwidth_hz);
                read(m, "amplitude_scale", c.corpus.motion.amplitude_scale);
                read(m, "root_path_amplitude", c.corpus.motion.root_path_amplitude);
                read(m, "library_seed", c.corpus.motion.library_seed);
            }
            if (cj.contains("corruption")) {
                const auto& k = cj.at("corruption");
                check_keys(k, "corpus.corruption",
                           {"jitter_sigma", "occlusion_rate", "occlusion_min_frames", "occlusion_max_frames",
                            "displacement_sigma"});
                read(k, "jitter_sigma", c.corpus.corruption.jitter_sigma);
                read(k, "occlusion_rate", c.corpus.corruption.occlusion_rate);
                read(k, "occlusion_min_frames", c.corpus.corruption.occlusion_min_frames);
                read(k, "occlusion_max_frames", c.corpus.corruption.occlusion_max_frames);
                read(k, "displacement_sigma", c.corpus.corruption.displacement_sigma);
            }
        }
        if (j.contains("pdrnn")) read_network(j.at("pdrnn"), "pdrnn", c.stages.pdrnn);
        if (j.contains("vdrnn")) read_network(j.at("vdrnn"), "vdrnn", c.stages.vdrnn);
        if (j.contains("vdrnn_plus")) read_network(j.at("vdrnn_plus"), "vdrnn_plus", c.stages.vdrnn_plus);

        if (j.contains("optimizer")) read_optimizer(j.at("optimizer"), "optimizer", c.stages.optimizer);
        // Per-network optimizer blocks override the shared settings field by field.
        const std::pair<const char*, std::optional<drnn::OptimizerSpec>*> overrides[] = {
            {"pdrnn", &c.stages.pdrnn_optimizer},
            {"vdrnn", &c.stages.vdrnn_optimizer},
            {"vdrnn_plus", &c.stages.vdrnn_plus_optimizer}};
        for (const auto& [name, slot] : overrides) {
            if (!j.contains(name) || !j.at(name).contains("optimizer")) continue;
            drnn::OptimizerSpec spec = c.stages.optimizer;
            read_optimizer(j.at(name).at("optimizer"), (std::string(name) + ".optimizer").c_str(), spec);
            *slot = spec;
        }
        if (j.contains("fusion")) {
            const auto& f = j.at("fusion");
            check_keys(f, "fusion", {"k", "theta", "theta_plus"});
            read(f, "k", c.stages.fusion.k);
            read(f, "theta", c.stages.fusion.theta);
            read(f, "theta_plus", c.stages.fusion.theta_plus);
        }
        if (j.contains("variants")) {
            c.variants.clear();
            for (const auto& v : j.at("variants")) c.variants.push_back(parse_variant(v.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

json config_to_json(const PipelineConfig& c) {
    const auto& spec = c.stages.optimizer;
    json variants = json::array();
    for (Variant v : c.variants) variants.push_back(std::string(variant_name(v)));
    return {
        {"corpus_dir", c.corpus_dir.string()},
        {"models_dir", c.models_dir.string()},
        {"output_dir", c.output_dir.string()},
        {"corpus",
         {{"total_frames", c.corpus.total_frames},
          {"split_ratios", c.corpus.split_ratios},
          {"sequence_frames", c.corpus.sequence_frames},
          {"min_sequence_frames", c.corpus.min_sequence_frames},
          {"activities", c.corpus.activities},
          {"seed", c.corpus.seed},
          {"motion",
           {{"frame_rate_hz", c.corpus.motion.frame_rate_hz},
            {"bone_lengths", c.corpus.motion.bone_lengths},
            {"motion_bandwidth_hz", c.corpus.motion.motion_bandwidth_hz},
            {"amplitude_scale", c.corpus.motion.amplitude_scale},
            {"root_path_amplitude", c.corpus.motion.root_path_amplitude},
            {"library_seed", c.corpus.motion.library_seed}}},
          {"corruption",
           {{"jitter_sigma", c.corpus.corruption.jitter_sigma},
            {"occlusion_rate", c.corpus.corruption.occlusion_rate},
            {"occlusion_min_frames", c.corpus.corruption.occlusion_min_frames},
            {"occlusion_max_frames", c.corpus.corruption.occlusion_max_frames},
            {"displacement_sigma", c.corpus.corruption.displacement_sigma}}}}},
        {"pdrnn", network_json(c.stages.pdrnn, c.stages.pdrnn_optimizer)},
        {"vdrnn", network_json(c.stages.vdrnn, c.stages.vdrnn_optimizer)},
        {"vdrnn_plus", network_json(c.stages.vdrnn_plus, c.stages.vdrnn_plus_optimizer)},
        {"optimizer", optimizer_json(spec)},
        {"fusion", {{"k", c.stages.fusion.k}, {"theta", c.stages.fusion.theta}, {"theta_plus", c.stages.fusion.theta_plus}}},
        {"variants", variants},
    };
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("config '" + path.string() + "' is empty");
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

}  // namespace skelrefine
