#pragma once

#include "skelrefine/pipeline.hpp"
#include "skelrefine/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <vector>

namespace skelrefine {

/// Everything one experiment needs. Relative paths are resolved against the config file's directory.
struct PipelineConfig {
    std::filesystem::path corpus_dir = "corpus";
    std::filesystem::path models_dir = "models";
    std::filesystem::path output_dir = "outputs";
    synth::CorpusConfig corpus;
    StageConfig stages;
    std::vector<Variant> variants = all_variants();

    void validate() const;
    /// Re-seeds the corpus and the three networks from one seed.
    void apply_seed(std::uint64_t seed);
};

/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace skelrefine
