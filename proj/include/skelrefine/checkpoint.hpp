#pragma once

#include "skelrefine/drnn.hpp"

#include <filesystem>
#include <iosfwd>

namespace skelrefine::drnn {

struct DrnnModel {
    DrnnConfig config;
    DrnnParams params;
};

// JSON container: {"format": "skelrefine-drnn", "version": 1, "config": {...},
// "tensors": {name: {"rows", "cols", "data" (row-major)}}}.
void write_checkpoint(std::ostream& os, const DrnnModel& model);
DrnnModel read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const DrnnModel& model);
DrnnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace skelrefine::drnn
