#pragma once

#include "skelrefine/skeleton.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace skelrefine {

// Line-delimited JSON: a header {"frame_rate_hz": .., "encoding": ..} followed by
// one {"t": frame_index, "joints": [48 floats]} object per frame.
void write_sequence(std::ostream& os, const SkeletonSequence& seq);
SkeletonSequence read_sequence(std::istream& is);

void save_sequence(const std::filesystem::path& path, const SkeletonSequence& seq);
SkeletonSequence load_sequence(const std::filesystem::path& path);

/// 49 columns: frame index then the 48 coordinates, with a header row.
void write_sequence_csv(std::ostream& os, const SkeletonSequence& seq);
void save_sequence_csv(const std::filesystem::path& path, const SkeletonSequence& seq);

}  // namespace skelrefine
