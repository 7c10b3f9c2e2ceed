#include "skelrefine/sequence_io.hpp"

#include "skelrefine/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

namespace skelrefine {

using nlohmann::json;

void write_sequence(std::ostream& os, const SkeletonSequence& seq) {
    seq.validate();
    json header = {{"frame_rate_hz", seq.frame_rate_hz}, {"encoding", std::string(encoding_name(seq.encoding()))}};
    os << header.dump() << '\n';
    for (std::size_t t = 0; t < seq.size(); ++t) {
        const auto& c = seq.frames[t].coords;
        json line = {{"t", t}, {"joints", std::vector<double>(c.data(), c.data() + kPoseDim)}};
        os << line.dump() << '\n';
    }
}

SkeletonSequence read_sequence(std::istream& is) {
    SkeletonSequence seq;
    std::string line;
    bool have_header = false;
    Encoding enc = Encoding::Absolute;
    std::size_t lineno = 0;
    auto read_line = [&](const json& obj) {
        if (!have_header) {
            if (!obj.contains("frame_rate_hz")) throw ParseError("missing sequence header line");
            seq.frame_rate_hz = obj.at("frame_rate_hz").get<double>();
            enc = parse_encoding(obj.value("encoding", std::string("absolute")));
            have_header = true;
            return;
        }
        if (!obj.contains("joints") || !obj.at("joints").is_array())
            throw ParseError("line " + std::to_string(lineno) + ": missing joints array");
        const auto& arr = obj.at("joints");
        if (arr.size() != static_cast<std::size_t>(kPoseDim))
            throw DimensionError("line " + std::to_string(lineno) + ": expected 48 joint coordinates, got " +
                                 std::to_string(arr.size()));
        if (obj.contains("t") && obj.at("t").get<std::size_t>() != seq.size())
            throw ParseError("line " + std::to_string(lineno) + ": frame index out of order");
        SkeletonPose pose;
        pose.encoding = enc;
        for (int k = 0; k < kPoseDim; ++k) {
            if (!arr[k].is_number()) throw ParseError("line " + std::to_string(lineno) + ": non-numeric coordinate");
            pose.coords(k) = arr[k].get<double>();
        }
        seq.frames.push_back(pose);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            read_line(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_header) throw ParseError("empty sequence file");
    seq.validate();
    return seq;
}

void save_sequence(const std::filesystem::path& path, const SkeletonSequence& seq) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    write_sequence(os, seq);
}

SkeletonSequence load_sequence(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path.string() + "'");
    return read_sequence(is);
}

void write_sequence_csv(std::ostream& os, const SkeletonSequence& seq) {
    os << "frame";
    for (int j = 0; j < kNumJoints; ++j)
        for (char axis : {'x', 'y', 'z'}) os << ',' << joint_name(static_cast<JointId>(j)) << '_' << axis;
    os << '\n' << std::setprecision(17);
    for (std::size_t t = 0; t < seq.size(); ++t) {
        os << t;
        for (int k = 0; k < kPoseDim; ++k) os << ',' << seq.frames[t].coords(k);
        os << '\n';
    }
}

void save_sequence_csv(const std::filesystem::path& path, const SkeletonSequence& seq) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    write_sequence_csv(os, seq);
}

}  // namespace skelrefine
