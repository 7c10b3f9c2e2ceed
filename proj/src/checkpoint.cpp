#include "skelrefine/checkpoint.hpp"

#include "skelrefine/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace skelrefine::drnn {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "skelrefine-drnn";
constexpr int kVersion = 1;

json tensor(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

void fill(const json& t, Eigen::MatrixXd& dst, const std::string& name) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows != dst.rows() || cols != dst.cols())
        throw DimensionError("checkpoint tensor '" + name + "' is " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", config expects " + std::to_string(dst.rows()) + "x" +
                             std::to_string(dst.cols()));
    const auto& data = t.at("data");
    if (data.size() != static_cast<std::size_t>(rows * cols))
        throw DimensionError("checkpoint tensor '" + name + "' has the wrong number of entries");
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) dst(i, j) = data[k++].get<double>();
}

void fill(const json& t, Eigen::VectorXd& dst, const std::string& name) {
    Eigen::MatrixXd m(dst.size(), 1);
    fill(t, m, name);
    dst = m.col(0);
}

}  // namespace

void write_checkpoint(std::ostream& os, const DrnnModel& model) {
    const auto& cfg = model.config;
    const auto& p = model.params;
    p.check_shapes(cfg);
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["config"] = {{"input_dim", cfg.input_dim},           {"output_dim", cfg.output_dim},
                   {"hidden_sizes", cfg.hidden_sizes},     {"recurrent_layer", cfg.recurrent_layer},
                   {"window_length", cfg.window_length}, {"seed", cfg.seed}};
    json tensors;
    for (int l = 0; l < p.layers(); ++l) {
        tensors["U" + std::to_string(l + 1)] = tensor(p.U[l]);
        tensors["b" + std::to_string(l + 1)] = tensor(p.b[l]);
    }
    tensors["W"] = tensor(p.W);
    tensors["V"] = tensor(p.V);
    tensors["c"] = tensor(p.c);
    j["tensors"] = std::move(tensors);
    os << j.dump() << '\n';
}

DrnnModel read_checkpoint(std::istream& is) {
    json j;
    try {
        j = json::parse(is);
        if (j.value("format", std::string()) != kFormat) throw ParseError("not a network checkpoint");
        if (j.value("version", 0) != kVersion)
            throw ParseError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));

        DrnnModel m;
        const auto& c = j.at("config");
        m.config.input_dim = c.at("input_dim").get<int>();
        m.config.output_dim = c.at("output_dim").get<int>();
        m.config.hidden_sizes = c.at("hidden_sizes").get<std::vector<int>>();
        m.config.recurrent_layer = c.at("recurrent_layer").get<int>();
        m.config.window_length = c.at("window_length").get<int>();
        m.config.seed = c.at("seed").get<std::uint64_t>();
        m.params = DrnnParams::zeros(m.config);

        const auto& t = j.at("tensors");
        for (int l = 0; l < m.params.layers(); ++l) {
            const auto u = "U" + std::to_string(l + 1);
            const auto b = "b" + std::to_string(l + 1);
            fill(t.at(u), m.params.U[l], u);
            fill(t.at(b), m.params.b[l], b);
        }
        fill(t.at("W"), m.params.W, "W");
        fill(t.at("V"), m.params.V, "V");
        fill(t.at("c"), m.params.c, "c");
        if (!m.params.all_finite()) throw ParseError("checkpoint holds non-finite weights");
        return m;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const DrnnModel& model) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
    write_checkpoint(os, model);
}

DrnnModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path.string() + "'");
    return read_checkpoint(is);
}

}  // namespace skelrefine::drnn
