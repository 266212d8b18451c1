#include "groc/encoder.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "groc/errors.hpp"
#include "groc/graph_io.hpp"
#include "groc/rng.hpp"

namespace groc {

namespace fs = std::filesystem;

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "prelu"; }

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "prelu") return Activation::prelu;
    throw ConfigError("unknown activation '" + s + "' (expected relu or prelu)");
}

namespace {

DenseMatrix glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    DenseMatrix m(fan_in, fan_out);
    for (auto& v : m.values()) v = uniform(rng, -a, a);
    return m;
}

} // namespace

ModelParams init_params(std::uint64_t seed, std::size_t in_dim, std::size_t n_h, Activation act,
                        double prelu_slope) {
    if (in_dim == 0 || n_h == 0) throw std::invalid_argument("init_params: sizes must be >= 1");
    Rng rng = make_stream(seed, StreamPurpose::init);
    ModelParams p;
    p.encoder.w1 = glorot(rng, in_dim, 2 * n_h);
    p.encoder.w2 = glorot(rng, 2 * n_h, n_h);
    p.encoder.act = act;
    p.encoder.prelu_slope = prelu_slope;
    p.head.w1 = glorot(rng, n_h, n_h);
    p.head.b1 = DenseMatrix(1, n_h);
    p.head.w2 = glorot(rng, n_h, n_h);
    p.head.b2 = DenseMatrix(1, n_h);
    return p;
}

EncoderVars bind(Tape& tape, const EncoderParams& p, bool differentiable) {
    auto put = [&](const DenseMatrix& m) { return differentiable ? tape.leaf(m) : tape.constant(m); };
    return {put(p.w1), put(p.w2)};
}

ProjectionVars bind(Tape& tape, const ProjectionParams& p, bool differentiable) {
    auto put = [&](const DenseMatrix& m) { return differentiable ? tape.leaf(m) : tape.constant(m); };
    return {put(p.w1), put(p.b1), put(p.w2), put(p.b2)};
}

Var encode(Tape& tape, const AdjacencyVar& adj, Var features, const EncoderVars& vars,
           const EncoderParams& params) {
    Var h = spmm(tape, adj, ops::matmul(tape, features, vars.w1));
    h = params.act == Activation::relu ? ops::relu(tape, h) : ops::prelu(tape, h, params.prelu_slope);
    return spmm(tape, adj, ops::matmul(tape, h, vars.w2));
}

Var project(Tape& tape, Var z, const ProjectionVars& vars) {
    Var h = ops::elu(tape, ops::add_bias(tape, ops::matmul(tape, z, vars.w1), vars.b1));
    return ops::add_bias(tape, ops::matmul(tape, h, vars.w2), vars.b2);
}

DenseMatrix embed(const Graph& g, const DenseMatrix& features, const EncoderParams& params) {
    if (features.cols() != params.in_dim())
        throw ShapeError("embed: feature dimension " + std::to_string(features.cols()) +
                         " does not match encoder input " + std::to_string(params.in_dim()));
    Tape tape;
    auto op = normalized_adjacency(g);
    auto adj = attach(tape, op, false, false);
    Var x = tape.constant(features);
    Var z = encode(tape, adj, x, bind(tape, params, false), params);
    return tape.value(z);
}

DenseMatrix embed(const Graph& g, const EncoderParams& params) {
    return embed(g, g.features(), params);
}

void save_checkpoint(const ModelParams& params, const CheckpointInfo& info, const fs::path& dir) {
    fs::create_directories(dir);
    const std::pair<const char*, const DenseMatrix*> mats[] = {
        {"encoder.w1", &params.encoder.w1}, {"encoder.w2", &params.encoder.w2},
        {"head.w1", &params.head.w1},       {"head.b1", &params.head.b1},
        {"head.w2", &params.head.w2},       {"head.b2", &params.head.b2},
    };
    nlohmann::ordered_json j;
    j["format"] = "groc-checkpoint-1";
    j["method"] = info.method;
    j["seed"] = info.seed;
    j["act"] = to_string(params.encoder.act);
    j["prelu_slope"] = params.encoder.prelu_slope;
    j["in_dim"] = params.encoder.in_dim();
    j["n_h"] = params.encoder.hidden();
    j["matrices"] = nlohmann::ordered_json::array();
    for (const auto& [name, m] : mats) {
        const std::string file = std::string(name) + ".csv";
        write_matrix_csv(*m, dir / file);
        j["matrices"].push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}, {"file", file}});
    }
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint manifest in " + dir.string());
    out << j.dump(2) << '\n';
}

ModelParams load_checkpoint(const fs::path& dir, CheckpointInfo* info) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("checkpoint manifest not found in " + dir.string());
    nlohmann::json j;
    try {
        in >> j;
        ModelParams p;
        p.encoder.act = parse_activation(j.at("act").get<std::string>());
        p.encoder.prelu_slope = j.at("prelu_slope").get<double>();
        for (const auto& m : j.at("matrices")) {
            const auto name = m.at("name").get<std::string>();
            DenseMatrix mat = read_matrix_csv(dir / m.at("file").get<std::string>());
            if (mat.rows() != m.at("rows").get<std::size_t>() ||
                mat.cols() != m.at("cols").get<std::size_t>())
                throw DataError("checkpoint matrix " + name + " has the wrong shape");
            if (name == "encoder.w1") p.encoder.w1 = std::move(mat);
            else if (name == "encoder.w2") p.encoder.w2 = std::move(mat);
            else if (name == "head.w1") p.head.w1 = std::move(mat);
            else if (name == "head.b1") p.head.b1 = std::move(mat);
            else if (name == "head.w2") p.head.w2 = std::move(mat);
            else if (name == "head.b2") p.head.b2 = std::move(mat);
            else throw DataError("unknown checkpoint matrix " + name);
        }
        const std::size_t d = j.at("in_dim").get<std::size_t>();
        const std::size_t nh = j.at("n_h").get<std::size_t>();
        if (p.encoder.w1.rows() != d || p.encoder.w1.cols() != 2 * nh ||
            p.encoder.w2.rows() != 2 * nh || p.encoder.w2.cols() != nh)
            throw DataError("checkpoint encoder shapes are inconsistent");
        if (info) {
            info->seed = j.at("seed").get<std::uint64_t>();
            info->method = j.at("method").get<std::string>();
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad checkpoint manifest: " + std::string(e.what()));
    }
}

} // namespace groc
