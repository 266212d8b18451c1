#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "groc/adjacency.hpp"
#include "groc/dense_matrix.hpp"
#include "groc/graph.hpp"
#include "groc/tape.hpp"

namespace groc {

enum class Activation { relu, prelu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

// Two-layer bias-free GCN: Z = Â act(Â X W1) W2, with W1: d x 2n_h and
// W2: 2n_h x n_h. The activation sits between the layers only.
struct EncoderParams {
    DenseMatrix w1;
    DenseMatrix w2;
    Activation act = Activation::relu;
    double prelu_slope = 0.25;

    std::size_t in_dim() const noexcept { return w1.rows(); }
    std::size_t hidden() const noexcept { return w2.cols(); }
};

// Projection head used only inside the similarity: H = elu(Z Wp1 + bp1) Wp2 + bp2.
struct ProjectionParams {
    DenseMatrix w1;  // n_h x n_h
    DenseMatrix b1;  // 1 x n_h
    DenseMatrix w2;  // n_h x n_h
    DenseMatrix b2;  // 1 x n_h
};

struct ModelParams {
    EncoderParams encoder;
    ProjectionParams head;
};

// Glorot-uniform weights, zero biases, deterministic per seed.
ModelParams init_params(std::uint64_t seed, std::size_t in_dim, std::size_t n_h,
                        Activation act = Activation::relu, double prelu_slope = 0.25);

struct EncoderVars {
    Var w1;
    Var w2;
};

struct ProjectionVars {
    Var w1, b1, w2, b2;
};

// Records parameters on `tape` (as leaves, or as constants when frozen).
EncoderVars bind(Tape& tape, const EncoderParams& p, bool differentiable = true);
ProjectionVars bind(Tape& tape, const ProjectionParams& p, bool differentiable = true);

Var encode(Tape& tape, const AdjacencyVar& adj, Var features, const EncoderVars& vars,
           const EncoderParams& params);
Var project(Tape& tape, Var z, const ProjectionVars& vars);

// Frozen forward pass: embeddings of every node of `g` (optionally with
// features replaced).
DenseMatrix embed(const Graph& g, const EncoderParams& params);
DenseMatrix embed(const Graph& g, const DenseMatrix& features, const EncoderParams& params);

// Checkpoint directory: manifest.json (shapes, act, seed, free-form tags)
// plus one CSV per named matrix.
struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::string method;
};

void save_checkpoint(const ModelParams& params, const CheckpointInfo& info,
                     const std::filesystem::path& dir);
ModelParams load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info = nullptr);

} // namespace groc
