#pragma once

#include <span>

#include "groc/dense_matrix.hpp"
#include "groc/graph.hpp"
#include "groc/tape.hpp"

namespace groc {

struct SimilarityConfig {
    double temperature = 0.5;
};

// Cosine similarity; 0 when either vector has zero norm.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Per-node loss l(v, view1, view2) over projected embeddings: the positive
// pair is v in both views, negatives are the other anchors in both views.
// Throws if v is not an anchor or the temperature is not positive.
double node_loss(NodeId v, const DenseMatrix& h1, const DenseMatrix& h2,
                 std::span<const NodeId> anchors, const SimilarityConfig& cfg);

// 1/(2k) * sum over anchors of [l(v, 1, 2) + l(v, 2, 1)].
double objective_value(std::span<const NodeId> anchors, const DenseMatrix& h1,
                       const DenseMatrix& h2, const SimilarityConfig& cfg);

// The same objective recorded on a tape (fused primitive with an analytic
// adjoint). Zero-norm rows increment tape.counter("zero_norm_rows").
Var objective(Tape& tape, std::span<const NodeId> anchors, Var h1, Var h2,
              const SimilarityConfig& cfg);

} // namespace groc
