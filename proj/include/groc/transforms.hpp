#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "groc/dense_matrix.hpp"
#include "groc/graph.hpp"
#include "groc/rng.hpp"

namespace groc {

enum class RemovalScheme { uniform, degree_weighted };
enum class MaskAxis { column, entry };

struct StochasticConfig {
    double p1 = 0.3;  // feature mask probability, view 1
    double p2 = 0.4;
    double q_minus_1 = 0.2;  // edge removal rate, view 1
    double q_minus_2 = 0.4;
    RemovalScheme removal_scheme = RemovalScheme::uniform;
    MaskAxis mask_axis = MaskAxis::column;
};

struct AdversarialConfig {
    double q_plus_1 = 0.0;  // edge insertion rate, view 1
    double q_plus_2 = 0.0;
    std::size_t batch_size = 10;
};

// Provenance of one view relative to the input graph.
struct ViewDelta {
    std::vector<std::size_t> masked_dims;                      // column masking
    std::vector<std::pair<NodeId, std::size_t>> masked_entries;  // entry masking
    std::vector<EdgeId> removed;                                // input-graph edge ids
    std::vector<Edge> inserted;
};

nlohmann::json to_json(const ViewDelta& d);

inline constexpr EdgeId kInsertedEdge = std::numeric_limits<EdgeId>::max();

// A transformed copy of the input graph. `origin[k]` is the input edge id of
// edges[k], or kInsertedEdge.
struct View {
    DenseMatrix features;
    std::vector<Edge> edges;
    std::vector<EdgeId> origin;
    ViewDelta delta;
};

View identity_view(const Graph& g);

struct MaskResult {
    DenseMatrix features;
    ViewDelta delta;
};

// Column mode masks each feature dimension for all nodes with probability p;
// entry mode masks each (node, dim) independently.
MaskResult mask_features(const DenseMatrix& x, double p, Rng& rng,
                         MaskAxis axis = MaskAxis::column);

// Per-edge removal probabilities over g's edges. Degree-weighted: inversely
// proportional to degree centrality, scaled so the expected count is
// q * |E|, clamped to [0, 0.95].
std::vector<double> removal_probabilities(const Graph& g, double q, RemovalScheme scheme);

// Removes each edge of `view` (which must come from g) independently.
View drop_edges_stochastic(const Graph& g, View view, double q, RemovalScheme scheme, Rng& rng);

struct CandidateSets {
    std::vector<EdgeId> removal;                         // S-, sorted input edge ids
    std::vector<std::pair<NodeId, NodeId>> insertion;    // S+, sorted, u < v
};

// S- = union of E_l(v) over anchors. S+ = pairs (u, v) with v an anchor and
// u in the union of the anchors' V_l minus V_l(v), without existing edges.
CandidateSets build_candidate_sets(std::span<const NodeId> anchors,
                                   const std::vector<ReceptiveField>& fields, const Graph& g,
                                   bool with_insertion = true);

// Gradient intensity per candidate, parallel to CandidateSets.
struct GradientTable {
    std::vector<double> removal;
    std::vector<double> insertion;
};

// floor(rate * size) with a small tolerance for representation error,
// clamped to size.
std::size_t selection_count(double rate, std::size_t size);

// Removes the floor(q- |S-|) candidates with minimal gradient and inserts
// the floor(q+ |S+|) with maximal gradient at weight 1. Ties go to the
// lower candidate index.
View apply_adversarial(View view, const GradientTable& grads, const CandidateSets& sets,
                       double q_minus, double q_plus);

} // namespace groc
