#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "groc/dense_matrix.hpp"

namespace groc {

using NodeId = std::uint32_t;
using EdgeId = std::size_t;

struct Edge {
    NodeId u = 0;
    NodeId v = 0;
    double w = 1.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct Splits {
    std::vector<NodeId> train;
    std::vector<NodeId> val;
    std::vector<NodeId> test;

    friend bool operator==(const Splits&, const Splits&) = default;
};

// Input before preprocessing: arbitrary real features, possibly directed,
// duplicated or self-looped edges.
struct RawGraph {
    std::size_t num_nodes = 0;
    DenseMatrix features;
    std::vector<Edge> edges;
    std::optional<std::vector<int>> labels;
    std::optional<Splits> splits;
};

// Undirected simple graph with binary features.
//
// Edges are stored canonically (u < v, sorted, unique, weights in (0, 1]);
// an edge id is the position in that list. The constructor validates every
// invariant and builds a CSR neighbor index.
class Graph {
public:
    struct Neighbor {
        NodeId node;
        EdgeId edge;
    };

    Graph() = default;
    Graph(std::size_t num_nodes, DenseMatrix features, std::vector<Edge> edges,
          std::optional<std::vector<int>> labels = std::nullopt,
          std::optional<Splits> splits = std::nullopt);

    std::size_t num_nodes() const noexcept { return num_nodes_; }
    std::size_t num_features() const noexcept { return features_.cols(); }
    std::size_t num_edges() const noexcept { return edges_.size(); }

    const DenseMatrix& features() const noexcept { return features_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const std::optional<std::vector<int>>& labels() const noexcept { return labels_; }
    const std::optional<Splits>& splits() const noexcept { return splits_; }
    int num_classes() const noexcept { return num_classes_; }

    std::span<const Neighbor> neighbors(NodeId v) const {
        return {neighbors_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
    std::optional<EdgeId> find_edge(NodeId a, NodeId b) const;
    bool has_edge(NodeId a, NodeId b) const { return find_edge(a, b).has_value(); }

    // Same nodes, features, labels and splits; new edge set (canonicalized).
    Graph with_edges(std::vector<Edge> edges) const;

private:
    std::size_t num_nodes_ = 0;
    DenseMatrix features_;
    std::vector<Edge> edges_;
    std::optional<std::vector<int>> labels_;
    std::optional<Splits> splits_;
    int num_classes_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<Neighbor> neighbors_;
};

// Sorts and validates a canonical edge list; throws DataError on duplicates,
// self-loops, out-of-range endpoints or weights outside (0, 1].
std::vector<Edge> canonical_edges(std::vector<Edge> edges, std::size_t num_nodes);

// Binarize features (x > 0), symmetrize, dedupe, drop self-loops.
Graph preprocess(const RawGraph& raw);
Graph preprocess(const Graph& g);

struct ReceptiveField {
    NodeId center = 0;
    std::vector<NodeId> nodes;  // V_l(v), sorted
    std::vector<EdgeId> edges;  // E_l(v), sorted
};

// V_l(v) = nodes within l hops; E_l(v) = edges with an endpoint within l-1
// hops, i.e. exactly the edges whose weights reach v in an l-layer encoder.
std::vector<ReceptiveField> receptive_fields(const Graph& g, int hops);

struct SbmSpec {
    std::uint64_t seed = 7;
    std::vector<std::size_t> block_sizes{100, 100};
    double p_in = 0.05;
    double p_out = 0.005;
    double feature_flip = 0.05;
};

// Stochastic block model: labels are block ids, features are the one-hot
// block id with each bit flipped independently. Splits: min(20, size/5)
// training nodes per class, n/5 validation nodes, the rest test.
Graph sbm_generate(const SbmSpec& spec);

// (deg(u) + deg(v)) / 2 per edge id, unweighted degrees.
std::vector<double> degree_centrality(const Graph& g);

} // namespace groc
