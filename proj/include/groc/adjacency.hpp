#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "groc/dense_matrix.hpp"
#include "groc/graph.hpp"
#include "groc/tape.hpp"

namespace groc {

// Sparsity pattern of an adjacency operator: one weight slot per undirected
// edge (base edges first, then temporarily inserted extras) plus a per-node
// incidence list of (neighbor, slot).
struct AdjacencyPattern {
    struct Incidence {
        NodeId node;
        std::size_t slot;
    };

    std::size_t num_nodes = 0;
    std::size_t num_base = 0;
    std::vector<std::pair<NodeId, NodeId>> endpoints;  // per slot, u < v
    std::vector<std::size_t> offsets;                  // num_nodes + 1
    std::vector<Incidence> incidences;

    std::size_t num_slots() const noexcept { return endpoints.size(); }
};

// Symmetric normalized adjacency D^-1/2 (A + I) D^-1/2 over base and extra
// edges, with d_i = 1 + sum of incident weights.
class AdjacencyOperator {
public:
    AdjacencyOperator(std::size_t num_nodes, std::span<const Edge> base,
                      std::span<const Edge> extra = {});

    std::size_t num_nodes() const noexcept { return pattern_->num_nodes; }
    std::size_t num_base() const noexcept { return pattern_->num_base; }
    std::size_t num_extra() const noexcept { return num_slots() - num_base(); }
    std::size_t num_slots() const noexcept { return pattern_->num_slots(); }

    const std::shared_ptr<const AdjacencyPattern>& pattern() const noexcept { return pattern_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& degrees() const noexcept { return degrees_; }

    double diagonal(NodeId i) const { return 1.0 / degrees_[i]; }
    // Normalized value of slot k, shared by (u, v) and (v, u).
    double entry(std::size_t slot) const { return entries_[slot]; }

    DenseMatrix dense() const;
    DenseMatrix apply(const DenseMatrix& m) const;

private:
    std::shared_ptr<const AdjacencyPattern> pattern_;
    std::vector<double> weights_;
    std::vector<double> degrees_;
    std::vector<double> entries_;
};

// Operator over g's edges plus optional extra edges, which must be absent
// from g and carry weights in (0, 1].
AdjacencyOperator normalized_adjacency(const Graph& g, std::span<const Edge> extra = {});

// An operator whose edge weights live on a tape as a (slots x 1) leaf, so
// that backward() yields the per-edge gradient g(e) in tape.grad(weights).
struct AdjacencyVar {
    std::shared_ptr<const AdjacencyPattern> pattern;
    Var weights;
    // Treat degree normalization as constant in backward (ablation).
    bool detach_normalization = false;
};

// With `differentiable` false the weights are recorded as a constant.
AdjacencyVar attach(Tape& tape, const AdjacencyOperator& op, bool detach_normalization = false,
                    bool differentiable = true);

// Â * m with gradients to m and to every edge-weight slot, including the
// chain-rule contribution through the degrees.
Var spmm(Tape& tape, const AdjacencyVar& adj, Var m);

} // namespace groc
