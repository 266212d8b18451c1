#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "groc/dense_matrix.hpp"
#include "groc/encoder.hpp"
#include "groc/graph.hpp"

namespace groc {

// ---- Linear evaluation ------------------------------------------------------

struct ProbeConfig {
    double lr = 0.01;
    std::size_t steps = 1000;
    double weight_decay = 1e-5;
};

// Multinomial logistic regression on frozen embeddings.
struct LinearProbe {
    DenseMatrix w;  // n_h x C
    DenseMatrix b;  // 1 x C
    std::vector<double> trace;  // training loss per step
};

// Full-batch Adam on the cross-entropy of the training nodes. Throws
// DataError when the training labels contain a single class.
LinearProbe linear_probe_train(const DenseMatrix& z, const std::vector<int>& labels,
                               std::span<const NodeId> train, int num_classes, std::uint64_t seed,
                               const ProbeConfig& cfg = {});

// Argmax class per row; ties go to the lower class id.
std::vector<int> predict(const LinearProbe& probe, const DenseMatrix& z);
int predict_row(const LinearProbe& probe, std::span<const double> z_row);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                std::span<const NodeId> nodes);

// ---- Surrogate ----------------------------------------------------------------

struct SurrogateConfig {
    std::size_t hidden = 16;
    double lr = 0.01;
    double weight_decay = 5e-4;
    std::size_t epochs = 200;
};

// Two-layer GCN trained without activations or biases, so that its logits
// are exactly the linearized Â² X W1 W2.
struct SurrogateModel {
    DenseMatrix w1;
    DenseMatrix w2;
    DenseMatrix w_bar;  // w1 * w2, d x C

    static SurrogateModel from_weights(DenseMatrix w1, DenseMatrix w2);
};

SurrogateModel surrogate_fit(const Graph& g, std::uint64_t seed, const SurrogateConfig& cfg = {});

// Â² X W̄ for every node.
DenseMatrix surrogate_logits(const SurrogateModel& s, const Graph& g);

// logit_true - max other logit.
double classification_margin(std::span<const double> logits, int label);

// ---- Targets and attack ----------------------------------------------------------

struct TargetSet {
    std::vector<NodeId> easiest;  // lowest surrogate margin first
    std::vector<NodeId> hardest;  // highest margin first
    std::vector<NodeId> random;
    std::vector<std::pair<NodeId, double>> margins;  // test nodes, ascending

    std::vector<NodeId> all() const;
};

// 10 lowest-margin, 10 highest-margin and 20 random remaining test nodes.
TargetSet select_targets(const SurrogateModel& s, const Graph& g, std::uint64_t seed);

enum class FlipKind { insert, remove };

struct Flip {
    NodeId u = 0;  // u < v
    NodeId v = 0;
    FlipKind kind = FlipKind::insert;

    friend bool operator==(const Flip&, const Flip&) = default;
};

struct AttackResult {
    NodeId target = 0;
    std::size_t budget = 0;
    std::vector<Flip> flips;
    std::vector<double> margins;  // before any flip, then after each flip
    int final_prediction = -1;    // surrogate class after all flips
};

// Greedy direct structure attack on the linearized surrogate: each step
// applies the target-incident flip with the largest exact margin decrease
// (ties: lowest partner id), stopping early when no flip decreases it.
AttackResult attack_evasion(const Graph& g, NodeId target, std::size_t budget,
                            const SurrogateModel& s);

// Linearized margin of `target` after recomputing Â² on g with `flips`.
double surrogate_margin(const Graph& g, NodeId target, const SurrogateModel& s,
                        std::span<const Flip> flips = {});

Graph apply_flips(const Graph& g, std::span<const Flip> flips);

nlohmann::json to_json(const AttackResult& a);

// ---- Robust accuracy -----------------------------------------------------------------

struct RobustnessReport {
    std::vector<std::size_t> budgets;        // 0 first, then the requested budgets
    std::vector<double> accuracy;            // fraction of all targets still correct
    std::vector<double> accuracy_if_clean;   // restricted to targets correct at budget 0
    std::vector<AttackResult> attacks;       // one per target, at the largest budget
    std::vector<std::vector<int>> predictions;  // [target][budget index]
};

// Evasion evaluation with frozen encoder and probe: attack each target once at
// the largest budget, then re-encode the graph with every budget prefix of
// the flip sequence. Targets are processed on `threads` workers.
RobustnessReport robust_accuracy(const EncoderParams& encoder, const LinearProbe& probe,
                                 const Graph& g, std::span<const NodeId> targets,
                                 const SurrogateModel& s, std::span<const std::size_t> budgets,
                                 unsigned threads = 1);

} // namespace groc
