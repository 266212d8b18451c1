#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "groc/contrastive.hpp"
#include "groc/encoder.hpp"
#include "groc/graph.hpp"
#include "groc/transforms.hpp"

namespace groc {

enum class Method { grace, gca_de, grace_adv, groc };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct TrainConfig {
    Method method = Method::grace;
    double lr = 0.001;
    double weight_decay = 1e-5;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;
    StochasticConfig stochastic;
    AdversarialConfig adversarial;
    SimilarityConfig similarity;
    std::size_t n_h = 32;
    Activation act = Activation::relu;
    double prelu_slope = 0.25;
    bool detach_normalization = false;
    int hops = 2;  // encoder depth, fixes the receptive fields

    // Throws ConfigError on out-of-range values.
    void validate() const;
};

// Keys accepted for a method (config files and key=value overrides).
std::vector<std::string> config_keys(Method m);

nlohmann::ordered_json to_json(const TrainConfig& cfg);
// Applies the keys of `j` on top of `cfg`; unknown keys or keys invalid for
// the method raise ConfigError. A "method" key, if present, must match.
void apply_json(TrainConfig& cfg, const nlohmann::json& j);
void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value);

// Built-in presets: "sbm" (desk-scale fixture), "cora", "citeseer".
TrainConfig preset(const std::string& name, Method method);

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;  // mean final-pass objective over the epoch's batches
    std::size_t batches = 0;
    std::size_t removed = 0;   // edges removed over both views, all batches
    std::size_t inserted = 0;  // edges inserted over both views, all batches
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::size_t zero_norm_rows = 0;
};

std::string report_csv(const TrainReport& r);

struct TrainResult {
    ModelParams params;
    TrainReport report;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Full training loop for any method. GROC: per epoch a random partition
// into batches of b anchors; per batch feature masking on both views,
// candidate sets, one preliminary pass with S+ inserted at weight 1/|S+|,
// gradient-ranked removal/insertion per view, final pass and an Adam step.
// GRACE / GCA-DE use stochastic edge removal over all nodes; GRACE-ADV is
// GROC with all nodes as anchors and no insertion.
TrainResult train(const Graph& g, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Method-checked entry points.
TrainResult train_groc(const Graph& g, const TrainConfig& cfg, const EpochCallback& on_epoch = {});
TrainResult train_baseline(const Graph& g, const TrainConfig& cfg,
                           const EpochCallback& on_epoch = {});

// One forward/backward pass of encoder, head and objective over two views.
// `extra` edges (e.g. the weighted S+ candidates) are appended to both
// views after their own edges, so slot k >= views[i].edges.size() holds
// extra[k - views[i].edges.size()]. With `edge_grads` the edge weights are
// tape leaves and tape.grad(adj[i].weights) is g(e) for view i.
struct TwoViewPass {
    Tape tape;
    EncoderVars enc;
    ProjectionVars head;
    std::array<AdjacencyVar, 2> adj;
    Var loss;
};

void run_pass(TwoViewPass& pass, const ModelParams& params, const std::array<View, 2>& views,
              const std::vector<Edge>& extra, std::span<const NodeId> anchors,
              const TrainConfig& cfg, bool edge_grads);

// Random partition of [0, n) into ceil(n/b) batches, each sorted.
std::vector<std::vector<NodeId>> partition_batches(std::size_t n, std::size_t b, Rng& rng);

} // namespace groc
