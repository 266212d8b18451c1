#include "groc/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "groc/errors.hpp"

namespace groc {

namespace {

void check_rate(double r, const char* what) {
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument(std::string(what) + " must be in [0, 1)");
}

} // namespace

nlohmann::json to_json(const ViewDelta& d) {
    nlohmann::json j;
    j["masked_dims"] = d.masked_dims;
    auto entries = nlohmann::json::array();
    for (const auto& [v, c] : d.masked_entries) entries.push_back({v, c});
    j["masked_entries"] = entries;
    j["removed"] = d.removed;
    auto ins = nlohmann::json::array();
    for (const auto& e : d.inserted) ins.push_back({e.u, e.v, e.w});
    j["inserted"] = ins;
    return j;
}

View identity_view(const Graph& g) {
    View v;
    v.features = g.features();
    v.edges = g.edges();
    v.origin.resize(g.num_edges());
    std::iota(v.origin.begin(), v.origin.end(), EdgeId{0});
    return v;
}

MaskResult mask_features(const DenseMatrix& x, double p, Rng& rng, MaskAxis axis) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mask probability must be in [0, 1]");
    MaskResult out{x, {}};
    if (axis == MaskAxis::column) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            if (!bernoulli(rng, p)) continue;
            out.delta.masked_dims.push_back(c);
            for (std::size_t r = 0; r < x.rows(); ++r) out.features(r, c) = 0.0;
        }
    } else {
        for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t c = 0; c < x.cols(); ++c) {
                if (!bernoulli(rng, p)) continue;
                out.delta.masked_entries.emplace_back(NodeId(r), c);
                out.features(r, c) = 0.0;
            }
        }
    }
    return out;
}

std::vector<double> removal_probabilities(const Graph& g, double q, RemovalScheme scheme) {
    check_rate(q, "removal rate");
    std::vector<double> p(g.num_edges(), q);
    if (scheme == RemovalScheme::uniform || g.num_edges() == 0) return p;
    const auto centrality = degree_centrality(g);
    double inv_total = 0.0;
    for (double c : centrality) inv_total += 1.0 / c;
    const double scale = q * double(g.num_edges()) / inv_total;
    for (std::size_t e = 0; e < p.size(); ++e) p[e] = std::clamp(scale / centrality[e], 0.0, 0.95);
    return p;
}

View drop_edges_stochastic(const Graph& g, View view, double q, RemovalScheme scheme, Rng& rng) {
    const auto probs = removal_probabilities(g, q, scheme);
    View out;
    out.features = std::move(view.features);
    out.delta = std::move(view.delta);
    for (std::size_t k = 0; k < view.edges.size(); ++k) {
        const EdgeId id = view.origin[k];
        if (id == kInsertedEdge || id >= probs.size())
            throw std::invalid_argument("drop_edges_stochastic: view edge not from the graph");
        if (bernoulli(rng, probs[id])) {
            out.delta.removed.push_back(id);
            continue;
        }
        out.edges.push_back(view.edges[k]);
        out.origin.push_back(id);
    }
    return out;
}

CandidateSets build_candidate_sets(std::span<const NodeId> anchors,
                                   const std::vector<ReceptiveField>& fields, const Graph& g,
                                   bool with_insertion) {
    CandidateSets out;
    std::vector<NodeId> reach;
    for (NodeId v : anchors) {
        if (v >= fields.size()) throw std::invalid_argument("anchor without a receptive field");
        const auto& rf = fields[v];
        out.removal.insert(out.removal.end(), rf.edges.begin(), rf.edges.end());
        reach.insert(reach.end(), rf.nodes.begin(), rf.nodes.end());
    }
    std::sort(out.removal.begin(), out.removal.end());
    out.removal.erase(std::unique(out.removal.begin(), out.removal.end()), out.removal.end());
    if (!with_insertion) return out;

    std::sort(reach.begin(), reach.end());
    reach.erase(std::unique(reach.begin(), reach.end()), reach.end());
    std::vector<NodeId> outside;
    for (NodeId v : anchors) {
        const auto& own = fields[v].nodes;
        outside.clear();
        std::set_difference(reach.begin(), reach.end(), own.begin(), own.end(),
                            std::back_inserter(outside));
        for (NodeId u : outside) {
            if (g.has_edge(u, v)) continue;
            out.insertion.emplace_back(std::min(u, v), std::max(u, v));
        }
    }
    std::sort(out.insertion.begin(), out.insertion.end());
    out.insertion.erase(std::unique(out.insertion.begin(), out.insertion.end()),
                        out.insertion.end());
    return out;
}

std::size_t selection_count(double rate, std::size_t size) {
    if (rate <= 0.0 || size == 0) return 0;
    const double raw = std::floor(rate * double(size) + 1e-9);
    return std::min(size, static_cast<std::size_t>(raw));
}

View apply_adversarial(View view, const GradientTable& grads, const CandidateSets& sets,
                       double q_minus, double q_plus) {
    check_rate(q_minus, "adversarial removal rate");
    check_rate(q_plus, "adversarial insertion rate");
    if (grads.removal.size() != sets.removal.size() ||
        (q_plus > 0.0 && grads.insertion.size() != sets.insertion.size()))
        throw std::invalid_argument("apply_adversarial: gradient table does not match candidates");

    const std::size_t n_remove = selection_count(q_minus, sets.removal.size());
    const std::size_t n_insert = selection_count(q_plus, sets.insertion.size());

    auto ranked = [](const std::vector<double>& g, std::size_t count, bool ascending) {
        std::vector<std::size_t> idx(g.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return ascending ? g[a] < g[b] : g[a] > g[b];
        });
        idx.resize(count);
        return idx;
    };

    if (n_remove > 0) {
        std::vector<EdgeId> drop;
        for (std::size_t i : ranked(grads.removal, n_remove, true)) drop.push_back(sets.removal[i]);
        std::sort(drop.begin(), drop.end());
        View kept;
        kept.features = std::move(view.features);
        kept.delta = std::move(view.delta);
        std::size_t found = 0;
        for (std::size_t k = 0; k < view.edges.size(); ++k) {
            if (std::binary_search(drop.begin(), drop.end(), view.origin[k])) {
                ++found;
                continue;
            }
            kept.edges.push_back(view.edges[k]);
            kept.origin.push_back(view.origin[k]);
        }
        if (found != drop.size())
            throw std::invalid_argument("apply_adversarial: removal candidate missing from view");
        kept.delta.removed.insert(kept.delta.removed.end(), drop.begin(), drop.end());
        view = std::move(kept);
    }

    if (n_insert > 0) {
        auto chosen = ranked(grads.insertion, n_insert, false);
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t i : chosen) {
            const auto [u, v] = sets.insertion[i];
            Edge e{u, v, 1.0};
            view.edges.push_back(e);
            view.origin.push_back(kInsertedEdge);
            view.delta.inserted.push_back(e);
        }
    }
    return view;
}

} // namespace groc
