#include "groc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "groc/errors.hpp"
#include "groc/rng.hpp"

namespace groc {

namespace {

void validate_splits(const Splits& s, std::size_t n) {
    std::vector<int> owner(n, -1);
    int which = 0;
    for (const auto* set : {&s.train, &s.val, &s.test}) {
        for (NodeId v : *set) {
            if (v >= n) throw DataError("split node id " + std::to_string(v) + " out of range");
            if (owner[v] != -1) throw DataError("split sets overlap at node " + std::to_string(v));
            owner[v] = which;
        }
        ++which;
    }
}

} // namespace

std::vector<Edge> canonical_edges(std::vector<Edge> edges, std::size_t num_nodes) {
    for (const auto& e : edges) {
        if (e.u >= e.v) throw DataError("edge must satisfy u < v");
        if (e.v >= num_nodes) throw DataError("edge endpoint " + std::to_string(e.v) + " out of range");
        if (!(e.w > 0.0 && e.w <= 1.0)) throw DataError("edge weight outside (0, 1]");
    }
    std::sort(edges.begin(), edges.end(),
              [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (edges[i].u == edges[i - 1].u && edges[i].v == edges[i - 1].v)
            throw DataError("duplicate edge (" + std::to_string(edges[i].u) + "," +
                            std::to_string(edges[i].v) + ")");
    }
    return edges;
}

Graph::Graph(std::size_t num_nodes, DenseMatrix features, std::vector<Edge> edges,
             std::optional<std::vector<int>> labels, std::optional<Splits> splits)
    : num_nodes_(num_nodes),
      features_(std::move(features)),
      edges_(canonical_edges(std::move(edges), num_nodes)),
      labels_(std::move(labels)),
      splits_(std::move(splits)) {
    if (num_nodes_ == 0) throw DataError("graph has no nodes");
    if (num_nodes_ > std::numeric_limits<NodeId>::max()) throw DataError("too many nodes");
    if (features_.rows() != num_nodes_)
        throw DataError("feature rows (" + std::to_string(features_.rows()) +
                        ") do not match node count (" + std::to_string(num_nodes_) + ")");
    for (double x : features_.values())
        if (x != 0.0 && x != 1.0) throw DataError("features must be binary");
    if (labels_) {
        if (labels_->size() != num_nodes_) throw DataError("label count does not match node count");
        for (int c : *labels_) {
            if (c < 0) throw DataError("negative class id");
            num_classes_ = std::max(num_classes_, c + 1);
        }
    }
    if (splits_) validate_splits(*splits_, num_nodes_);

    offsets_.assign(num_nodes_ + 1, 0);
    for (const auto& e : edges_) {
        ++offsets_[e.u + 1];
        ++offsets_[e.v + 1];
    }
    for (std::size_t i = 0; i < num_nodes_; ++i) offsets_[i + 1] += offsets_[i];
    neighbors_.resize(offsets_.back());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (EdgeId id = 0; id < edges_.size(); ++id) {
        const auto& e = edges_[id];
        neighbors_[cursor[e.u]++] = {e.v, id};
        neighbors_[cursor[e.v]++] = {e.u, id};
    }
    for (std::size_t v = 0; v < num_nodes_; ++v) {
        std::sort(neighbors_.begin() + offsets_[v], neighbors_.begin() + offsets_[v + 1],
                  [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    }
}

std::optional<EdgeId> Graph::find_edge(NodeId a, NodeId b) const {
    if (a == b || a >= num_nodes_ || b >= num_nodes_) return std::nullopt;
    auto nb = neighbors(a);
    auto it = std::lower_bound(nb.begin(), nb.end(), b,
                               [](const Neighbor& x, NodeId key) { return x.node < key; });
    if (it != nb.end() && it->node == b) return it->edge;
    return std::nullopt;
}

Graph Graph::with_edges(std::vector<Edge> edges) const {
    return Graph(num_nodes_, features_, std::move(edges), labels_, splits_);
}

Graph preprocess(const RawGraph& raw) {
    if (raw.num_nodes == 0) throw DataError("empty graph");
    if (raw.features.rows() != raw.num_nodes)
        throw DataError("feature rows do not match node count");
    DenseMatrix features(raw.features.rows(), raw.features.cols());
    for (std::size_t i = 0; i < features.size(); ++i) {
        double x = raw.features.values()[i];
        if (!std::isfinite(x)) throw DataError("non-finite feature value");
        features.values()[i] = x > 0.0 ? 1.0 : 0.0;
    }

    std::vector<Edge> sym;
    sym.reserve(raw.edges.size());
    for (const auto& e : raw.edges) {
        if (e.u >= raw.num_nodes || e.v >= raw.num_nodes)
            throw DataError("edge endpoint out of range");
        if (e.u == e.v) continue;
        if (!(e.w > 0.0 && e.w <= 1.0)) throw DataError("edge weight outside (0, 1]");
        sym.push_back({std::min(e.u, e.v), std::max(e.u, e.v), e.w});
    }
    // Duplicates keep the largest weight.
    std::sort(sym.begin(), sym.end(), [](const Edge& a, const Edge& b) {
        if (a.u != b.u) return a.u < b.u;
        if (a.v != b.v) return a.v < b.v;
        return a.w > b.w;
    });
    sym.erase(std::unique(sym.begin(), sym.end(),
                          [](const Edge& a, const Edge& b) { return a.u == b.u && a.v == b.v; }),
              sym.end());

    return Graph(raw.num_nodes, std::move(features), std::move(sym), raw.labels, raw.splits);
}

Graph preprocess(const Graph& g) {
    RawGraph raw{g.num_nodes(), g.features(), g.edges(), g.labels(), g.splits()};
    return preprocess(raw);
}

std::vector<ReceptiveField> receptive_fields(const Graph& g, int hops) {
    if (hops < 1) throw std::invalid_argument("receptive_fields: hop count must be >= 1");
    const std::size_t n = g.num_nodes();
    std::vector<ReceptiveField> out(n);
    std::vector<int> dist(n, -1);
    std::vector<char> edge_seen(g.num_edges(), 0);
    std::deque<NodeId> queue;
    for (NodeId c = 0; c < n; ++c) {
        auto& rf = out[c];
        rf.center = c;
        dist[c] = 0;
        queue.assign(1, c);
        rf.nodes.push_back(c);
        while (!queue.empty()) {
            NodeId x = queue.front();
            queue.pop_front();
            if (dist[x] > hops - 1) continue;
            for (const auto& nb : g.neighbors(x)) {
                if (!edge_seen[nb.edge]) {
                    edge_seen[nb.edge] = 1;
                    rf.edges.push_back(nb.edge);
                }
                if (dist[nb.node] == -1) {
                    dist[nb.node] = dist[x] + 1;
                    rf.nodes.push_back(nb.node);
                    queue.push_back(nb.node);
                }
            }
        }
        for (NodeId v : rf.nodes) dist[v] = -1;
        for (EdgeId e : rf.edges) edge_seen[e] = 0;
        std::sort(rf.nodes.begin(), rf.nodes.end());
        std::sort(rf.edges.begin(), rf.edges.end());
    }
    return out;
}

Graph sbm_generate(const SbmSpec& spec) {
    if (!(spec.p_out >= 0.0 && spec.p_out < spec.p_in && spec.p_in <= 1.0) &&
        !(spec.p_in == 0.0 && spec.p_out == 0.0)) {
        throw std::invalid_argument("sbm_generate: need 0 <= p_out < p_in <= 1");
    }
    std::size_t n = 0;
    for (auto s : spec.block_sizes) n += s;
    if (n == 0) throw std::invalid_argument("sbm_generate: block sizes sum to zero");
    const std::size_t k = spec.block_sizes.size();

    std::vector<int> labels;
    labels.reserve(n);
    for (std::size_t b = 0; b < k; ++b) labels.insert(labels.end(), spec.block_sizes[b], int(b));

    Rng edge_rng = make_stream(spec.seed, StreamPurpose::sbm_edges);
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            double p = labels[u] == labels[v] ? spec.p_in : spec.p_out;
            // Always draw so that the stream position does not depend on p.
            double r = uniform01(edge_rng);
            if (r < p) edges.push_back({u, v, 1.0});
        }
    }

    Rng feat_rng = make_stream(spec.seed, StreamPurpose::sbm_features);
    DenseMatrix features(n, k);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t j = 0; j < k; ++j) {
            bool bit = std::size_t(labels[v]) == j;
            if (bernoulli(feat_rng, spec.feature_flip)) bit = !bit;
            features(v, j) = bit ? 1.0 : 0.0;
        }
    }

    Rng split_rng = make_stream(spec.seed, StreamPurpose::sbm_splits);
    Splits splits;
    std::vector<NodeId> rest;
    NodeId start = 0;
    for (std::size_t b = 0; b < k; ++b) {
        std::vector<NodeId> block(spec.block_sizes[b]);
        for (std::size_t i = 0; i < block.size(); ++i) block[i] = start + NodeId(i);
        start += NodeId(block.size());
        shuffle(block, split_rng);
        std::size_t n_train = std::min<std::size_t>(20, block.size() / 5);
        splits.train.insert(splits.train.end(), block.begin(), block.begin() + long(n_train));
        rest.insert(rest.end(), block.begin() + long(n_train), block.end());
    }
    shuffle(rest, split_rng);
    std::size_t n_val = std::min(n / 5, rest.size());
    splits.val.assign(rest.begin(), rest.begin() + long(n_val));
    splits.test.assign(rest.begin() + long(n_val), rest.end());
    std::sort(splits.train.begin(), splits.train.end());
    std::sort(splits.val.begin(), splits.val.end());
    std::sort(splits.test.begin(), splits.test.end());

    return Graph(n, std::move(features), std::move(edges), std::move(labels), std::move(splits));
}

std::vector<double> degree_centrality(const Graph& g) {
    std::vector<double> c(g.num_edges());
    for (EdgeId id = 0; id < g.num_edges(); ++id) {
        const auto& e = g.edges()[id];
        c[id] = 0.5 * double(g.degree(e.u) + g.degree(e.v));
    }
    return c;
}

} // namespace groc
