#include "groc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "groc/adam.hpp"
#include "groc/adjacency.hpp"
#include "groc/errors.hpp"
#include "groc/rng.hpp"
#include "groc/tape.hpp"

namespace groc {

namespace {

DenseMatrix glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / double(fan_in + fan_out));
    DenseMatrix m(fan_in, fan_out);
    for (auto& v : m.values()) v = uniform(rng, -a, a);
    return m;
}

int argmax(std::span<const double> row) {
    return int(std::max_element(row.begin(), row.end()) - row.begin());
}

// Adjacency lists that can be flipped in place, with degrees 1 + sum(w).
class MutableAdjacency {
public:
    explicit MutableAdjacency(const Graph& g) : nb_(g.num_nodes()), degree_(g.num_nodes(), 1.0) {
        for (const auto& e : g.edges()) {
            nb_[e.u].emplace_back(e.v, e.w);
            nb_[e.v].emplace_back(e.u, e.w);
            degree_[e.u] += e.w;
            degree_[e.v] += e.w;
        }
        for (auto& l : nb_) std::sort(l.begin(), l.end());
    }

    bool has(NodeId u, NodeId v) const { return find(u, v) != nb_[u].end(); }

    void flip(NodeId u, NodeId v) {
        if (has(u, v)) {
            const double w = find(u, v)->second;
            nb_[u].erase(find(u, v));
            nb_[v].erase(find(v, u));
            degree_[u] -= w;
            degree_[v] -= w;
        } else {
            insert_sorted(u, v);
            insert_sorted(v, u);
            degree_[u] += 1.0;
            degree_[v] += 1.0;
        }
    }

    // Row t of Â² X W̄ (xw = X W̄).
    std::vector<double> logits(NodeId t, const DenseMatrix& xw) const {
        const std::size_t c = xw.cols();
        std::vector<double> out(c, 0.0), hop(c);
        auto accumulate_hop = [&](NodeId k, double coef) {
            const double dk = degree_[k];
            for (std::size_t x = 0; x < c; ++x) hop[x] = xw(k, x) / dk;
            for (const auto& [j, w] : nb_[k]) {
                const double a = w / std::sqrt(dk * degree_[j]);
                for (std::size_t x = 0; x < c; ++x) hop[x] += a * xw(j, x);
            }
            for (std::size_t x = 0; x < c; ++x) out[x] += coef * hop[x];
        };
        const double dt = degree_[t];
        accumulate_hop(t, 1.0 / dt);
        for (const auto& [k, w] : nb_[t]) accumulate_hop(k, w / std::sqrt(dt * degree_[k]));
        return out;
    }

private:
    using List = std::vector<std::pair<NodeId, double>>;

    List::const_iterator find(NodeId u, NodeId v) const {
        auto it = std::lower_bound(nb_[u].begin(), nb_[u].end(), std::make_pair(v, -1.0));
        return it != nb_[u].end() && it->first == v ? it : nb_[u].end();
    }
    List::iterator find(NodeId u, NodeId v) {
        auto it = std::lower_bound(nb_[u].begin(), nb_[u].end(), std::make_pair(v, -1.0));
        return it != nb_[u].end() && it->first == v ? it : nb_[u].end();
    }
    void insert_sorted(NodeId u, NodeId v) {
        auto it = std::lower_bound(nb_[u].begin(), nb_[u].end(), std::make_pair(v, -1.0));
        nb_[u].insert(it, {v, 1.0});
    }

    std::vector<List> nb_;
    std::vector<double> degree_;
};

int true_label(const Graph& g, NodeId v) {
    if (!g.labels()) throw DataError("graph has no labels");
    return (*g.labels())[v];
}

} // namespace

// ---- Linear evaluation ---------------------------------------------------------

LinearProbe linear_probe_train(const DenseMatrix& z, const std::vector<int>& labels,
                               std::span<const NodeId> train, int num_classes, std::uint64_t seed,
                               const ProbeConfig& cfg) {
    if (train.empty()) throw DataError("linear probe: empty training split");
    if (labels.size() != z.rows()) throw ShapeError("linear probe: label count");
    std::set<int> classes;
    for (NodeId v : train) classes.insert(labels[v]);
    if (classes.size() < 2) throw DataError("linear probe: training split has a single class");

    Rng rng = make_stream(seed, StreamPurpose::probe);
    LinearProbe probe{glorot(rng, z.cols(), std::size_t(num_classes)),
                      DenseMatrix(1, std::size_t(num_classes)), {}};
    std::vector<std::size_t> rows(train.begin(), train.end());
    AdamState adam;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        Tape t;
        Var x = t.constant(z);
        Var w = t.leaf(probe.w);
        Var b = t.leaf(probe.b);
        Var loss = ops::softmax_cross_entropy(t, ops::add_bias(t, ops::matmul(t, x, w), b), labels, rows);
        t.backward(loss);
        probe.trace.push_back(t.value(loss).item());
        std::array<DenseMatrix*, 2> params = {&probe.w, &probe.b};
        std::array<const DenseMatrix*, 2> grads = {&t.grad(w), &t.grad(b)};
        adam_step(params, grads, adam, cfg.lr, cfg.weight_decay);
    }
    return probe;
}

int predict_row(const LinearProbe& probe, std::span<const double> z_row) {
    if (z_row.size() != probe.w.rows()) throw ShapeError("predict: embedding width");
    std::vector<double> logits(probe.b.values());
    for (std::size_t k = 0; k < z_row.size(); ++k) {
        if (z_row[k] == 0.0) continue;
        for (std::size_t c = 0; c < logits.size(); ++c) logits[c] += z_row[k] * probe.w(k, c);
    }
    return argmax(logits);
}

std::vector<int> predict(const LinearProbe& probe, const DenseMatrix& z) {
    std::vector<int> out(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) out[r] = predict_row(probe, z.row(r));
    return out;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                std::span<const NodeId> nodes) {
    if (nodes.empty()) return 0.0;
    std::size_t hit = 0;
    for (NodeId v : nodes) hit += predictions[v] == labels[v];
    return double(hit) / double(nodes.size());
}

// ---- Surrogate ------------------------------------------------------------------

SurrogateModel SurrogateModel::from_weights(DenseMatrix w1, DenseMatrix w2) {
    SurrogateModel s{std::move(w1), std::move(w2), {}};
    s.w_bar = multiply(s.w1, s.w2);
    return s;
}

SurrogateModel surrogate_fit(const Graph& g, std::uint64_t seed, const SurrogateConfig& cfg) {
    if (!g.labels() || !g.splits()) throw DataError("surrogate needs labels and splits");
    const auto& train = g.splits()->train;
    if (train.empty()) throw DataError("surrogate: empty training split");
    const std::size_t c = std::size_t(g.num_classes());

    Rng rng = make_stream(seed, StreamPurpose::surrogate);
    DenseMatrix w1 = glorot(rng, g.num_features(), cfg.hidden);
    DenseMatrix w2 = glorot(rng, cfg.hidden, c);
    const auto op = normalized_adjacency(g);
    std::vector<std::size_t> rows(train.begin(), train.end());
    AdamState adam;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape t;
        auto adj = attach(t, op, false, false);
        Var x = t.constant(g.features());
        Var a = t.leaf(w1);
        Var b = t.leaf(w2);
        Var h = spmm(t, adj, ops::matmul(t, x, a));
        Var logits = spmm(t, adj, ops::matmul(t, h, b));
        Var loss = ops::softmax_cross_entropy(t, logits, *g.labels(), rows);
        if (!std::isfinite(t.value(loss).item()))
            throw NumericalError("surrogate training diverged");
        t.backward(loss);
        std::array<DenseMatrix*, 2> params = {&w1, &w2};
        std::array<const DenseMatrix*, 2> grads = {&t.grad(a), &t.grad(b)};
        adam_step(params, grads, adam, cfg.lr, cfg.weight_decay);
    }
    return SurrogateModel::from_weights(std::move(w1), std::move(w2));
}

DenseMatrix surrogate_logits(const SurrogateModel& s, const Graph& g) {
    const auto op = normalized_adjacency(g);
    return op.apply(op.apply(multiply(g.features(), s.w_bar)));
}

double classification_margin(std::span<const double> logits, int label) {
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < logits.size(); ++c)
        if (int(c) != label) best_other = std::max(best_other, logits[c]);
    return logits[std::size_t(label)] - best_other;
}

// ---- Targets and attack -----------------------------------------------------------

std::vector<NodeId> TargetSet::all() const {
    std::vector<NodeId> out = easiest;
    out.insert(out.end(), hardest.begin(), hardest.end());
    out.insert(out.end(), random.begin(), random.end());
    return out;
}

TargetSet select_targets(const SurrogateModel& s, const Graph& g, std::uint64_t seed) {
    if (!g.splits() || !g.labels()) throw DataError("target selection needs labels and splits");
    const auto& test = g.splits()->test;
    if (test.size() < 40) throw DataError("test split has fewer than 40 nodes");
    const DenseMatrix logits = surrogate_logits(s, g);

    TargetSet ts;
    for (NodeId v : test) ts.margins.emplace_back(v, classification_margin(logits.row(v), true_label(g, v)));
    std::sort(ts.margins.begin(), ts.margins.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    const std::size_t m = ts.margins.size();
    for (std::size_t i = 0; i < 10; ++i) ts.easiest.push_back(ts.margins[i].first);
    for (std::size_t i = 0; i < 10; ++i) ts.hardest.push_back(ts.margins[m - 1 - i].first);

    std::vector<NodeId> rest;
    for (std::size_t i = 10; i < m - 10; ++i) rest.push_back(ts.margins[i].first);
    std::sort(rest.begin(), rest.end());
    Rng rng = make_stream(seed, StreamPurpose::targets);
    shuffle(rest, rng);
    ts.random.assign(rest.begin(), rest.begin() + 20);
    return ts;
}

double surrogate_margin(const Graph& g, NodeId target, const SurrogateModel& s,
                        std::span<const Flip> flips) {
    MutableAdjacency adj(g);
    for (const auto& f : flips) adj.flip(f.u, f.v);
    const DenseMatrix xw = multiply(g.features(), s.w_bar);
    return classification_margin(adj.logits(target, xw), true_label(g, target));
}

AttackResult attack_evasion(const Graph& g, NodeId target, std::size_t budget,
                            const SurrogateModel& s) {
    if (target >= g.num_nodes()) throw std::invalid_argument("attack target out of range");
    const int label = true_label(g, target);
    const DenseMatrix xw = multiply(g.features(), s.w_bar);
    MutableAdjacency adj(g);

    AttackResult res;
    res.target = target;
    res.budget = budget;
    double current = classification_margin(adj.logits(target, xw), label);
    res.margins.push_back(current);
    std::vector<char> used(g.num_nodes(), 0);

    for (std::size_t step = 0; step < budget; ++step) {
        double best_margin = current;
        NodeId best = target;
        for (NodeId u = 0; u < g.num_nodes(); ++u) {
            if (u == target || used[u]) continue;
            adj.flip(target, u);
            const double m = classification_margin(adj.logits(target, xw), label);
            adj.flip(target, u);
            if (m < best_margin) {
                best_margin = m;
                best = u;
            }
        }
        if (best == target) break;
        const FlipKind kind = adj.has(target, best) ? FlipKind::remove : FlipKind::insert;
        adj.flip(target, best);
        used[best] = 1;
        res.flips.push_back({std::min(target, best), std::max(target, best), kind});
        current = best_margin;
        res.margins.push_back(current);
    }
    res.final_prediction = argmax(adj.logits(target, xw));
    return res;
}

Graph apply_flips(const Graph& g, std::span<const Flip> flips) {
    std::map<std::pair<NodeId, NodeId>, double> edges;
    for (const auto& e : g.edges()) edges[{e.u, e.v}] = e.w;
    for (const auto& f : flips) {
        const auto key = std::make_pair(std::min(f.u, f.v), std::max(f.u, f.v));
        if (key.first == key.second) throw std::invalid_argument("flip would create a self-loop");
        const bool present = edges.count(key) > 0;
        if (f.kind == FlipKind::remove) {
            if (!present) throw std::invalid_argument("removal flip of a missing edge");
            edges.erase(key);
        } else {
            if (present) throw std::invalid_argument("insertion flip of an existing edge");
            edges[key] = 1.0;
        }
    }
    std::vector<Edge> out;
    out.reserve(edges.size());
    for (const auto& [k, w] : edges) out.push_back({k.first, k.second, w});
    return g.with_edges(std::move(out));
}

nlohmann::json to_json(const AttackResult& a) {
    nlohmann::json j;
    j["target"] = a.target;
    j["budget"] = a.budget;
    auto flips = nlohmann::json::array();
    for (const auto& f : a.flips)
        flips.push_back({{"u", f.u}, {"v", f.v}, {"kind", f.kind == FlipKind::insert ? "insert" : "remove"}});
    j["flips"] = flips;
    j["margins"] = a.margins;
    j["final_prediction"] = a.final_prediction;
    return j;
}

// ---- Robust accuracy -------------------------------------------------------------------

RobustnessReport robust_accuracy(const EncoderParams& encoder, const LinearProbe& probe,
                                 const Graph& g, std::span<const NodeId> targets,
                                 const SurrogateModel& s, std::span<const std::size_t> budgets,
                                 unsigned threads) {
    RobustnessReport rep;
    rep.budgets.push_back(0);
    for (auto b : budgets) rep.budgets.push_back(b);
    std::sort(rep.budgets.begin(), rep.budgets.end());
    rep.budgets.erase(std::unique(rep.budgets.begin(), rep.budgets.end()), rep.budgets.end());
    const std::size_t max_budget = rep.budgets.back();

    rep.attacks.resize(targets.size());
    rep.predictions.assign(targets.size(), std::vector<int>(rep.budgets.size(), -1));
    const DenseMatrix clean = embed(g, encoder);

    auto work = [&](std::size_t i) {
        const NodeId t = targets[i];
        rep.attacks[i] = attack_evasion(g, t, max_budget, s);
        const auto& flips = rep.attacks[i].flips;
        for (std::size_t bi = 0; bi < rep.budgets.size(); ++bi) {
            const std::size_t k = std::min(rep.budgets[bi], flips.size());
            if (k == 0) {
                rep.predictions[i][bi] = predict_row(probe, clean.row(t));
                continue;
            }
            const Graph attacked = apply_flips(g, std::span(flips).first(k));
            const DenseMatrix z = embed(attacked, encoder);
            rep.predictions[i][bi] = predict_row(probe, z.row(t));
        }
    };

    threads = std::max(1u, threads);
    if (threads == 1 || targets.size() < 2) {
        for (std::size_t i = 0; i < targets.size(); ++i) work(i);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < targets.size(); i += threads) work(i);
            });
        }
    }

    for (std::size_t bi = 0; bi < rep.budgets.size(); ++bi) {
        std::size_t correct = 0, clean_total = 0, clean_kept = 0;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const int y = true_label(g, targets[i]);
            const bool ok = rep.predictions[i][bi] == y;
            correct += ok;
            if (rep.predictions[i][0] == y) {
                ++clean_total;
                clean_kept += ok;
            }
        }
        rep.accuracy.push_back(targets.empty() ? 0.0 : double(correct) / double(targets.size()));
        rep.accuracy_if_clean.push_back(clean_total == 0 ? 0.0 : double(clean_kept) / double(clean_total));
    }
    return rep;
}

} // namespace groc
