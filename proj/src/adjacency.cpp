#include "groc/adjacency.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "groc/errors.hpp"

namespace groc {

namespace {

struct Normalization {
    std::vector<double> degrees;
    std::vector<double> inv_sqrt;
    std::vector<double> entries;
};

Normalization normalize(const AdjacencyPattern& p, std::span<const double> w) {
    Normalization out;
    out.degrees.assign(p.num_nodes, 1.0);
    for (std::size_t k = 0; k < p.num_slots(); ++k) {
        out.degrees[p.endpoints[k].first] += w[k];
        out.degrees[p.endpoints[k].second] += w[k];
    }
    out.inv_sqrt.resize(p.num_nodes);
    for (std::size_t i = 0; i < p.num_nodes; ++i) {
        if (!(out.degrees[i] > 0.0))
            throw NumericalError("normalized adjacency: non-positive degree at node " +
                                 std::to_string(i));
        out.inv_sqrt[i] = 1.0 / std::sqrt(out.degrees[i]);
    }
    out.entries.resize(p.num_slots());
    for (std::size_t k = 0; k < p.num_slots(); ++k) {
        const auto [u, v] = p.endpoints[k];
        out.entries[k] = w[k] / std::sqrt(out.degrees[u] * out.degrees[v]);
    }
    return out;
}

DenseMatrix propagate(const AdjacencyPattern& p, const Normalization& nz, const DenseMatrix& m) {
    if (m.rows() != p.num_nodes)
        throw ShapeError("spmm: operator has " + std::to_string(p.num_nodes) +
                         " columns but matrix has " + std::to_string(m.rows()) + " rows");
    DenseMatrix out(m.rows(), m.cols());
    const std::size_t c = m.cols();
    for (std::size_t i = 0; i < p.num_nodes; ++i) {
        double* o = out.row(i).data();
        const double d = 1.0 / nz.degrees[i];
        const double* mi = m.row(i).data();
        for (std::size_t j = 0; j < c; ++j) o[j] = d * mi[j];
        for (std::size_t t = p.offsets[i]; t < p.offsets[i + 1]; ++t) {
            const auto& inc = p.incidences[t];
            const double a = nz.entries[inc.slot];
            const double* mj = m.row(inc.node).data();
            for (std::size_t j = 0; j < c; ++j) o[j] += a * mj[j];
        }
    }
    return out;
}

std::shared_ptr<AdjacencyPattern> build_pattern(std::size_t n, std::span<const Edge> base,
                                                std::span<const Edge> extra,
                                                std::vector<double>& weights) {
    auto p = std::make_shared<AdjacencyPattern>();
    p->num_nodes = n;
    p->num_base = base.size();
    weights.clear();
    auto add = [&](const Edge& e) {
        if (e.u == e.v) throw DataError("adjacency: self-loop edge");
        if (e.u >= n || e.v >= n) throw DataError("adjacency: edge endpoint out of range");
        if (!(e.w > 0.0 && e.w <= 1.0)) throw DataError("adjacency: edge weight outside (0, 1]");
        p->endpoints.emplace_back(std::min(e.u, e.v), std::max(e.u, e.v));
        weights.push_back(e.w);
    };
    for (const auto& e : base) add(e);
    for (const auto& e : extra) add(e);

    auto sorted = p->endpoints;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DataError("adjacency: duplicate edge (extra edge already present?)");

    p->offsets.assign(n + 1, 0);
    for (const auto& [u, v] : p->endpoints) {
        ++p->offsets[u + 1];
        ++p->offsets[v + 1];
    }
    for (std::size_t i = 0; i < n; ++i) p->offsets[i + 1] += p->offsets[i];
    p->incidences.resize(p->offsets.back());
    std::vector<std::size_t> cursor(p->offsets.begin(), p->offsets.end() - 1);
    for (std::size_t k = 0; k < p->num_slots(); ++k) {
        const auto [u, v] = p->endpoints[k];
        p->incidences[cursor[u]++] = {v, k};
        p->incidences[cursor[v]++] = {u, k};
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::sort(p->incidences.begin() + long(p->offsets[i]),
                  p->incidences.begin() + long(p->offsets[i + 1]),
                  [](const auto& a, const auto& b) { return a.node < b.node; });
    }
    return p;
}

class SpmmOp final : public Op {
public:
    SpmmOp(std::shared_ptr<const AdjacencyPattern> p, bool detach)
        : pattern_(std::move(p)), detach_(detach) {}

    std::string name() const override { return "spmm"; }

    DenseMatrix forward(std::span<const DenseMatrix* const> in) override {
        const auto& w = *in[0];
        if (w.rows() != pattern_->num_slots() || w.cols() != 1)
            throw ShapeError("spmm: weight vector does not match the pattern");
        nz_ = normalize(*pattern_, w.values());
        return propagate(*pattern_, nz_, *in[1]);
    }

    void backward(std::span<const DenseMatrix* const> in, const DenseMatrix&, const DenseMatrix& g,
                  std::span<DenseMatrix* const> gin) override {
        const auto& p = *pattern_;
        const auto& m = *in[1];
        if (gin[1]) *gin[1] += propagate(p, nz_, g);  // Â is symmetric
        if (!gin[0]) return;

        const std::size_t c = m.cols();
        auto dot = [c](const double* a, const double* b) {
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) s += a[j] * b[j];
            return s;
        };

        // S_i = sum_j (P_ij + P_ji) Â_ij with P = G M^T, so that
        // dL/dd_i = -S_i / (2 d_i).
        std::vector<double> s(p.num_nodes, 0.0);
        auto& gw = gin[0]->values();
        for (std::size_t k = 0; k < p.num_slots(); ++k) {
            const auto [u, v] = p.endpoints[k];
            const double pair = dot(g.row(u).data(), m.row(v).data()) +
                                dot(g.row(v).data(), m.row(u).data());
            gw[k] += pair * nz_.inv_sqrt[u] * nz_.inv_sqrt[v];
            const double contrib = pair * nz_.entries[k];
            s[u] += contrib;
            s[v] += contrib;
        }
        if (detach_) return;
        for (std::size_t i = 0; i < p.num_nodes; ++i)
            s[i] += 2.0 * dot(g.row(i).data(), m.row(i).data()) / nz_.degrees[i];
        std::vector<double> dd(p.num_nodes);
        for (std::size_t i = 0; i < p.num_nodes; ++i) dd[i] = -s[i] / (2.0 * nz_.degrees[i]);
        for (std::size_t k = 0; k < p.num_slots(); ++k) {
            const auto [u, v] = p.endpoints[k];
            gw[k] += dd[u] + dd[v];
        }
    }

private:
    std::shared_ptr<const AdjacencyPattern> pattern_;
    bool detach_;
    Normalization nz_;
};

} // namespace

AdjacencyOperator::AdjacencyOperator(std::size_t num_nodes, std::span<const Edge> base,
                                     std::span<const Edge> extra) {
    pattern_ = build_pattern(num_nodes, base, extra, weights_);
    auto nz = normalize(*pattern_, weights_);
    degrees_ = std::move(nz.degrees);
    entries_ = std::move(nz.entries);
}

DenseMatrix AdjacencyOperator::dense() const {
    const std::size_t n = num_nodes();
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) = diagonal(NodeId(i));
    for (std::size_t k = 0; k < num_slots(); ++k) {
        const auto [u, v] = pattern_->endpoints[k];
        a(u, v) = entries_[k];
        a(v, u) = entries_[k];
    }
    return a;
}

DenseMatrix AdjacencyOperator::apply(const DenseMatrix& m) const {
    Normalization nz{degrees_, {}, entries_};
    return propagate(*pattern_, nz, m);
}

AdjacencyOperator normalized_adjacency(const Graph& g, std::span<const Edge> extra) {
    for (const auto& e : extra) {
        if (g.has_edge(e.u, e.v))
            throw DataError("normalized_adjacency: extra edge (" + std::to_string(e.u) + "," +
                            std::to_string(e.v) + ") duplicates a base edge");
    }
    return AdjacencyOperator(g.num_nodes(), g.edges(), extra);
}

AdjacencyVar attach(Tape& tape, const AdjacencyOperator& op, bool detach_normalization,
                    bool differentiable) {
    DenseMatrix w(op.num_slots(), 1, op.weights());
    Var v = differentiable ? tape.leaf(std::move(w)) : tape.constant(std::move(w));
    return {op.pattern(), v, detach_normalization};
}

Var spmm(Tape& tape, const AdjacencyVar& adj, Var m) {
    return tape.record(std::make_unique<SpmmOp>(adj.pattern, adj.detach_normalization),
                       {adj.weights, m});
}

} // namespace groc
