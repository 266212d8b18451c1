#include <cmath>

#include "doctest.h"
#include "support.hpp"

#include "groc/adjacency.hpp"
#include "groc/errors.hpp"

using namespace groc;

namespace {

std::vector<Edge> all_edges(const AdjacencyOperator& op) {
    std::vector<Edge> out;
    const auto& p = *op.pattern();
    for (std::size_t k = 0; k < p.num_slots(); ++k)
        out.push_back({p.endpoints[k].first, p.endpoints[k].second, op.weights()[k]});
    return out;
}

} // namespace

TEST_CASE("single edge and edgeless operators") {
    const Edge e{0, 1, 1.0};
    AdjacencyOperator op(2, std::span<const Edge>(&e, 1));
    CHECK(op.dense() == DenseMatrix{{0.5, 0.5}, {0.5, 0.5}});
    CHECK(op.apply(DenseMatrix{{1.0}, {0.0}}) == DenseMatrix{{0.5}, {0.5}});

    AdjacencyOperator empty(3, {});
    CHECK(empty.dense() == DenseMatrix::identity(3));
    const DenseMatrix m = test::random_matrix(3, 2, 1);
    CHECK(empty.apply(m) == m);
}

TEST_CASE("triangle plus a weighted extra edge matches the dense oracle") {
    const std::vector<Edge> base = {{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}};
    const std::vector<Edge> extra = {{2, 3, 0.25}};
    AdjacencyOperator op(4, base, extra);
    std::vector<Edge> all = base;
    all.insert(all.end(), extra.begin(), extra.end());
    CHECK(max_abs_diff(op.dense(), test::dense_normalized(4, all)) < 1e-15);
    CHECK(op.num_extra() == 1);
    CHECK(op.degrees()[2] == 3.25);
}

TEST_CASE("normalized adjacency is exactly symmetric with D^1/2 1 as a fixed point") {
    for (std::uint32_t seed : {1u, 2u, 3u}) {
        const Graph g = test::random_graph(25, 0.2, 3, seed);
        const std::vector<Edge> extra = {{0, 24, 0.125}};
        if (g.has_edge(0, 24)) continue;
        const auto op = normalized_adjacency(g, extra);
        const DenseMatrix a = op.dense();
        // Row sums are positive but not bounded by 1 (a hub row exceeds it);
        // the exact identity is Â D^1/2 1 = D^1/2 1.
        for (std::size_t i = 0; i < 25; ++i) {
            double row = 0.0, weighted = 0.0;
            for (std::size_t j = 0; j < 25; ++j) {
                CHECK(a(i, j) == a(j, i));
                row += a(i, j);
                weighted += a(i, j) * std::sqrt(op.degrees()[j]);
            }
            CHECK(row > 0.0);
            CHECK(weighted == doctest::Approx(std::sqrt(op.degrees()[i])).epsilon(1e-13));
            CHECK(op.degrees()[i] >= 1.0);
        }
        auto all = g.edges();
        all.insert(all.end(), extra.begin(), extra.end());
        CHECK(max_abs_diff(a, test::dense_normalized(25, all)) < 1e-14);
        const DenseMatrix m = test::random_matrix(25, 4, seed);
        CHECK(max_abs_diff(op.apply(m), test::dense_mul(a, m)) < 1e-13);
    }
}

TEST_CASE("extra edges must be new and weighted in (0, 1]") {
    const Graph g(3, DenseMatrix(3, 1), {{0, 1, 1.0}});
    const std::vector<Edge> dup = {{0, 1, 0.5}};
    CHECK_THROWS_AS(normalized_adjacency(g, dup), DataError);
    const std::vector<Edge> heavy = {{1, 2, 2.0}};
    CHECK_THROWS_AS(normalized_adjacency(g, heavy), DataError);
}

TEST_CASE("spmm gradients on a random 8-node graph match finite differences") {
    const Graph g = test::random_graph(8, 0.4, 3, 7);
    REQUIRE(g.num_edges() >= 4);
    std::vector<Edge> extra;
    for (NodeId v = 1; v < 8 && extra.size() < 2; ++v)
        if (!g.has_edge(0, v)) extra.push_back({0, v, 0.3});
    const auto op = normalized_adjacency(g, extra);

    Tape t;
    auto adj = attach(t, op);
    Var m = t.leaf(test::random_matrix(8, 3, 8));
    Var out = spmm(t, adj, m);
    SUBCASE("sum of output") {
        auto rep = fd_check(t, ops::sum(t, out), std::vector<Var>{adj.weights, m});
        INFO(rep.worst);
        CHECK(rep.max_rel_error < 1e-6);
    }
    SUBCASE("weighted and chained") {
        Var r = t.constant(test::random_matrix(8, 3, 9));
        Var twice = spmm(t, adj, ops::mul(t, out, r));
        auto rep = fd_check(t, ops::sum(t, ops::mul(t, twice, r)), std::vector<Var>{adj.weights, m});
        INFO(rep.worst);
        CHECK(rep.max_rel_error < 1e-6);
    }
}

TEST_CASE("detached normalization differentiates the numerator only") {
    const Graph g = test::random_graph(8, 0.4, 2, 17);
    const auto op = normalized_adjacency(g);
    const DenseMatrix m = test::random_matrix(8, 2, 18);
    const DenseMatrix r = test::random_matrix(8, 2, 19);

    Tape t;
    auto adj = attach(t, op, true);
    Var loss = ops::sum(t, ops::mul(t, spmm(t, adj, t.constant(m)), t.constant(r)));
    t.backward(loss);

    // Oracle: frozen degrees, perturb only the adjacency numerator.
    const auto edges = all_edges(op);
    const auto& d = op.degrees();
    auto frozen_loss = [&](const std::vector<Edge>& es) {
        DenseMatrix a = DenseMatrix::identity(8);
        for (const auto& e : es) a(e.u, e.v) = a(e.v, e.u) = e.w;
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) a(i, j) /= std::sqrt(d[i] * d[j]);
        const DenseMatrix y = test::dense_mul(a, m);
        double s = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) s += y.values()[k] * r.values()[k];
        return s;
    };
    for (std::size_t k = 0; k < edges.size(); ++k) {
        auto plus = edges, minus = edges;
        plus[k].w += 1e-5;
        minus[k].w -= 1e-5;
        const double fd = (frozen_loss(plus) - frozen_loss(minus)) / 2e-5;
        CHECK(t.grad(adj.weights).values()[k] == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("identity operator gradient is the upstream column sum") {
    AdjacencyOperator op(4, {});
    Tape t;
    auto adj = attach(t, op);
    Var x = t.leaf(test::random_matrix(4, 3, 5));
    t.backward(ops::sum(t, spmm(t, adj, x)));
    CHECK(t.grad(x) == DenseMatrix(4, 3, 1.0));
}

TEST_CASE("non-differentiable attachment exposes no edge gradient") {
    const Graph g = test::random_graph(6, 0.5, 2, 3);
    const auto op = normalized_adjacency(g);
    Tape t;
    auto adj = attach(t, op, false, false);
    Var x = t.leaf(test::random_matrix(6, 2, 4));
    t.backward(ops::sum(t, spmm(t, adj, x)));
    CHECK_FALSE(t.requires_grad(adj.weights));
    CHECK(t.grad(x).all_finite());
}
