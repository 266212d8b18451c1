#pragma once

// Independent oracles and fixtures shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "groc/dense_matrix.hpp"
#include "groc/graph.hpp"

namespace groc::test {

// Erdős–Rényi graph with random binary features; std::mt19937 on purpose so
// fixtures do not share code with the library's stream derivation.
inline Graph random_graph(std::size_t n, double p, std::size_t d, std::uint32_t seed,
                          int classes = 0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Edge> edges;
    for (NodeId a = 0; a < n; ++a)
        for (NodeId b = a + 1; b < n; ++b)
            if (u(rng) < p) edges.push_back({a, b, 1.0});
    DenseMatrix x(n, d);
    for (auto& v : x.values()) v = u(rng) < 0.5 ? 1.0 : 0.0;
    std::optional<std::vector<int>> labels;
    if (classes > 0) {
        labels.emplace(n);
        for (std::size_t i = 0; i < n; ++i) (*labels)[i] = int(i % std::size_t(classes));
    }
    return Graph(n, std::move(x), std::move(edges), labels);
}

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, std::uint32_t seed, double lo = -1.0,
                                 double hi = 1.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    DenseMatrix m(r, c);
    for (auto& v : m.values()) v = u(rng);
    return m;
}

// Dense D^-1/2 (A + I) D^-1/2 from a weighted edge list.
inline DenseMatrix dense_normalized(std::size_t n, const std::vector<Edge>& edges) {
    DenseMatrix a = DenseMatrix::identity(n);
    for (const auto& e : edges) {
        a(e.u, e.v) += e.w;
        a(e.v, e.u) += e.w;
    }
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i] += a(i, j);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) /= std::sqrt(d[i] * d[j]);
    return a;
}

inline DenseMatrix dense_mul(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k)
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
    return c;
}

// All-pairs hop distances (Floyd–Warshall), unreachable = large.
inline std::vector<std::vector<int>> hop_distances(const Graph& g) {
    const std::size_t n = g.num_nodes();
    const int inf = 1 << 20;
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
    for (const auto& e : g.edges()) d[e.u][e.v] = d[e.v][e.u] = 1;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
    return d;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("groc_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace groc::test
