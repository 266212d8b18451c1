#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "groc/dense_matrix.hpp"
#include "groc/graph.hpp"

namespace groc {

// Dataset directory layout:
//   features.csv  n rows of d comma-separated values
//   edges.csv     rows "u,v" (0-based), optional third weight column
//   labels.csv    optional, one class id per row
//   splits.json   optional, {"train": [...], "val": [...], "test": [...]}
// The loader applies preprocess().
Graph load_graph(const std::filesystem::path& dir);
void save_graph(const Graph& g, const std::filesystem::path& dir);

// Plain numeric CSV without header.
DenseMatrix read_matrix_csv(const std::filesystem::path& file);
void write_matrix_csv(const DenseMatrix& m, const std::filesystem::path& file);

// Shortest decimal form that round-trips exactly.
std::string format_double(double v);

} // namespace groc
