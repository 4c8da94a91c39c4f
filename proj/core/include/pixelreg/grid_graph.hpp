#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace pixelreg::graph {

struct GridShape {
  int rows = 0;
  int cols = 0;
  int vertex_count() const { return rows * cols; }
  int index(int r, int c) const { return r * cols + c; }
  bool valid() const { return rows >= 1 && cols >= 1; }
};

enum class Connectivity { N4, N8 };

// Undirected pixel-grid edges, each stored once as (i, j) with i < j.
// Emission order is row-major per pixel: right, down, then for N8
// down-right and down-left.
struct EdgeList {
  GridShape shape;
  Connectivity connectivity = Connectivity::N4;
  std::vector<std::pair<int, int>> edges;
  std::vector<double> weights;
};

// L = D - A for nonnegative edge weights, kept sparse as the defining
// edge list plus the weighted-degree diagonal.
struct WeightedLaplacian {
  int n = 0;
  EdgeList edges;
  std::vector<double> degree;
};

EdgeList build_grid_edges(GridShape shape, Connectivity connectivity);

// Keeps exactly the edges whose two endpoints are both members.
EdgeList masked_subgraph(const EdgeList& edges, const std::vector<std::uint8_t>& member);

WeightedLaplacian laplacian_from_edges(const EdgeList& edges);

// y^T L y, accumulated per edge as w * (y_i - y_j)^2.
double quadratic_form(const WeightedLaplacian& lap, const std::vector<double>& y);

// (L y)_i, O(|E| + n).
std::vector<double> laplacian_matvec(const WeightedLaplacian& lap, const std::vector<double>& y);

// Closed-form edge count of the full grid.
long long grid_edge_count(GridShape shape, Connectivity connectivity);

}  // namespace pixelreg::graph
