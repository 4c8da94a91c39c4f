#include "pixelreg/grid_graph.hpp"

#include <cassert>
#include <stdexcept>

namespace pixelreg::graph {

EdgeList build_grid_edges(GridShape shape, Connectivity connectivity) {
  if (!shape.valid()) throw std::invalid_argument("build_grid_edges: empty grid");
  EdgeList out;
  out.shape = shape;
  out.connectivity = connectivity;
  out.edges.reserve(static_cast<std::size_t>(grid_edge_count(shape, connectivity)));
  const int rows = shape.rows, cols = shape.cols;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = shape.index(r, c);
      if (c + 1 < cols) out.edges.emplace_back(i, shape.index(r, c + 1));
      if (r + 1 < rows) out.edges.emplace_back(i, shape.index(r + 1, c));
      if (connectivity == Connectivity::N8 && r + 1 < rows) {
        if (c + 1 < cols) out.edges.emplace_back(i, shape.index(r + 1, c + 1));
        if (c - 1 >= 0) out.edges.emplace_back(i, shape.index(r + 1, c - 1));
      }
    }
  }
  out.weights.assign(out.edges.size(), 1.0);
  return out;
}

EdgeList masked_subgraph(const EdgeList& edges, const std::vector<std::uint8_t>& member) {
  if (member.size() != static_cast<std::size_t>(edges.shape.vertex_count()))
    throw std::invalid_argument("masked_subgraph: mask size mismatch");
  EdgeList out;
  out.shape = edges.shape;
  out.connectivity = edges.connectivity;
  for (std::size_t e = 0; e < edges.edges.size(); ++e) {
    auto [i, j] = edges.edges[e];
    if (member[i] && member[j]) {
      out.edges.emplace_back(i, j);
      out.weights.push_back(edges.weights[e]);
    }
  }
  return out;
}

WeightedLaplacian laplacian_from_edges(const EdgeList& edges) {
  WeightedLaplacian lap;
  lap.n = edges.shape.vertex_count();
  lap.edges = edges;
  lap.degree.assign(lap.n, 0.0);
  for (std::size_t e = 0; e < edges.edges.size(); ++e) {
    auto [i, j] = edges.edges[e];
    const double w = edges.weights[e];
    lap.degree[i] += w;
    lap.degree[j] += w;
  }
  return lap;
}

double quadratic_form(const WeightedLaplacian& lap, const std::vector<double>& y) {
  assert(y.size() == static_cast<std::size_t>(lap.n));
  double acc = 0.0;
  for (std::size_t e = 0; e < lap.edges.edges.size(); ++e) {
    auto [i, j] = lap.edges.edges[e];
    const double d = y[i] - y[j];
    acc += lap.edges.weights[e] * d * d;
  }
  return acc;
}

std::vector<double> laplacian_matvec(const WeightedLaplacian& lap, const std::vector<double>& y) {
  assert(y.size() == static_cast<std::size_t>(lap.n));
  std::vector<double> out(lap.n);
  for (int i = 0; i < lap.n; ++i) out[i] = lap.degree[i] * y[i];
  for (std::size_t e = 0; e < lap.edges.edges.size(); ++e) {
    auto [i, j] = lap.edges.edges[e];
    const double w = lap.edges.weights[e];
    out[i] -= w * y[j];
    out[j] -= w * y[i];
  }
  return out;
}

long long grid_edge_count(GridShape shape, Connectivity connectivity) {
  const long long r = shape.rows, c = shape.cols;
  long long n4 = r * (c - 1) + c * (r - 1);
  if (connectivity == Connectivity::N4) return n4;
  return n4 + 2 * (r - 1) * (c - 1);
}

}  // namespace pixelreg::graph
