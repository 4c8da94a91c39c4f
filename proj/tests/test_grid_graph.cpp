#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pixelreg/grid_graph.hpp"
#include "pixelreg/rng.hpp"
#include "support/dense_oracle.hpp"

using namespace pixelreg;
using namespace pixelreg::graph;

TEST_CASE("2x2 N4 edges come out in scan order") {
  auto el = build_grid_edges({2, 2}, Connectivity::N4);
  std::vector<std::pair<int, int>> want = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
  CHECK(el.edges == want);
  CHECK(el.weights == std::vector<double>(4, 1.0));
}

TEST_CASE("2x2 N8 adds both diagonals") {
  auto el = build_grid_edges({2, 2}, Connectivity::N8);
  std::vector<std::pair<int, int>> want = {{0, 1}, {0, 2}, {0, 3}, {1, 3}, {1, 2}, {2, 3}};
  CHECK(el.edges == want);
}

TEST_CASE("3x3 N4 matches an exhaustive adjacency scan") {
  auto el = build_grid_edges({3, 3}, Connectivity::N4);
  CHECK(el.edges.size() == 12);
  std::set<std::pair<int, int>> got(el.edges.begin(), el.edges.end());
  CHECK(got.size() == el.edges.size());
  std::set<std::pair<int, int>> want;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      for (int rr = 0; rr < 3; ++rr)
        for (int cc = 0; cc < 3; ++cc) {
          int manhattan = std::abs(r - rr) + std::abs(c - cc);
          if (manhattan != 1) continue;
          int i = r * 3 + c, j = rr * 3 + cc;
          want.insert({std::min(i, j), std::max(i, j)});
        }
  CHECK(got == want);
}

TEST_CASE("edge counts match the closed form for all small grids") {
  for (int r = 1; r <= 8; ++r)
    for (int c = 1; c <= 8; ++c)
      for (auto conn : {Connectivity::N4, Connectivity::N8}) {
        auto el = build_grid_edges({r, c}, conn);
        CHECK(static_cast<long long>(el.edges.size()) == grid_edge_count({r, c}, conn));
        for (auto [i, j] : el.edges) {
          CHECK(i < j);
          CHECK(j < r * c);
        }
      }
}

TEST_CASE("every edge is stored exactly once") {
  auto el = build_grid_edges({5, 7}, Connectivity::N8);
  std::set<std::pair<int, int>> seen(el.edges.begin(), el.edges.end());
  CHECK(seen.size() == el.edges.size());
}

TEST_CASE("single-edge Laplacian is [[1,-1],[-1,1]]") {
  EdgeList el;
  el.shape = {1, 2};
  el.connectivity = Connectivity::N4;
  el.edges = {{0, 1}};
  el.weights = {1.0};
  auto lap = laplacian_from_edges(el);
  CHECK(lap.degree == std::vector<double>{1.0, 1.0});
  auto lv = laplacian_matvec(lap, {1.0, 0.0});
  CHECK(lv == std::vector<double>{1.0, -1.0});
  CHECK(quadratic_form(lap, {1.0, 0.0}) == 1.0);
}

TEST_CASE("path graph matvec on [0,1,0]") {
  auto el = build_grid_edges({1, 3}, Connectivity::N4);
  auto lap = laplacian_from_edges(el);
  auto lv = laplacian_matvec(lap, {0.0, 1.0, 0.0});
  CHECK(lv == std::vector<double>{-1.0, 2.0, -1.0});
}

TEST_CASE("masked subgraph keeps only fully interior edges") {
  auto el = build_grid_edges({2, 2}, Connectivity::N4);
  el.weights = {0.5, 0.25, 0.125, 0.0625};
  std::vector<std::uint8_t> member = {1, 1, 0, 1};
  auto sub = masked_subgraph(el, member);
  std::vector<std::pair<int, int>> want = {{0, 1}, {1, 3}};
  CHECK(sub.edges == want);
  CHECK(sub.weights == std::vector<double>{0.5, 0.125});
}

TEST_CASE("sparse results agree with dense D - A on random weighted grids") {
  Rng rng(20260816);
  double worst_qf = 0.0, worst_mv = 0.0;
  for (int iter = 0; iter < 1000; ++iter) {
    int r = static_cast<int>(rng.uniform_int(1, 8));
    int c = static_cast<int>(rng.uniform_int(1, 8));
    auto conn = rng.uniform() < 0.5 ? Connectivity::N4 : Connectivity::N8;
    auto el = build_grid_edges({r, c}, conn);
    for (auto& w : el.weights) w = rng.uniform();
    auto lap = laplacian_from_edges(el);
    auto dense = testsupport::dense_laplacian(el);

    std::vector<double> y(el.shape.vertex_count());
    for (auto& x : y) x = rng.uniform(-2.0, 2.0);

    double qf = quadratic_form(lap, y);
    double qf_ref = testsupport::dense_quadratic_form(dense, y);
    worst_qf = std::max(worst_qf, std::abs(qf - qf_ref) / std::max(1.0, std::abs(qf_ref)));

    auto mv = laplacian_matvec(lap, y);
    auto mv_ref = testsupport::dense_matvec(dense, y);
    for (std::size_t i = 0; i < mv.size(); ++i)
      worst_mv = std::max(worst_mv, std::abs(mv[i] - mv_ref[i]));
  }
  CHECK(worst_qf < 1e-12);
  CHECK(worst_mv < 1e-12);
}

TEST_CASE("Laplacian annihilates constants and stays PSD") {
  Rng rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    int r = static_cast<int>(rng.uniform_int(1, 6));
    int c = static_cast<int>(rng.uniform_int(1, 6));
    auto el = build_grid_edges({r, c}, Connectivity::N8);
    for (auto& w : el.weights) w = rng.uniform();
    auto lap = laplacian_from_edges(el);

    std::vector<double> ones(el.shape.vertex_count(), 1.0);
    for (double v : laplacian_matvec(lap, ones)) CHECK(std::abs(v) < 1e-12);

    std::vector<double> y(el.shape.vertex_count());
    for (auto& x : y) x = rng.uniform(-3.0, 3.0);
    CHECK(quadratic_form(lap, y) >= 0.0);
  }
}

TEST_CASE("degenerate shapes are rejected") {
  CHECK_THROWS_AS(build_grid_edges({0, 4}, Connectivity::N4), std::invalid_argument);
  CHECK_THROWS_AS(build_grid_edges({3, 0}, Connectivity::N8), std::invalid_argument);
}
