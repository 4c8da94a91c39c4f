#pragma once

#include <string_view>
#include <vector>

#include "pixelreg/grid_graph.hpp"
#include "pixelreg/image.hpp"

namespace pixelreg::reg {

struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;  // d(value)/dy per pixel, row-major
};

enum class Normalize { None, PerEdge, PerPixel };

struct RegularizerConfig {
  double lambda = 0.1;
  graph::Connectivity connectivity = graph::Connectivity::N4;
  Normalize normalize = Normalize::PerEdge;
  double fg_threshold = 0.5;
  double clamp_eps = 1e-7;
};

// Which diagonal triangulates every 2x2 block.
// Dir1: (r,c)-(r+1,c+1); Dir2: (r,c+1)-(r+1,c).
enum class EcDirection { Dir1, Dir2 };

enum class ObjectiveKind { Baseline, GbsO1, GlrdnO2, EcO3 };

// w_e = 1 - |t_i - t_j| per edge.
std::vector<double> region_similarity_weights(const Image& t, const graph::EdgeList& edges);

// Negated pixel-mean cross entropy with clamped probabilities.
LossGrad bce_value_grad(const Image& y, const Image& t, const RegularizerConfig& cfg);

// y^T (L_F + L_B) y over similarity-weighted subgraphs of the thresholded
// foreground and its complement.
LossGrad gbs_value_grad(const Image& y, const Image& t, const RegularizerConfig& cfg);

// (t - y)^T L (t - y) over the unit-weight grid Laplacian.
LossGrad glrdn_value_grad(const Image& y, const Image& t, const RegularizerConfig& cfg);

// P - S + F on the triangulated pixel complex. Input must be strictly binary.
long long euler_characteristic_hard(const Image& b, EcDirection dir);

// Multilinear relaxation of the same count: vertices, edges and triangles
// contribute products of their pixels' probabilities. Exact at binary inputs.
LossGrad euler_characteristic_soft(const Image& y, EcDirection dir);

// Mean of the soft counts over both directions.
LossGrad ec_regularizer(const Image& y);

// BCE plus lambda times the kind's regularizer. lambda = 0 (or Baseline)
// short-circuits to BCE alone.
LossGrad objective(const Image& y, const Image& t, ObjectiveKind kind,
                   const RegularizerConfig& cfg);

struct ObjectiveParts {
  LossGrad total;
  double bce_value = 0.0;
  double reg_value = 0.0;  // normalized regularizer value, before lambda
};
ObjectiveParts objective_parts(const Image& y, const Image& t, ObjectiveKind kind,
                               const RegularizerConfig& cfg);

// Foreground component count under 8-connectivity, iterative flood fill.
// Input must be strictly binary.
int count_components_8(const Image& b);

const char* objective_name(ObjectiveKind kind);
bool parse_objective(std::string_view name, ObjectiveKind& out);

}  // namespace pixelreg::reg
