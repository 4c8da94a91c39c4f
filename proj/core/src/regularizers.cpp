#include "pixelreg/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pixelreg::reg {

namespace {

void require_nonempty(const Image& y, const char* what) {
  if (y.rows < 1 || y.cols < 1) throw std::invalid_argument(std::string(what) + ": empty image");
}

double norm_denominator(Normalize mode, std::size_t participating_edges, std::size_t pixels) {
  switch (mode) {
    case Normalize::None:
      return 1.0;
    case Normalize::PerEdge:
      return static_cast<double>(std::max<std::size_t>(participating_edges, 1));
    case Normalize::PerPixel:
      return static_cast<double>(std::max<std::size_t>(pixels, 1));
  }
  return 1.0;
}

LossGrad laplacian_loss(const graph::WeightedLaplacian& lap, const std::vector<double>& x,
                        double denom) {
  LossGrad out;
  out.value = graph::quadratic_form(lap, x) / denom;
  out.grad = graph::laplacian_matvec(lap, x);
  const double s = 2.0 / denom;
  for (auto& g : out.grad) g *= s;
  return out;
}

void require_binary(const Image& b, const char* what) {
  for (double v : b.v)
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument(std::string(what) + ": input is not binary");
}

void require_unit_range(const Image& y, const char* what) {
  for (double v : y.v)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(std::string(what) + ": value outside [0,1]");
}

}  // namespace

std::vector<double> region_similarity_weights(const Image& t, const graph::EdgeList& edges) {
  if (t.rows != edges.shape.rows || t.cols != edges.shape.cols)
    throw std::invalid_argument("region_similarity_weights: shape mismatch");
  std::vector<double> w(edges.edges.size());
  for (std::size_t e = 0; e < edges.edges.size(); ++e) {
    auto [i, j] = edges.edges[e];
    w[e] = 1.0 - std::abs(t.v[i] - t.v[j]);
  }
  return w;
}

LossGrad bce_value_grad(const Image& y, const Image& t, const RegularizerConfig& cfg) {
  require_same_shape(y, t, "bce_value_grad");
  require_nonempty(y, "bce_value_grad");
  const double eps = cfg.clamp_eps;
  const double n = static_cast<double>(y.size());
  LossGrad out;
  out.grad.assign(y.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool clamped = y.v[i] < eps || y.v[i] > 1.0 - eps;
    const double yc = std::clamp(y.v[i], eps, 1.0 - eps);
    const double ti = t.v[i];
    acc += ti * std::log(yc) + (1.0 - ti) * std::log(1.0 - yc);
    if (!clamped) out.grad[i] = (yc - ti) / (yc * (1.0 - yc) * n);
  }
  out.value = -acc / n;
  return out;
}

LossGrad gbs_value_grad(const Image& y, const Image& t, const RegularizerConfig& cfg) {
  require_same_shape(y, t, "gbs_value_grad");
  require_nonempty(y, "gbs_value_grad");
  const graph::GridShape shape{y.rows, y.cols};
  auto edges = graph::build_grid_edges(shape, cfg.connectivity);
  edges.weights = region_similarity_weights(t, edges);

  std::vector<std::uint8_t> fg(y.size()), bg(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    fg[i] = t.v[i] >= cfg.fg_threshold ? 1 : 0;
    bg[i] = fg[i] ? 0 : 1;
  }
  auto lap_f = graph::laplacian_from_edges(graph::masked_subgraph(edges, fg));
  auto lap_b = graph::laplacian_from_edges(graph::masked_subgraph(edges, bg));

  const std::size_t participating = lap_f.edges.edges.size() + lap_b.edges.edges.size();
  const double denom = norm_denominator(cfg.normalize, participating, y.size());

  auto f = laplacian_loss(lap_f, y.v, denom);
  auto b = laplacian_loss(lap_b, y.v, denom);
  LossGrad out;
  out.value = f.value + b.value;
  out.grad = std::move(f.grad);
  for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += b.grad[i];
  return out;
}

LossGrad glrdn_value_grad(const Image& y, const Image& t, const RegularizerConfig& cfg) {
  require_same_shape(y, t, "glrdn_value_grad");
  require_nonempty(y, "glrdn_value_grad");
  const graph::GridShape shape{y.rows, y.cols};
  auto edges = graph::build_grid_edges(shape, cfg.connectivity);
  auto lap = graph::laplacian_from_edges(edges);

  std::vector<double> r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = y.v[i] - t.v[i];

  const double denom = norm_denominator(cfg.normalize, edges.edges.size(), y.size());
  return laplacian_loss(lap, r, denom);
}

long long euler_characteristic_hard(const Image& b, EcDirection dir) {
  require_nonempty(b, "euler_characteristic_hard");
  require_binary(b, "euler_characteristic_hard");
  const int rows = b.rows, cols = b.cols;
  auto on = [&](int r, int c) { return b.at(r, c) != 0.0; };

  long long p = 0, s = 0, f = 0;
  for (double v : b.v) p += v != 0.0 ? 1 : 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols && on(r, c) && on(r, c + 1)) s++;
      if (r + 1 < rows && on(r, c) && on(r + 1, c)) s++;
    }
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) {
      const bool a = on(r, c), bb = on(r, c + 1), cc = on(r + 1, c), dd = on(r + 1, c + 1);
      if (dir == EcDirection::Dir1) {
        if (a && dd) s++;
        if (a && bb && dd) f++;
        if (a && cc && dd) f++;
      } else {
        if (bb && cc) s++;
        if (a && bb && cc) f++;
        if (bb && cc && dd) f++;
      }
    }
  return p - s + f;
}

LossGrad euler_characteristic_soft(const Image& y, EcDirection dir) {
  require_nonempty(y, "euler_characteristic_soft");
  require_unit_range(y, "euler_characteristic_soft");
  const int rows = y.rows, cols = y.cols;
  auto idx = [&](int r, int c) { return static_cast<std::size_t>(r) * cols + c; };

  LossGrad out;
  out.grad.assign(y.size(), 1.0);  // d(P~)/dy_i
  double p = 0.0, s = 0.0, f = 0.0;
  for (double v : y.v) p += v;

  auto add_edge = [&](std::size_t i, std::size_t j) {
    s += y.v[i] * y.v[j];
    out.grad[i] -= y.v[j];
    out.grad[j] -= y.v[i];
  };
  auto add_triangle = [&](std::size_t i, std::size_t j, std::size_t k) {
    f += y.v[i] * y.v[j] * y.v[k];
    out.grad[i] += y.v[j] * y.v[k];
    out.grad[j] += y.v[i] * y.v[k];
    out.grad[k] += y.v[i] * y.v[j];
  };

  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) add_edge(idx(r, c), idx(r, c + 1));
      if (r + 1 < rows) add_edge(idx(r, c), idx(r + 1, c));
    }
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) {
      const std::size_t a = idx(r, c), b = idx(r, c + 1), cc = idx(r + 1, c), d = idx(r + 1, c + 1);
      if (dir == EcDirection::Dir1) {
        add_edge(a, d);
        add_triangle(a, b, d);
        add_triangle(a, cc, d);
      } else {
        add_edge(b, cc);
        add_triangle(a, b, cc);
        add_triangle(b, cc, d);
      }
    }
  out.value = p - s + f;
  return out;
}

LossGrad ec_regularizer(const Image& y) {
  auto d1 = euler_characteristic_soft(y, EcDirection::Dir1);
  auto d2 = euler_characteristic_soft(y, EcDirection::Dir2);
  LossGrad out;
  out.value = 0.5 * (d1.value + d2.value);
  out.grad = std::move(d1.grad);
  for (std::size_t i = 0; i < out.grad.size(); ++i)
    out.grad[i] = 0.5 * (out.grad[i] + d2.grad[i]);
  return out;
}

LossGrad objective(const Image& y, const Image& t, ObjectiveKind kind,
                   const RegularizerConfig& cfg) {
  return objective_parts(y, t, kind, cfg).total;
}

ObjectiveParts objective_parts(const Image& y, const Image& t, ObjectiveKind kind,
                               const RegularizerConfig& cfg) {
  if (cfg.lambda < 0.0) throw std::invalid_argument("objective: lambda must be nonnegative");
  ObjectiveParts parts;
  parts.total = bce_value_grad(y, t, cfg);
  parts.bce_value = parts.total.value;
  if (kind == ObjectiveKind::Baseline || cfg.lambda == 0.0) return parts;

  LossGrad r;
  switch (kind) {
    case ObjectiveKind::GbsO1:
      r = gbs_value_grad(y, t, cfg);
      break;
    case ObjectiveKind::GlrdnO2:
      r = glrdn_value_grad(y, t, cfg);
      break;
    case ObjectiveKind::EcO3:
      r = ec_regularizer(y);
      break;
    case ObjectiveKind::Baseline:
      return parts;
  }
  parts.reg_value = r.value;
  parts.total.value += cfg.lambda * r.value;
  for (std::size_t i = 0; i < parts.total.grad.size(); ++i)
    parts.total.grad[i] += cfg.lambda * r.grad[i];
  return parts;
}

int count_components_8(const Image& b) {
  require_nonempty(b, "count_components_8");
  require_binary(b, "count_components_8");
  const int rows = b.rows, cols = b.cols;
  std::vector<std::uint8_t> seen(b.size(), 0);
  std::vector<int> stack;
  int components = 0;
  for (int start = 0; start < static_cast<int>(b.size()); ++start) {
    if (b.v[start] == 0.0 || seen[start]) continue;
    components++;
    seen[start] = 1;
    stack.assign(1, start);
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      const int r = cur / cols, c = cur % cols;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          const int n = rr * cols + cc;
          if (b.v[n] != 0.0 && !seen[n]) {
            seen[n] = 1;
            stack.push_back(n);
          }
        }
    }
  }
  return components;
}

const char* objective_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::Baseline:
      return "baseline";
    case ObjectiveKind::GbsO1:
      return "o1";
    case ObjectiveKind::GlrdnO2:
      return "o2";
    case ObjectiveKind::EcO3:
      return "o3";
  }
  return "baseline";
}

bool parse_objective(std::string_view name, ObjectiveKind& out) {
  if (name == "baseline") out = ObjectiveKind::Baseline;
  else if (name == "o1") out = ObjectiveKind::GbsO1;
  else if (name == "o2") out = ObjectiveKind::GlrdnO2;
  else if (name == "o3") out = ObjectiveKind::EcO3;
  else return false;
  return true;
}

}  // namespace pixelreg::reg
