#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pixelreg {

// Row-major grayscale raster, values nominally in [0, 1].
struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Image() = default;
  Image(int r, int c, double fill = 0.0)
      : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  std::size_t size() const { return v.size(); }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
  bool same_shape(const Image& o) const { return rows == o.rows && cols == o.cols; }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + std::to_string(a.rows) +
                                "x" + std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                "x" + std::to_string(b.cols));
}

}  // namespace pixelreg
