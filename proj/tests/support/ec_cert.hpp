#pragma once

// Generator of random rectangle-union binary images whose topology is
// certified by independent flood fills:
//   - the background is one 4-connected region touching the border
//     (no enclosed holes),
//   - no 2x2 block holds exactly its two diagonal pixels
//     (corner-only contacts would make the two triangulations disagree
//     with plain 8-connectivity).

#include <vector>

#include "pixelreg/image.hpp"
#include "pixelreg/rng.hpp"

namespace testsupport {

inline bool background_is_one_border_region(const pixelreg::Image& b) {
  const int rows = b.rows, cols = b.cols;
  std::vector<std::uint8_t> seen(b.size(), 0);
  std::vector<int> stack;
  bool started = false;
  for (int r = 0; r < rows && !started; ++r)
    for (int c = 0; c < cols && !started; ++c) {
      if (r != 0 && r != rows - 1 && c != 0 && c != cols - 1) continue;
      if (b.at(r, c) == 0.0) {
        stack.push_back(r * cols + c);
        seen[r * cols + c] = 1;
        started = true;
      }
    }
  if (!started) return false;
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    const int r = cur / cols, c = cur % cols;
    const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int rr = r + dr[k], cc = c + dc[k];
      if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
      const int n = rr * cols + cc;
      if (b.v[n] == 0.0 && !seen[n]) {
        seen[n] = 1;
        stack.push_back(n);
      }
    }
  }
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b.v[i] == 0.0 && !seen[i]) return false;
  return true;
}

inline bool has_checkerboard_block(const pixelreg::Image& b) {
  for (int r = 0; r + 1 < b.rows; ++r)
    for (int c = 0; c + 1 < b.cols; ++c) {
      const bool a = b.at(r, c) != 0.0, q = b.at(r, c + 1) != 0.0;
      const bool p = b.at(r + 1, c) != 0.0, d = b.at(r + 1, c + 1) != 0.0;
      if (a == d && q == p && a != q) return true;
    }
  return false;
}

// Draws until certification passes, so every returned image satisfies both
// flood-fill conditions above.
inline pixelreg::Image certified_rectangle_union(pixelreg::Rng& rng, int rows = 12,
                                                 int cols = 12) {
  for (;;) {
    pixelreg::Image img(rows, cols, 0.0);
    const int k = static_cast<int>(rng.uniform_int(1, 4));
    for (int i = 0; i < k; ++i) {
      const int r0 = static_cast<int>(rng.uniform_int(0, rows - 1));
      const int c0 = static_cast<int>(rng.uniform_int(0, cols - 1));
      const int h = static_cast<int>(rng.uniform_int(1, 5));
      const int w = static_cast<int>(rng.uniform_int(1, 5));
      for (int r = r0; r < std::min(rows, r0 + h); ++r)
        for (int c = c0; c < std::min(cols, c0 + w); ++c) img.at(r, c) = 1.0;
    }
    if (background_is_one_border_region(img) && !has_checkerboard_block(img)) return img;
  }
}

}  // namespace testsupport
