#include "pixelreg/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "pixelreg/errors.hpp"
#include "pixelreg/image_io.hpp"
#include "pixelreg/rng.hpp"

namespace pixelreg::data {

namespace {

void binarize(Image& img) {
  for (auto& v : img.v) v = v >= 0.5 ? 1.0 : 0.0;
}

Image box_blur3(const Image& src) {
  Image out(src.rows, src.cols);
  for (int r = 0; r < src.rows; ++r)
    for (int c = 0; c < src.cols; ++c) {
      double acc = 0.0;
      int n = 0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= src.rows || cc < 0 || cc >= src.cols) continue;
          acc += src.at(rr, cc);
          n++;
        }
      out.at(r, c) = acc / n;
    }
  return out;
}

std::filesystem::path find_stem(const std::filesystem::path& dir, const std::string& stem) {
  for (const char* ext : {".pgm", ".png"}) {
    auto p = dir / (stem + ext);
    if (std::filesystem::exists(p)) return p;
  }
  throw DataError("no image for stem '" + stem + "' in " + dir.string());
}

ImageSample load_sample(const std::filesystem::path& root, const std::string& stem) {
  ImageSample s;
  s.image = load_grayscale(find_stem(root / "images", stem));
  s.mask = load_grayscale(find_stem(root / "masks", stem));
  binarize(s.mask);
  if (!s.image.same_shape(s.mask))
    throw DataError("image/mask shape mismatch for stem '" + stem + "'");
  const auto fov_dir = root / "fov";
  if (std::filesystem::is_directory(fov_dir)) {
    for (const char* ext : {".pgm", ".png"}) {
      auto p = fov_dir / (stem + ext);
      if (!std::filesystem::exists(p)) continue;
      s.fov = load_grayscale(p);
      binarize(*s.fov);
      if (!s.image.same_shape(*s.fov))
        throw DataError("image/fov shape mismatch for stem '" + stem + "'");
      break;
    }
  }
  return s;
}

}  // namespace

std::vector<PatchPair> sample_patches(const ImageSample& sample, const PatchSpec& spec) {
  const int rows = sample.image.rows, cols = sample.image.cols, size = spec.size;
  if (size < 1 || spec.count < 0) throw std::invalid_argument("sample_patches: bad spec");
  if (size > rows || size > cols)
    throw std::invalid_argument("sample_patches: patch size exceeds image");
  require_same_shape(sample.image, sample.mask, "sample_patches");

  std::vector<std::pair<int, int>> corners;
  for (int r0 = 0; r0 + size <= rows; ++r0)
    for (int c0 = 0; c0 + size <= cols; ++c0) {
      if (sample.fov && sample.fov->at(r0 + size / 2, c0 + size / 2) == 0.0) continue;
      corners.emplace_back(r0, c0);
    }
  if (corners.empty()) throw DataError("sample_patches: fov excludes all patch centers");

  Rng rng(spec.seed);
  std::vector<PatchPair> out;
  out.reserve(spec.count);
  for (int k = 0; k < spec.count; ++k) {
    auto [r0, c0] = corners[rng.uniform_int(0, static_cast<std::int64_t>(corners.size()) - 1)];
    PatchPair p{Image(size, size), Image(size, size)};
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        p.image.at(r, c) = sample.image.at(r0 + r, c0 + c);
        p.mask.at(r, c) = sample.mask.at(r0 + r, c0 + c);
      }
    out.push_back(std::move(p));
  }
  return out;
}

ImageSample synth_vessels(std::uint64_t seed, graph::GridShape shape) {
  if (shape.rows < 64 || shape.cols < 64)
    throw std::invalid_argument("synth_vessels: shape must be at least 64x64");
  const int rows = shape.rows, cols = shape.cols;
  const double n_pixels = static_cast<double>(rows) * cols;
  Rng rng(mix_seed(seed, 0x7665737373ULL));

  Image mask(rows, cols, 0.0);
  long long fg = 0;
  auto stamp = [&](int r, int c, int width) {
    auto put = [&](int rr, int cc) {
      if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) return;
      if (mask.at(rr, cc) == 0.0) {
        mask.at(rr, cc) = 1.0;
        fg++;
      }
    };
    put(r, c);
    if (width == 2) {
      put(r + 1, c);
      put(r, c + 1);
      put(r + 1, c + 1);
    } else if (width == 3) {
      put(r - 1, c);
      put(r + 1, c);
      put(r, c - 1);
      put(r, c + 1);
    }
  };

  struct WalkEnd {
    double r, c, theta;
  };
  // Momentum random walk with wall bounces; stamps every step.
  auto walk = [&](double r, double c, double theta, int steps, int width) -> WalkEnd {
    for (int s = 0; s < steps; ++s) {
      stamp(static_cast<int>(std::llround(r)), static_cast<int>(std::llround(c)), width);
      theta += rng.uniform(-0.35, 0.35);
      double nr = r + std::sin(theta);
      double nc = c + std::cos(theta);
      if (nr < 1.0 || nr > rows - 2.0) {
        theta = -theta;
        nr = r + std::sin(theta);
      }
      if (nc < 1.0 || nc > cols - 2.0) {
        theta = std::numbers::pi - theta;
        nc = c + std::cos(theta);
      }
      r = std::clamp(nr, 0.0, rows - 1.0);
      c = std::clamp(nc, 0.0, cols - 1.0);
    }
    return {r, c, theta};
  };

  const int len = static_cast<int>(std::llround(1.2 * std::max(rows, cols)));
  const double lo = 0.025 * n_pixels, hi = 0.15 * n_pixels;
  const int planned = static_cast<int>(rng.uniform_int(2, 6));
  for (int v = 0; v < planned; ++v) {
    if (v >= 2 && fg >= hi) break;
    const double r0 = rng.uniform(2.0, rows - 3.0);
    const double c0 = rng.uniform(2.0, cols - 3.0);
    const double th0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int width = 1 + static_cast<int>(rng.uniform_int(0, 2));

    const auto mid = walk(r0, c0, th0, len / 2, width);
    walk(mid.r, mid.c, mid.theta, len - len / 2, width);
    if (rng.uniform() < 0.5 && fg < 0.8 * hi) {
      const double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
      walk(mid.r, mid.c, mid.theta + side * rng.uniform(0.6, 1.1), len / 2,
           std::max(1, width - 1));
    }
  }
  // Top up sparse draws by branching off existing vessel pixels.
  for (int guard = 0; fg < lo && guard < 64; ++guard) {
    std::vector<int> on;
    on.reserve(static_cast<std::size_t>(fg));
    for (int i = 0; i < static_cast<int>(mask.size()); ++i)
      if (mask.v[i] != 0.0) on.push_back(i);
    const int at = on[rng.uniform_int(0, static_cast<std::int64_t>(on.size()) - 1)];
    walk(at / cols, at % cols, rng.uniform(0.0, 2.0 * std::numbers::pi), len / 2, 2);
  }

  ImageSample out;
  out.mask = mask;
  out.image = Image(rows, cols);
  const double base = rng.uniform(0.15, 0.35);
  const double grad_r = rng.uniform(-0.2, 0.2);
  const double grad_c = rng.uniform(-0.2, 0.2);
  const Image vessel_signal = box_blur3(box_blur3(mask));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double v = base + grad_r * r / (rows - 1) + grad_c * c / (cols - 1);
      v += vessel_signal.at(r, c);
      v += rng.normal(0.0, 0.05);
      out.image.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  return out;
}

Manifest read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open manifest " + file.string());
  Manifest m;
  std::vector<std::string>* section = nullptr;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (line == "train:") {
      section = &m.train;
    } else if (line == "test:") {
      section = &m.test;
    } else {
      if (!section) throw DataError("manifest " + file.string() + ": stem before section header");
      section->push_back(line);
    }
  }
  return m;
}

void write_manifest(const std::filesystem::path& file, const Manifest& manifest) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + file.string());
  out << "train:\n";
  for (const auto& s : manifest.train) out << s << "\n";
  out << "test:\n";
  for (const auto& s : manifest.test) out << s << "\n";
  if (!out) throw DataError("manifest write failed for " + file.string());
}

Dataset load_dataset(const std::filesystem::path& root) {
  const auto manifest = read_manifest(root / "manifest.txt");
  Dataset ds;
  for (const auto& stem : manifest.train) ds.train.push_back(load_sample(root, stem));
  for (const auto& stem : manifest.test) ds.test.push_back(load_sample(root, stem));
  return ds;
}

namespace {

int synthetic_test_count(int count) { return count >= 2 ? std::max(1, count / 4) : 0; }

std::string synthetic_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%03d", index);
  return buf;
}

}  // namespace

std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root, int count,
                                                 std::uint64_t seed, graph::GridShape shape) {
  if (count < 1) throw std::invalid_argument("write_synthetic_dataset: count must be positive");
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "masks");

  Manifest manifest;
  std::vector<std::string> stems;
  const int n_test = synthetic_test_count(count);
  for (int i = 0; i < count; ++i) {
    const auto sample = synth_vessels(mix_seed(seed, static_cast<std::uint64_t>(i)), shape);
    const auto stem = synthetic_stem(i);
    save_pgm(root / "images" / (stem + ".pgm"), sample.image);
    save_pgm(root / "masks" / (stem + ".pgm"), sample.mask);
    (i < count - n_test ? manifest.train : manifest.test).push_back(stem);
    stems.push_back(stem);
  }
  write_manifest(root / "manifest.txt", manifest);
  return stems;
}

Dataset make_synthetic_dataset(int count, std::uint64_t seed, graph::GridShape shape) {
  if (count < 1) throw std::invalid_argument("make_synthetic_dataset: count must be positive");
  Dataset ds;
  const int n_test = synthetic_test_count(count);
  for (int i = 0; i < count; ++i) {
    auto sample = synth_vessels(mix_seed(seed, static_cast<std::uint64_t>(i)), shape);
    (i < count - n_test ? ds.train : ds.test).push_back(std::move(sample));
  }
  return ds;
}

}  // namespace pixelreg::data
