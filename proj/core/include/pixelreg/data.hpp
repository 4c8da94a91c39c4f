#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pixelreg/grid_graph.hpp"
#include "pixelreg/image.hpp"

namespace pixelreg::data {

struct ImageSample {
  Image image;
  Image mask;                // binary after load
  std::optional<Image> fov;  // binary when present
};

struct PatchSpec {
  int size = 48;
  int count = 4750;
  std::uint64_t seed = 0;
};

struct PatchPair {
  Image image;
  Image mask;
};

// `count` square patches with top-left corners drawn uniformly from the
// positions whose patch center lies inside the fov (all positions when no
// fov). Deterministic per seed; patches are copies.
std::vector<PatchPair> sample_patches(const ImageSample& sample, const PatchSpec& spec);

// Random vessel-like mask plus a rendered grayscale image (blurred mask over
// a background gradient with Gaussian noise). Deterministic per seed.
// Requires shape of at least 64x64; foreground fraction lands in [2%, 25%].
ImageSample synth_vessels(std::uint64_t seed, graph::GridShape shape);

// Plain-text stem lists under "train:" / "test:" headers.
struct Manifest {
  std::vector<std::string> train, test;
};

Manifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const Manifest& manifest);

// Layout: root/manifest.txt, root/images/<stem>.(pgm|png),
// root/masks/<stem>.(pgm|png), optional root/fov/<stem>.(pgm|png).
// Masks and fovs binarize at 0.5 on load.
struct Dataset {
  std::vector<ImageSample> train, test;
};

Dataset load_dataset(const std::filesystem::path& root);

// Writes `count` synthetic image/mask PGM pairs plus the manifest; roughly a
// 3:1 train/test split. Returns the stems in generation order.
std::vector<std::string> write_synthetic_dataset(const std::filesystem::path& root, int count,
                                                 std::uint64_t seed, graph::GridShape shape);

// In-memory equivalent of the synthetic dataset with the same split rule and
// per-image seed derivation (modulo 8-bit file quantization).
Dataset make_synthetic_dataset(int count, std::uint64_t seed, graph::GridShape shape);

}  // namespace pixelreg::data
