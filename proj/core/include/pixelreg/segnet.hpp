#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pixelreg/regularizers.hpp"

namespace pixelreg::net {

// Encoder-decoder with conv3x3(same)+ReLU pairs, 2x2 max-pool, nearest 2x
// upsampling, channel concatenation [upsampled, skip], and a 1x1 sigmoid head.
// Channel width doubles per level from base_channels.
struct NetworkSpec {
  int depth = 2;
  int base_channels = 8;
  int in_channels = 1;
  int divisor() const { return 1 << depth; }
  bool valid() const { return depth >= 1 && base_channels >= 1 && in_channels >= 1; }
};

struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  double* sample(int ni) { return v.data() + sample_size() * ni; }
  const double* sample(int ni) const { return v.data() + sample_size() * ni; }
};

struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int c_, int h_, int w_)
      : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}

  std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
  double* plane(int ci) { return v.data() + plane_size() * ci; }
  const double* plane(int ci) const { return v.data() + plane_size() * ci; }
};

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
  std::size_t numel() const { return data.size(); }
};

// Tensor order is the network's execution order; stable across runs and
// serialized as-is.
struct ParamSet {
  std::vector<NamedTensor> tensors;
  std::size_t total_parameters() const;
};

// Per-sample activations kept for the reverse pass.
struct SampleCache {
  std::vector<Tensor3> enc_a1, enc_a2, enc_pool;
  std::vector<std::vector<std::int32_t>> pool_argmax;  // per level, index into the input plane
  Tensor3 bott1, bott2;
  std::vector<Tensor3> dec_cc, dec_d1, dec_d2;  // indexed by decoder level
};

struct ForwardCache {
  NetworkSpec spec;
  Tensor4 input;
  Tensor4 output;
  std::vector<SampleCache> samples;
};

struct Forward {
  Tensor4 y;  // N x 1 x H x W probabilities
  ForwardCache cache;
};

// Parameter gradients aligned index-for-index with ParamSet::tensors.
struct GradSet {
  std::vector<std::vector<double>> g;
};

ParamSet init_params(const NetworkSpec& spec, std::uint64_t seed);
GradSet zero_grads(const ParamSet& params);

Forward forward(const ParamSet& params, const NetworkSpec& spec, const Tensor4& batch,
                int threads = 1);

// Forward without retained activations (evaluation on large images).
Tensor4 predict(const ParamSet& params, const NetworkSpec& spec, const Tensor4& batch,
                int threads = 1);

// Per-sample gradients are accumulated over the batch in sample order.
GradSet backward(const ParamSet& params, const NetworkSpec& spec, const ForwardCache& cache,
                 const Tensor4& grad_out, int threads = 1);

// Central finite differences over every parameter for the given objective on
// a random 8x8 patch; returns the max relative error (infinity norms).
double gradient_check(const NetworkSpec& spec, std::uint64_t seed, reg::ObjectiveKind kind,
                      const reg::RegularizerConfig& cfg);

struct Checkpoint {
  NetworkSpec spec;
  ParamSet params;
};

// Versioned binary format: magic, spec fields, then named tensors with
// explicit shapes as little-endian f32. Round-trips byte-exactly.
void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec,
                     const ParamSet& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pixelreg::net
