#include "pixelreg/segnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gemm.hpp"
#include "parallel.hpp"
#include "pixelreg/errors.hpp"
#include "pixelreg/rng.hpp"

namespace pixelreg::net {

namespace {

struct ConvDesc {
  std::string prefix;
  int cin, cout, k;
};

// Execution order: encoder levels, bottleneck, decoder levels deep-to-shallow,
// head. Parameter tensors follow this order as (weight, bias) pairs.
std::vector<ConvDesc> layer_list(const NetworkSpec& spec) {
  std::vector<ConvDesc> layers;
  int prev = spec.in_channels;
  for (int l = 0; l < spec.depth; ++l) {
    const int ch = spec.base_channels << l;
    layers.push_back({"enc" + std::to_string(l) + ".conv1", prev, ch, 3});
    layers.push_back({"enc" + std::to_string(l) + ".conv2", ch, ch, 3});
    prev = ch;
  }
  const int bott = spec.base_channels << spec.depth;
  layers.push_back({"bottleneck.conv1", prev, bott, 3});
  layers.push_back({"bottleneck.conv2", bott, bott, 3});
  prev = bott;
  for (int l = spec.depth - 1; l >= 0; --l) {
    const int ch = spec.base_channels << l;
    layers.push_back({"dec" + std::to_string(l) + ".conv1", prev + ch, ch, 3});
    layers.push_back({"dec" + std::to_string(l) + ".conv2", ch, ch, 3});
    prev = ch;
  }
  layers.push_back({"head", prev, 1, 1});
  return layers;
}

// Conv index within layer_list.
int enc_conv(int level, int which) { return 2 * level + which; }
int bott_conv(const NetworkSpec& spec, int which) { return 2 * spec.depth + which; }
int dec_conv(const NetworkSpec& spec, int level, int which) {
  return 2 * spec.depth + 2 + 2 * (spec.depth - 1 - level) + which;
}
int head_conv(const NetworkSpec& spec) { return 4 * spec.depth + 2; }

void require_valid_spec(const NetworkSpec& spec) {
  if (!spec.valid()) throw std::invalid_argument("segnet: invalid NetworkSpec");
}

void require_batch(const NetworkSpec& spec, const Tensor4& batch) {
  if (batch.n < 1 || batch.c != spec.in_channels)
    throw std::invalid_argument("segnet: batch channel count mismatch");
  const int d = spec.divisor();
  if (batch.h < d || batch.w < d || batch.h % d != 0 || batch.w % d != 0)
    throw std::invalid_argument("segnet: spatial dims must be positive multiples of " +
                                std::to_string(d));
}

// Grow-only per-thread buffers for the im2col paths.
struct Scratch {
  std::vector<double> cols, dcols;
};
thread_local Scratch g_scratch;

void im2col3(const double* in, int cin, int h, int w, double* cols) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < cin; ++ci) {
    const double* src = in + ci * plane;
    for (int dy = 0; dy < 3; ++dy)
      for (int dx = 0; dx < 3; ++dx) {
        double* dst = cols + (static_cast<std::size_t>(ci) * 9 + dy * 3 + dx) * plane;
        for (int r = 0; r < h; ++r) {
          double* drow = dst + static_cast<std::size_t>(r) * w;
          const int rr = r + dy - 1;
          if (rr < 0 || rr >= h) {
            std::fill(drow, drow + w, 0.0);
            continue;
          }
          const double* srow = src + static_cast<std::size_t>(rr) * w;
          if (dx == 1) {
            std::memcpy(drow, srow, sizeof(double) * w);
          } else if (dx == 0) {  // source column c-1
            drow[0] = 0.0;
            std::memcpy(drow + 1, srow, sizeof(double) * (w - 1));
          } else {  // source column c+1
            std::memcpy(drow, srow + 1, sizeof(double) * (w - 1));
            drow[w - 1] = 0.0;
          }
        }
      }
  }
}

void col2im3(const double* cols, int cin, int h, int w, double* din) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::fill(din, din + static_cast<std::size_t>(cin) * plane, 0.0);
  for (int ci = 0; ci < cin; ++ci) {
    double* dst = din + ci * plane;
    for (int dy = 0; dy < 3; ++dy)
      for (int dx = 0; dx < 3; ++dx) {
        const double* src = cols + (static_cast<std::size_t>(ci) * 9 + dy * 3 + dx) * plane;
        for (int r = 0; r < h; ++r) {
          const int rr = r + dy - 1;
          if (rr < 0 || rr >= h) continue;
          double* drow = dst + static_cast<std::size_t>(rr) * w;
          const double* srow = src + static_cast<std::size_t>(r) * w;
          if (dx == 1) {
            for (int c = 0; c < w; ++c) drow[c] += srow[c];
          } else if (dx == 0) {
            for (int c = 1; c < w; ++c) drow[c - 1] += srow[c];
          } else {
            for (int c = 0; c + 1 < w; ++c) drow[c + 1] += srow[c];
          }
        }
      }
  }
}

void conv_forward(const NamedTensor& wt, const NamedTensor& bt, const Tensor3& in, Tensor3& out,
                  bool relu) {
  const int cin = in.c, h = in.h, w = in.w;
  const int cout = wt.shape[0];
  const int k = wt.shape[2];
  const int plane = h * w;
  out = Tensor3(cout, h, w);
  if (k == 3) {
    auto& cols = g_scratch.cols;
    cols.resize(static_cast<std::size_t>(cin) * 9 * plane);
    im2col3(in.v.data(), cin, h, w, cols.data());
    gemm(false, false, cout, plane, cin * 9, 1.0, wt.data.data(), cin * 9, cols.data(), plane,
         0.0, out.v.data(), plane);
  } else {
    gemm(false, false, cout, plane, cin, 1.0, wt.data.data(), cin, in.v.data(), plane, 0.0,
         out.v.data(), plane);
  }
  for (int co = 0; co < cout; ++co) {
    double* p = out.plane(co);
    const double bias = bt.data[co];
    if (relu)
      for (int i = 0; i < plane; ++i) p[i] = std::max(0.0, p[i] + bias);
    else
      for (int i = 0; i < plane; ++i) p[i] += bias;
  }
}

// Applies the ReLU mask to dout in place, accumulates dw/db, and (when din is
// non-null) propagates the input gradient.
void conv_backward(const NamedTensor& wt, const Tensor3& in, const Tensor3& out_post, bool relu,
                   Tensor3& dout, Tensor3* din, std::vector<double>& dw, std::vector<double>& db) {
  const int cin = in.c, h = in.h, w = in.w;
  const int cout = wt.shape[0];
  const int k = wt.shape[2];
  const int plane = h * w;

  if (relu)
    for (std::size_t i = 0; i < dout.v.size(); ++i)
      if (out_post.v[i] <= 0.0) dout.v[i] = 0.0;

  for (int co = 0; co < cout; ++co) {
    const double* p = dout.plane(co);
    double acc = 0.0;
    for (int i = 0; i < plane; ++i) acc += p[i];
    db[co] += acc;
  }

  if (k == 3) {
    auto& cols = g_scratch.cols;
    cols.resize(static_cast<std::size_t>(cin) * 9 * plane);
    im2col3(in.v.data(), cin, h, w, cols.data());
    gemm(false, true, cout, cin * 9, plane, 1.0, dout.v.data(), plane, cols.data(), plane, 1.0,
         dw.data(), cin * 9);
    if (din) {
      auto& dcols = g_scratch.dcols;
      dcols.resize(static_cast<std::size_t>(cin) * 9 * plane);
      gemm(true, false, cin * 9, plane, cout, 1.0, wt.data.data(), cin * 9, dout.v.data(), plane,
           0.0, dcols.data(), plane);
      *din = Tensor3(cin, h, w);
      col2im3(dcols.data(), cin, h, w, din->v.data());
    }
  } else {
    gemm(false, true, cout, cin, plane, 1.0, dout.v.data(), plane, in.v.data(), plane, 1.0,
         dw.data(), cin);
    if (din) {
      *din = Tensor3(cin, h, w);
      gemm(true, false, cin, plane, cout, 1.0, wt.data.data(), cin, dout.v.data(), plane, 0.0,
           din->v.data(), plane);
    }
  }
}

void maxpool2(const Tensor3& in, Tensor3& out, std::vector<std::int32_t>& argmax) {
  out = Tensor3(in.c, in.h / 2, in.w / 2);
  argmax.resize(out.v.size());
  const int oh = out.h, ow = out.w, w = in.w;
  std::size_t oi = 0;
  for (int ci = 0; ci < in.c; ++ci) {
    const double* src = in.plane(ci);
    for (int r = 0; r < oh; ++r)
      for (int q = 0; q < ow; ++q, ++oi) {
        // Window scan order (top-left first) with strict > keeps the first
        // maximal index on ties.
        const int cand[4] = {(2 * r) * w + 2 * q, (2 * r) * w + 2 * q + 1,
                             (2 * r + 1) * w + 2 * q, (2 * r + 1) * w + 2 * q + 1};
        int best = cand[0];
        for (int j = 1; j < 4; ++j)
          if (src[cand[j]] > src[best]) best = cand[j];
        out.v[oi] = src[best];
        argmax[oi] = best;
      }
  }
}

void maxpool2_backward(const std::vector<std::int32_t>& argmax, const Tensor3& dout,
                       Tensor3& din) {
  const std::size_t oplane = dout.plane_size();
  for (int ci = 0; ci < dout.c; ++ci) {
    double* dst = din.plane(ci);
    const double* src = dout.plane(ci);
    const std::int32_t* amax = argmax.data() + oplane * ci;
    for (std::size_t i = 0; i < oplane; ++i) dst[amax[i]] += src[i];
  }
}

void upsample2(const Tensor3& in, Tensor3& out) {
  out = Tensor3(in.c, in.h * 2, in.w * 2);
  for (int ci = 0; ci < in.c; ++ci) {
    const double* src = in.plane(ci);
    double* dst = out.plane(ci);
    for (int r = 0; r < out.h; ++r) {
      const double* srow = src + static_cast<std::size_t>(r / 2) * in.w;
      double* drow = dst + static_cast<std::size_t>(r) * out.w;
      for (int q = 0; q < out.w; ++q) drow[q] = srow[q / 2];
    }
  }
}

void upsample2_backward(const Tensor3& dout, Tensor3& din) {
  din = Tensor3(dout.c, dout.h / 2, dout.w / 2);
  for (int ci = 0; ci < dout.c; ++ci) {
    const double* src = dout.plane(ci);
    double* dst = din.plane(ci);
    for (int r = 0; r < dout.h; ++r) {
      double* drow = dst + static_cast<std::size_t>(r / 2) * din.w;
      const double* srow = src + static_cast<std::size_t>(r) * dout.w;
      for (int q = 0; q < dout.w; ++q) drow[q / 2] += srow[q];
    }
  }
}

void concat(const Tensor3& up, const Tensor3& skip, Tensor3& out) {
  out = Tensor3(up.c + skip.c, up.h, up.w);
  std::memcpy(out.v.data(), up.v.data(), sizeof(double) * up.v.size());
  std::memcpy(out.v.data() + up.v.size(), skip.v.data(), sizeof(double) * skip.v.size());
}

const NamedTensor& weight_of(const ParamSet& p, int conv) { return p.tensors[2 * conv]; }
const NamedTensor& bias_of(const ParamSet& p, int conv) { return p.tensors[2 * conv + 1]; }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void forward_sample(const ParamSet& params, const NetworkSpec& spec, const double* x, int h,
                    int w, SampleCache& sc, double* y_out) {
  const int depth = spec.depth;
  sc.enc_a1.resize(depth);
  sc.enc_a2.resize(depth);
  sc.enc_pool.resize(depth);
  sc.pool_argmax.resize(depth);
  sc.dec_cc.resize(depth);
  sc.dec_d1.resize(depth);
  sc.dec_d2.resize(depth);

  Tensor3 input(spec.in_channels, h, w);
  std::memcpy(input.v.data(), x, sizeof(double) * input.v.size());

  const Tensor3* cur = &input;
  for (int l = 0; l < depth; ++l) {
    conv_forward(weight_of(params, enc_conv(l, 0)), bias_of(params, enc_conv(l, 0)), *cur,
                 sc.enc_a1[l], true);
    conv_forward(weight_of(params, enc_conv(l, 1)), bias_of(params, enc_conv(l, 1)), sc.enc_a1[l],
                 sc.enc_a2[l], true);
    maxpool2(sc.enc_a2[l], sc.enc_pool[l], sc.pool_argmax[l]);
    cur = &sc.enc_pool[l];
  }
  conv_forward(weight_of(params, bott_conv(spec, 0)), bias_of(params, bott_conv(spec, 0)), *cur,
               sc.bott1, true);
  conv_forward(weight_of(params, bott_conv(spec, 1)), bias_of(params, bott_conv(spec, 1)),
               sc.bott1, sc.bott2, true);
  cur = &sc.bott2;
  for (int l = depth - 1; l >= 0; --l) {
    Tensor3 up;
    upsample2(*cur, up);
    concat(up, sc.enc_a2[l], sc.dec_cc[l]);
    conv_forward(weight_of(params, dec_conv(spec, l, 0)), bias_of(params, dec_conv(spec, l, 0)),
                 sc.dec_cc[l], sc.dec_d1[l], true);
    conv_forward(weight_of(params, dec_conv(spec, l, 1)), bias_of(params, dec_conv(spec, l, 1)),
                 sc.dec_d1[l], sc.dec_d2[l], true);
    cur = &sc.dec_d2[l];
  }
  Tensor3 logits;
  conv_forward(weight_of(params, head_conv(spec)), bias_of(params, head_conv(spec)), *cur, logits,
               false);
  for (std::size_t i = 0; i < logits.v.size(); ++i) y_out[i] = sigmoid(logits.v[i]);
}

// Same pass without retaining decoder inputs; keeps only the skip tensors.
void predict_sample(const ParamSet& params, const NetworkSpec& spec, const double* x, int h,
                    int w, double* y_out) {
  const int depth = spec.depth;
  std::vector<Tensor3> skips(depth);
  Tensor3 cur(spec.in_channels, h, w);
  std::memcpy(cur.v.data(), x, sizeof(double) * cur.v.size());

  Tensor3 tmp;
  std::vector<std::int32_t> argmax;
  for (int l = 0; l < depth; ++l) {
    conv_forward(weight_of(params, enc_conv(l, 0)), bias_of(params, enc_conv(l, 0)), cur, tmp,
                 true);
    conv_forward(weight_of(params, enc_conv(l, 1)), bias_of(params, enc_conv(l, 1)), tmp,
                 skips[l], true);
    maxpool2(skips[l], cur, argmax);
  }
  conv_forward(weight_of(params, bott_conv(spec, 0)), bias_of(params, bott_conv(spec, 0)), cur,
               tmp, true);
  conv_forward(weight_of(params, bott_conv(spec, 1)), bias_of(params, bott_conv(spec, 1)), tmp,
               cur, true);
  for (int l = depth - 1; l >= 0; --l) {
    Tensor3 up;
    upsample2(cur, up);
    Tensor3 cc;
    concat(up, skips[l], cc);
    skips[l] = Tensor3();
    conv_forward(weight_of(params, dec_conv(spec, l, 0)), bias_of(params, dec_conv(spec, l, 0)),
                 cc, tmp, true);
    conv_forward(weight_of(params, dec_conv(spec, l, 1)), bias_of(params, dec_conv(spec, l, 1)),
                 tmp, cur, true);
  }
  conv_forward(weight_of(params, head_conv(spec)), bias_of(params, head_conv(spec)), cur, tmp,
               false);
  for (std::size_t i = 0; i < tmp.v.size(); ++i) y_out[i] = sigmoid(tmp.v[i]);
}

void backward_sample(const ParamSet& params, const NetworkSpec& spec, const SampleCache& sc,
                     const double* x, const double* y, const double* dy, int h, int w,
                     GradSet& gs) {
  const int depth = spec.depth;
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  auto dw = [&](int conv) -> std::vector<double>& { return gs.g[2 * conv]; };
  auto db = [&](int conv) -> std::vector<double>& { return gs.g[2 * conv + 1]; };

  Tensor3 dlogits(1, h, w);
  for (std::size_t i = 0; i < plane; ++i) dlogits.v[i] = dy[i] * y[i] * (1.0 - y[i]);

  Tensor3 d_cur;
  conv_backward(weight_of(params, head_conv(spec)), sc.dec_d2[0], sc.dec_d2[0], false, dlogits,
                &d_cur, dw(head_conv(spec)), db(head_conv(spec)));

  std::vector<Tensor3> dskip(depth);
  for (int l = 0; l < depth; ++l) {
    Tensor3 dd1;
    conv_backward(weight_of(params, dec_conv(spec, l, 1)), sc.dec_d1[l], sc.dec_d2[l], true,
                  d_cur, &dd1, dw(dec_conv(spec, l, 1)), db(dec_conv(spec, l, 1)));
    Tensor3 dcc;
    conv_backward(weight_of(params, dec_conv(spec, l, 0)), sc.dec_cc[l], sc.dec_d1[l], true, dd1,
                  &dcc, dw(dec_conv(spec, l, 0)), db(dec_conv(spec, l, 0)));

    const int c_skip = spec.base_channels << l;
    const int c_up = dcc.c - c_skip;
    Tensor3 dup(c_up, dcc.h, dcc.w);
    std::memcpy(dup.v.data(), dcc.v.data(), sizeof(double) * dup.v.size());
    dskip[l] = Tensor3(c_skip, dcc.h, dcc.w);
    std::memcpy(dskip[l].v.data(), dcc.v.data() + dup.v.size(),
                sizeof(double) * dskip[l].v.size());
    upsample2_backward(dup, d_cur);
  }

  Tensor3 db1;
  conv_backward(weight_of(params, bott_conv(spec, 1)), sc.bott1, sc.bott2, true, d_cur, &db1,
                dw(bott_conv(spec, 1)), db(bott_conv(spec, 1)));
  Tensor3 d_pool;
  conv_backward(weight_of(params, bott_conv(spec, 0)), sc.enc_pool[depth - 1], sc.bott1, true,
                db1, &d_pool, dw(bott_conv(spec, 0)), db(bott_conv(spec, 0)));

  for (int l = depth - 1; l >= 0; --l) {
    Tensor3 da2(sc.enc_a2[l].c, sc.enc_a2[l].h, sc.enc_a2[l].w);
    maxpool2_backward(sc.pool_argmax[l], d_pool, da2);
    for (std::size_t i = 0; i < da2.v.size(); ++i) da2.v[i] += dskip[l].v[i];

    Tensor3 da1;
    conv_backward(weight_of(params, enc_conv(l, 1)), sc.enc_a1[l], sc.enc_a2[l], true, da2, &da1,
                  dw(enc_conv(l, 1)), db(enc_conv(l, 1)));
    if (l > 0) {
      conv_backward(weight_of(params, enc_conv(l, 0)), sc.enc_pool[l - 1], sc.enc_a1[l], true,
                    da1, &d_pool, dw(enc_conv(l, 0)), db(enc_conv(l, 0)));
    } else {
      Tensor3 input(spec.in_channels, h, w);
      std::memcpy(input.v.data(), x, sizeof(double) * input.v.size());
      conv_backward(weight_of(params, enc_conv(l, 0)), input, sc.enc_a1[l], true, da1, nullptr,
                    dw(enc_conv(l, 0)), db(enc_conv(l, 0)));
    }
  }
}

}  // namespace

std::size_t ParamSet::total_parameters() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.numel();
  return n;
}

ParamSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
  require_valid_spec(spec);
  Rng rng(mix_seed(seed, 0x696e6974ULL));
  ParamSet params;
  for (const auto& layer : layer_list(spec)) {
    NamedTensor w;
    w.name = layer.prefix + ".w";
    w.shape = {layer.cout, layer.cin, layer.k, layer.k};
    w.data.resize(static_cast<std::size_t>(layer.cout) * layer.cin * layer.k * layer.k);
    const double stddev = std::sqrt(2.0 / (static_cast<double>(layer.cin) * layer.k * layer.k));
    for (auto& x : w.data) x = rng.normal(0.0, stddev);
    params.tensors.push_back(std::move(w));

    NamedTensor b;
    b.name = layer.prefix + ".b";
    b.shape = {layer.cout};
    b.data.assign(layer.cout, 0.0);
    params.tensors.push_back(std::move(b));
  }
  return params;
}

GradSet zero_grads(const ParamSet& params) {
  GradSet gs;
  gs.g.resize(params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    gs.g[i].assign(params.tensors[i].numel(), 0.0);
  return gs;
}

Forward forward(const ParamSet& params, const NetworkSpec& spec, const Tensor4& batch,
                int threads) {
  require_valid_spec(spec);
  require_batch(spec, batch);
  Forward fwd;
  fwd.cache.spec = spec;
  fwd.cache.input = batch;
  fwd.cache.samples.resize(batch.n);
  fwd.y = Tensor4(batch.n, 1, batch.h, batch.w);
  parallel_for(batch.n, threads, [&](int i) {
    forward_sample(params, spec, batch.sample(i), batch.h, batch.w, fwd.cache.samples[i],
                   fwd.y.sample(i));
  });
  fwd.cache.output = fwd.y;
  return fwd;
}

Tensor4 predict(const ParamSet& params, const NetworkSpec& spec, const Tensor4& batch,
                int threads) {
  require_valid_spec(spec);
  require_batch(spec, batch);
  Tensor4 y(batch.n, 1, batch.h, batch.w);
  parallel_for(batch.n, threads, [&](int i) {
    predict_sample(params, spec, batch.sample(i), batch.h, batch.w, y.sample(i));
  });
  return y;
}

GradSet backward(const ParamSet& params, const NetworkSpec& spec, const ForwardCache& cache,
                 const Tensor4& grad_out, int threads) {
  if (grad_out.n != cache.output.n || grad_out.c != 1 || grad_out.h != cache.output.h ||
      grad_out.w != cache.output.w)
    throw std::invalid_argument("backward: grad_out shape mismatch with cache");

  std::vector<GradSet> per_sample(cache.output.n);
  parallel_for(cache.output.n, threads, [&](int i) {
    per_sample[i] = zero_grads(params);
    backward_sample(params, spec, cache.samples[i], cache.input.sample(i),
                    cache.output.sample(i), grad_out.sample(i), cache.output.h, cache.output.w,
                    per_sample[i]);
  });

  // Fixed-order reduction: identical bytes for any thread count.
  GradSet total = zero_grads(params);
  for (int i = 0; i < cache.output.n; ++i)
    for (std::size_t t = 0; t < total.g.size(); ++t)
      for (std::size_t j = 0; j < total.g[t].size(); ++j) total.g[t][j] += per_sample[i].g[t][j];
  return total;
}

double gradient_check(const NetworkSpec& spec, std::uint64_t seed, reg::ObjectiveKind kind,
                      const reg::RegularizerConfig& cfg) {
  require_valid_spec(spec);
  const int side = 8;
  Rng rng(mix_seed(seed, 0x67636865636bULL));
  Tensor4 x(1, spec.in_channels, side, side);
  for (auto& v : x.v) v = rng.uniform();
  Image t(side, side);
  for (auto& v : t.v) v = rng.uniform() < 0.5 ? 1.0 : 0.0;

  auto loss_of = [&](const ParamSet& p) {
    auto y = predict(p, spec, x);
    Image yi(side, side);
    yi.v = y.v;
    return reg::objective(yi, t, kind, cfg).value;
  };

  ParamSet params = init_params(spec, seed);
  // Jitter every parameter so the loss is differentiable at the check point.
  // With zero biases, a fully clipped 3x3 patch puts the next pre-activation
  // exactly on the ReLU kink, where central differences return the average of
  // the one-sided slopes instead of the subgradient the reverse pass uses.
  Rng jitter(mix_seed(seed, 0x6a697474ULL));
  for (auto& t : params.tensors)
    for (auto& v : t.data) v += jitter.uniform(-0.05, 0.05);
  auto fwd = forward(params, spec, x);
  Image yi(side, side);
  yi.v = fwd.y.v;
  auto lg = reg::objective(yi, t, kind, cfg);
  Tensor4 dy(1, 1, side, side);
  dy.v = lg.grad;
  GradSet analytic = backward(params, spec, fwd.cache, dy);

  auto fd_at = [&](std::size_t ti, std::size_t j, double h) {
    const double keep = params.tensors[ti].data[j];
    params.tensors[ti].data[j] = keep + h;
    const double fp = loss_of(params);
    params.tensors[ti].data[j] = keep - h;
    const double fm = loss_of(params);
    params.tensors[ti].data[j] = keep;
    return (fp - fm) / (2.0 * h);
  };

  // Primary step 1e-5; entries whose window straddles a ReLU or pool kink show
  // a step-dependent deviation, so suspicious entries are re-measured at
  // smaller steps. A wrong analytic gradient is step-independent and keeps its
  // deviation through the refinement.
  double dev = 0.0, scale = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> suspicious;
  std::vector<double> sus_dev;
  for (std::size_t ti = 0; ti < params.tensors.size(); ++ti)
    for (std::size_t j = 0; j < params.tensors[ti].data.size(); ++j) {
      const double fd = fd_at(ti, j, 1e-5);
      const double an = analytic.g[ti][j];
      const double d = std::abs(an - fd);
      scale = std::max({scale, std::abs(an), std::abs(fd)});
      if (d > 1e-8) {
        suspicious.emplace_back(ti, j);
        sus_dev.push_back(d);
      } else {
        dev = std::max(dev, d);
      }
    }
  for (std::size_t s = 0; s < suspicious.size(); ++s) {
    const auto [ti, j] = suspicious[s];
    double d = sus_dev[s];
    for (double h : {1e-6, 1e-7})
      d = std::min(d, std::abs(analytic.g[ti][j] - fd_at(ti, j, h)));
    dev = std::max(dev, d);
  }
  if (scale < 1e-12) return dev;
  return dev / scale;
}

namespace {

constexpr char kMagic[8] = {'P', 'X', 'S', 'E', 'G', 'N', 'T', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
                         static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  os.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char bytes[4] = {0, 0, 0, 0};
  is.read(reinterpret_cast<char*>(bytes), 4);
  return std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) |
         (std::uint32_t(bytes[2]) << 16) | (std::uint32_t(bytes[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec,
                     const ParamSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint " + path.string() + " for writing");
  os.write(kMagic, 8);
  put_u32(os, static_cast<std::uint32_t>(spec.depth));
  put_u32(os, static_cast<std::uint32_t>(spec.base_channels));
  put_u32(os, static_cast<std::uint32_t>(spec.in_channels));
  put_u32(os, static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    put_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(os, static_cast<std::uint32_t>(d));
    for (double x : t.data) {
      const float f = static_cast<float>(x);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(os, bits);
    }
  }
  if (!os) throw DataError("checkpoint write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a checkpoint file: " + path.string());

  Checkpoint ck;
  ck.spec.depth = static_cast<int>(get_u32(is));
  ck.spec.base_channels = static_cast<int>(get_u32(is));
  ck.spec.in_channels = static_cast<int>(get_u32(is));
  const std::uint32_t count = get_u32(is);
  if (!is || !ck.spec.valid() || count > 4096)
    throw DataError("corrupt checkpoint header in " + path.string());

  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const std::uint32_t name_len = get_u32(is);
    if (!is || name_len > 256) throw DataError("corrupt tensor name in " + path.string());
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    const std::uint32_t ndim = get_u32(is);
    if (!is || ndim > 8) throw DataError("corrupt tensor shape in " + path.string());
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(static_cast<int>(get_u32(is)));
      numel *= static_cast<std::size_t>(t.shape.back());
    }
    if (!is || numel > (1u << 28)) throw DataError("corrupt tensor size in " + path.string());
    t.data.resize(numel);
    for (auto& x : t.data) {
      const std::uint32_t bits = get_u32(is);
      float f;
      std::memcpy(&f, &bits, 4);
      x = static_cast<double>(f);
    }
    ck.params.tensors.push_back(std::move(t));
  }
  if (!is) throw DataError("truncated checkpoint " + path.string());

  // The stored layout must match what the spec would create.
  const auto expect = init_params(ck.spec, 0);
  if (expect.tensors.size() != ck.params.tensors.size())
    throw DataError("checkpoint tensor count does not match its spec: " + path.string());
  for (std::size_t i = 0; i < expect.tensors.size(); ++i) {
    if (expect.tensors[i].name != ck.params.tensors[i].name ||
        expect.tensors[i].shape != ck.params.tensors[i].shape)
      throw DataError("checkpoint tensor layout mismatch at '" + ck.params.tensors[i].name +
                      "' in " + path.string());
  }
  return ck;
}

}  // namespace pixelreg::net
