#include "pixelreg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "parallel.hpp"
#include "pixelreg/errors.hpp"
#include "pixelreg/rng.hpp"

namespace pixelreg::train {

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs)
    throw std::out_of_range("lr_schedule: epoch " + std::to_string(epoch) +
                            " outside [0, " + std::to_string(cfg.epochs) + ")");
  const int k = epoch / cfg.lr_decay_every;
  return cfg.base_lr / std::pow(cfg.lr_decay_factor, static_cast<double>(k));
}

void write_train_log_csv(std::ostream& os, const TrainLog& log) {
  os << "epoch,lr,loss,reg_value,val_acc,val_auc\n";
  char buf[256];
  for (const auto& e : log.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g", e.epoch, e.lr, e.loss, e.reg_value);
    os << buf;
    if (e.val_acc && e.val_auc) {
      std::snprintf(buf, sizeof(buf), ",%.10g,%.10g\n", *e.val_acc, *e.val_auc);
      os << buf;
    } else {
      os << ",,\n";
    }
  }
}

namespace {

void require_config(const TrainConfig& cfg, const net::NetworkSpec& spec) {
  if (!spec.valid()) throw std::invalid_argument("train: invalid NetworkSpec");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.patches_per_image < 1 || cfg.patch_size < 1 ||
      cfg.lr_decay_every < 1 || cfg.threads < 1)
    throw std::invalid_argument("train: counts must be positive");
  if (cfg.patch_size % spec.divisor() != 0)
    throw std::invalid_argument("train: patch_size must be a multiple of " +
                                std::to_string(spec.divisor()));
}

}  // namespace

TrainResult train(const std::vector<data::ImageSample>& images, const net::NetworkSpec& spec,
                  const TrainConfig& cfg, const std::vector<data::ImageSample>* validation,
                  BatchObserver* observer) {
  require_config(cfg, spec);
  if (images.empty()) throw std::invalid_argument("train: empty dataset");

  TrainResult result;
  result.params = net::init_params(spec, cfg.seed);
  if (cfg.epochs == 0) return result;

  std::vector<data::PatchPair> patches;
  patches.reserve(images.size() * static_cast<std::size_t>(cfg.patches_per_image));
  for (std::size_t i = 0; i < images.size(); ++i) {
    data::PatchSpec ps{cfg.patch_size, cfg.patches_per_image, mix_seed(cfg.seed, i)};
    auto part = data::sample_patches(images[i], ps);
    std::move(part.begin(), part.end(), std::back_inserter(patches));
  }

  opt::AdamState adam = opt::init_adam(result.params);
  Rng shuffle_rng(mix_seed(cfg.seed, 0x65706f6368ULL));
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const int side = cfg.patch_size;
  const std::size_t plane = static_cast<std::size_t>(side) * side;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0, reg_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const int bsz = static_cast<int>(
          std::min<std::size_t>(cfg.batch_size, order.size() - start));
      net::Tensor4 x(bsz, 1, side, side), t(bsz, 1, side, side);
      for (int b = 0; b < bsz; ++b) {
        const auto& p = patches[order[start + b]];
        std::copy(p.image.v.begin(), p.image.v.end(), x.sample(b));
        std::copy(p.mask.v.begin(), p.mask.v.end(), t.sample(b));
      }

      net::Forward fwd = net::forward(result.params, spec, x, cfg.threads);

      net::Tensor4 dy(bsz, 1, side, side);
      std::vector<double> totals(bsz), regs(bsz);
      net::parallel_for(bsz, cfg.threads, [&](int b) {
        Image yb(side, side), tb(side, side);
        yb.v.assign(fwd.y.sample(b), fwd.y.sample(b) + plane);
        tb.v.assign(t.sample(b), t.sample(b) + plane);
        auto parts = reg::objective_parts(yb, tb, cfg.objective, cfg.reg);
        totals[b] = parts.total.value;
        regs[b] = parts.reg_value;
        double* slot = dy.sample(b);
        const double inv = 1.0 / static_cast<double>(bsz);
        for (std::size_t i = 0; i < plane; ++i) slot[i] = parts.total.grad[i] * inv;
      });

      double batch_loss = 0.0, batch_reg = 0.0;
      for (int b = 0; b < bsz; ++b) {
        batch_loss += totals[b];
        batch_reg += regs[b];
      }
      batch_loss /= bsz;
      batch_reg /= bsz;
      if (!std::isfinite(batch_loss))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + " batch " + std::to_string(batch_index));
      if (observer) observer->on_batch(epoch, batch_index, x, t, fwd.y, batch_loss, batch_reg);

      net::GradSet grads = net::backward(result.params, spec, fwd.cache, dy, cfg.threads);
      try {
        opt::adam_step(result.params, grads, adam, lr);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(batch_index));
      }

      for (int b = 0; b < bsz; ++b) {
        loss_sum += totals[b];
        reg_sum += regs[b];
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.loss = loss_sum / static_cast<double>(patches.size());
    rec.reg_value = reg_sum / static_cast<double>(patches.size());
    if (validation && !validation->empty()) {
      auto report = evaluate(result.params, spec, *validation, 0.5, true, cfg.threads);
      rec.val_acc = report.acc;
      rec.val_auc = report.auc;
    }
    result.log.epochs.push_back(rec);
  }
  return result;
}

metrics::MetricsReport evaluate(const net::ParamSet& params, const net::NetworkSpec& spec,
                                const std::vector<data::ImageSample>& samples, double threshold,
                                bool fov_only, int threads) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const int d = spec.divisor();

  std::vector<std::vector<double>> all_scores(samples.size());
  std::vector<std::vector<std::uint8_t>> all_truth(samples.size());
  net::parallel_for(static_cast<int>(samples.size()), threads, [&](int i) {
    const auto& s = samples[i];
    const int h = s.image.rows, w = s.image.cols;
    const int ph = (h + d - 1) / d * d, pw = (w + d - 1) / d * d;
    net::Tensor4 x(1, 1, ph, pw);
    for (int r = 0; r < h; ++r)
      std::copy(s.image.v.begin() + static_cast<std::size_t>(r) * w,
                s.image.v.begin() + static_cast<std::size_t>(r + 1) * w,
                x.v.begin() + static_cast<std::size_t>(r) * pw);
    net::Tensor4 y = net::predict(params, spec, x);

    auto& scores = all_scores[i];
    auto& truth = all_truth[i];
    scores.reserve(static_cast<std::size_t>(h) * w);
    truth.reserve(static_cast<std::size_t>(h) * w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (fov_only && s.fov && s.fov->at(r, c) < 0.5) continue;
        scores.push_back(y.v[static_cast<std::size_t>(r) * pw + c]);
        truth.push_back(s.mask.at(r, c) >= 0.5 ? 1 : 0);
      }
  });

  std::vector<double> scores;
  std::vector<std::uint8_t> truth;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    scores.insert(scores.end(), all_scores[i].begin(), all_scores[i].end());
    truth.insert(truth.end(), all_truth[i].begin(), all_truth[i].end());
  }
  return metrics::compute_metrics(scores, truth, threshold);
}

}  // namespace pixelreg::train
