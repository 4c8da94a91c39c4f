#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "pixelreg/data.hpp"
#include "pixelreg/metrics.hpp"
#include "pixelreg/optim.hpp"
#include "pixelreg/regularizers.hpp"
#include "pixelreg/segnet.hpp"

namespace pixelreg::train {

struct TrainConfig {
  int epochs = 100;
  double base_lr = 1e-3;
  int lr_decay_every = 25;
  double lr_decay_factor = 10.0;
  int batch_size = 32;
  reg::ObjectiveKind objective = reg::ObjectiveKind::Baseline;
  reg::RegularizerConfig reg;
  std::uint64_t seed = 0;
  int patches_per_image = 4750;
  int patch_size = 48;
  int threads = 1;
};

// Piecewise-constant decade decay: base_lr / factor^(epoch / every).
// Throws out_of_range unless 0 <= epoch < cfg.epochs.
double lr_schedule(int epoch, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;       // patch-mean objective value
  double reg_value = 0.0;  // patch-mean normalized regularizer, before lambda
  std::optional<double> val_acc, val_auc;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

// One row per epoch: epoch,lr,loss,reg_value,val_acc,val_auc. Validation
// columns stay empty when no validation set was supplied.
void write_train_log_csv(std::ostream& os, const TrainLog& log);

// Receives every assembled batch together with the network output it produced
// and the recorded values, before the parameter update.
struct BatchObserver {
  virtual ~BatchObserver() = default;
  virtual void on_batch(int epoch, int batch_index, const net::Tensor4& x, const net::Tensor4& t,
                        const net::Tensor4& y, double loss, double reg_value) = 0;
};

struct TrainResult {
  net::ParamSet params;
  TrainLog log;
};

// Samples cfg.patches_per_image patches from every training image, then runs
// epochs of shuffled mini-batches: forward -> objective -> backward -> Adam
// with the schedule. Bitwise reproducible for a fixed seed at any thread
// count. Throws NumericError naming epoch and batch when the loss leaves
// finite range.
TrainResult train(const std::vector<data::ImageSample>& images, const net::NetworkSpec& spec,
                  const TrainConfig& cfg,
                  const std::vector<data::ImageSample>* validation = nullptr,
                  BatchObserver* observer = nullptr);

// Pools pixel scores and truths over the whole dataset: each image is
// zero-padded to the pooling divisor, predicted, and cropped back. With
// fov_only, pixels outside an image's fov are excluded when a fov is present.
metrics::MetricsReport evaluate(const net::ParamSet& params, const net::NetworkSpec& spec,
                                const std::vector<data::ImageSample>& samples,
                                double threshold = 0.5, bool fov_only = true, int threads = 1);

}  // namespace pixelreg::train
