#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "stylesearch/network.hpp"
#include "stylesearch/ops.hpp"
#include "stylesearch/rng.hpp"

namespace stylesearch {

struct TrainHistory {
  // One entry per epoch run. Training loss is the mean over the epoch's
  // mini-batches in training mode; validation figures use inference mode.
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_accuracy;
  // Learning rate used during each epoch.
  std::vector<double> learning_rate;
  std::size_t epochs_run = 0;
  bool stopped_early = false;
  // Inference-mode training loss before the first update.
  double initial_train_loss = std::numeric_limits<double>::quiet_NaN();
  // 1-based epoch whose parameters were restored; 0 if none were.
  std::size_t best_epoch = 0;

  // Columns: epoch,train_loss,val_loss,train_acc,val_acc,lr
  std::string to_csv() const;
  void write_csv(const std::string& path) const;
};

// Patience counter over a monitored loss; improvement means strictly lower.
// A patience of 0 disables stopping.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when `loss` is a new best.
  bool observe(double loss);
  bool should_stop() const { return patience_ > 0 && bad_epochs_ >= patience_; }
  double best() const { return best_; }
  std::size_t bad_epochs() const { return bad_epochs_; }

 private:
  std::size_t patience_;
  std::size_t bad_epochs_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

// Multiplies the learning rate by `factor` (floored at min_lr) once the
// monitored loss has failed to improve for `patience` consecutive epochs,
// then starts counting again. A patience of 0 disables it.
class PlateauScheduler {
 public:
  PlateauScheduler(std::size_t patience, double factor, double min_lr);

  // Returns the learning rate to use for the next epoch.
  double observe(double loss, double current_lr);

 private:
  std::size_t patience_;
  double factor_;
  double min_lr_;
  std::size_t bad_epochs_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct Example {
  Tensor input;
  Tensor target;
};

// Supplies example `index`. The rng is non-null for training-mode fetches
// (augmentation allowed) and null for evaluation fetches.
using ExampleSource = std::function<Example(std::size_t index, Rng* rng)>;

struct FitData {
  std::size_t train_count = 0;
  ExampleSource train;
  std::size_t val_count = 0;
  ExampleSource val;
};

struct FitOptions {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t early_stop_patience = 5;
  std::size_t plateau_patience = 0;
  double plateau_factor = 0.5;
  double min_lr = 1e-5;
  std::uint64_t seed = 42;
  // mse compares network output to the target directly; cross entropy
  // applies softmax to the network output (logits) first and also records
  // argmax accuracy against one-hot targets.
  LossKind loss = LossKind::mse;
  // Gradient shards per batch. Shards are summed in a fixed order, so results
  // do not depend on how many threads run them.
  std::size_t shards = 4;
  std::size_t threads = 0;  // 0: hardware concurrency
  // Called after each epoch with the 1-based epoch number.
  std::function<void(std::size_t, const TrainHistory&)> on_epoch;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Mean inference-mode loss (and accuracy for cross entropy) over `count`
// examples.
EvalResult evaluate_examples(const Network& net, std::size_t count, const ExampleSource& source,
                             LossKind loss);

// Mini-batch Adam over shuffled training examples. Each item draws its
// augmentation and dropout randomness from derive_seed(seed, epoch, index).
// When validation data exists, the best-validation parameters are restored
// before returning.
TrainHistory fit(Network& net, const FitData& data, const FitOptions& options);

}  // namespace stylesearch
