#include "stylesearch/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <thread>

#include "stylesearch/errors.hpp"
#include "stylesearch/optimizer.hpp"

namespace stylesearch {
namespace {

std::size_t argmax(std::span<const float> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

struct ItemResult {
  double loss = 0.0;
  bool correct = false;
};

// Loss and d(loss)/d(output) for one network output.
ItemResult item_loss(LossKind kind, const Tensor& output, const Tensor& target, Tensor* grad) {
  ItemResult r;
  if (kind == LossKind::mse) {
    r.loss = loss<float>(kind, output.values(), target.values());
    if (grad) *grad = Tensor(output.shape(), mse_gradient<float>(output.values(), target.values()));
  } else {
    const auto probs = softmax<float>(output.values());
    r.loss = loss<float>(kind, probs, target.values());
    r.correct = argmax(output.values()) == argmax(target.values());
    if (grad) {
      *grad = Tensor(output.shape(), softmax_cross_entropy_gradient<float>(probs, target.values()));
    }
  }
  return r;
}

void add_into(ParamSet<float>& into, const ParamSet<float>& from) {
  for (std::size_t l = 0; l < into.size(); ++l) {
    for (std::size_t i = 0; i < into[l].weights.size(); ++i) into[l].weights[i] += from[l].weights[i];
    for (std::size_t i = 0; i < into[l].bias.size(); ++i) into[l].bias[i] += from[l].bias[i];
  }
}

void scale(ParamSet<float>& grads, float factor) {
  for (auto& layer : grads) {
    for (float& g : layer.weights) g *= factor;
    for (float& g : layer.bias) g *= factor;
  }
}

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  std::ostringstream out;
  out << std::setprecision(9) << value;
  return out.str();
}

}  // namespace

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,train_acc,val_acc,lr\n";
  auto at = [](const std::vector<double>& v, std::size_t i) {
    return i < v.size() ? v[i] : std::numeric_limits<double>::quiet_NaN();
  };
  for (std::size_t e = 0; e < epochs_run; ++e) {
    out << e + 1 << ',' << format_number(at(train_loss, e)) << ',' << format_number(at(val_loss, e))
        << ',' << format_number(at(train_accuracy, e)) << ',' << format_number(at(val_accuracy, e))
        << ',' << format_number(at(learning_rate, e)) << '\n';
  }
  return out.str();
}

void TrainHistory::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write history '" + path + "'");
  out << to_csv();
  if (!out) throw IoError("failed writing history '" + path + "'");
}

bool EarlyStopping::observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

PlateauScheduler::PlateauScheduler(std::size_t patience, double factor, double min_lr)
    : patience_(patience), factor_(factor), min_lr_(min_lr) {
  if (!(factor > 0.0 && factor < 1.0)) throw ContractError("plateau factor must lie in (0, 1)");
  if (!(min_lr >= 0.0)) throw ContractError("min_lr must be non-negative");
}

double PlateauScheduler::observe(double loss, double current_lr) {
  if (loss < best_) {
    best_ = loss;
    bad_epochs_ = 0;
    return current_lr;
  }
  ++bad_epochs_;
  if (patience_ == 0 || bad_epochs_ < patience_) return current_lr;
  bad_epochs_ = 0;
  return std::max(current_lr * factor_, std::min(min_lr_, current_lr));
}

EvalResult evaluate_examples(const Network& net, std::size_t count, const ExampleSource& source,
                             LossKind kind) {
  EvalResult result;
  if (count == 0) return result;
  double total = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const Example ex = source(i, nullptr);
    const Tensor out = infer(net, ex.input);
    const ItemResult r = item_loss(kind, out, ex.target, nullptr);
    total += r.loss;
    correct += r.correct ? 1 : 0;
  }
  result.loss = total / static_cast<double>(count);
  result.accuracy = static_cast<double>(correct) / static_cast<double>(count);
  return result;
}

TrainHistory fit(Network& net, const FitData& data, const FitOptions& options) {
  if (data.train_count == 0 || !data.train) throw ContractError("fit: empty training set");
  if (data.val_count > 0 && !data.val) throw ContractError("fit: validation source missing");
  if (options.batch_size == 0) throw ContractError("fit: batch_size must be positive");
  if (!(options.learning_rate > 0.0)) throw ContractError("fit: learning_rate must be positive");
  PlateauScheduler plateau(options.plateau_patience, options.plateau_factor, options.min_lr);
  EarlyStopping early(options.early_stop_patience);
  const bool classify = options.loss == LossKind::categorical_cross_entropy;
  const std::size_t shard_count = std::max<std::size_t>(1, options.shards);
  std::size_t threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, shard_count);

  TrainHistory history;
  history.initial_train_loss = evaluate_examples(net, data.train_count, data.train, options.loss).loss;

  OptimizerState state = OptimizerState::for_network(net);
  double lr = options.learning_rate;
  ParamSet<float> best_params;
  std::vector<std::size_t> order(data.train_count);

  struct Shard {
    ParamSet<float> grads;
    double loss = 0.0;
    std::size_t correct = 0;
  };
  std::vector<Shard> shards(shard_count);

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(options.seed, epoch, ~std::uint64_t{0}));
    fisher_yates(order.begin(), order.end(), shuffle_rng);
    state.hyper.learning_rate = lr;

    double epoch_loss = 0.0;
    std::size_t epoch_correct = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const std::size_t batch = end - start;
      const std::size_t used = std::min(shard_count, batch);
      auto run_shard = [&](std::size_t s) {
        Shard& shard = shards[s];
        shard.grads = net.zero_like();
        shard.loss = 0.0;
        shard.correct = 0;
        const std::size_t lo = start + batch * s / used;
        const std::size_t hi = start + batch * (s + 1) / used;
        for (std::size_t k = lo; k < hi; ++k) {
          const std::size_t index = order[k];
          Rng rng(derive_seed(options.seed, epoch, index));
          const Example ex = data.train(index, &rng);
          const auto record = forward(net, ex.input, true, rng);
          Tensor grad;
          const ItemResult r = item_loss(options.loss, record.output(), ex.target, &grad);
          shard.loss += r.loss;
          shard.correct += r.correct ? 1 : 0;
          backward_accumulate(net, record, grad, shard.grads);
        }
      };
      if (threads <= 1 || used == 1) {
        for (std::size_t s = 0; s < used; ++s) run_shard(s);
      } else {
        for (std::size_t first = 0; first < used; first += threads) {
          std::vector<std::thread> pool;
          const std::size_t last = std::min(used, first + threads);
          for (std::size_t s = first + 1; s < last; ++s) pool.emplace_back(run_shard, s);
          run_shard(first);
          for (auto& t : pool) t.join();
        }
      }
      ParamSet<float> total = std::move(shards[0].grads);
      double batch_loss = shards[0].loss;
      std::size_t batch_correct = shards[0].correct;
      for (std::size_t s = 1; s < used; ++s) {
        add_into(total, shards[s].grads);
        batch_loss += shards[s].loss;
        batch_correct += shards[s].correct;
      }
      scale(total, 1.0f / static_cast<float>(batch));
      adam_step(net, total, state);
      epoch_loss += batch_loss;
      epoch_correct += batch_correct;
    }

    const double n = static_cast<double>(data.train_count);
    history.train_loss.push_back(epoch_loss / n);
    history.learning_rate.push_back(lr);
    if (classify) history.train_accuracy.push_back(static_cast<double>(epoch_correct) / n);
    double monitored = history.train_loss.back();
    if (data.val_count > 0) {
      const EvalResult val = evaluate_examples(net, data.val_count, data.val, options.loss);
      history.val_loss.push_back(val.loss);
      if (classify) history.val_accuracy.push_back(val.accuracy);
      monitored = val.loss;
    }
    history.epochs_run = epoch;

    if (early.observe(monitored) && data.val_count > 0) {
      best_params = net.parameters();
      history.best_epoch = epoch;
    }
    lr = plateau.observe(monitored, lr);
    if (options.on_epoch) options.on_epoch(epoch, history);
    if (!std::isfinite(monitored)) break;
    if (early.should_stop()) {
      history.stopped_early = epoch < options.epochs;
      break;
    }
  }
  if (history.best_epoch > 0) net.set_parameters(std::move(best_params));
  return history;
}

}  // namespace stylesearch
