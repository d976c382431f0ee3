#include <catch_amalgamated.hpp>

#include <algorithm>
#include <sstream>

#include "stylesearch/errors.hpp"
#include "stylesearch/training.hpp"

using namespace stylesearch;

namespace {

// y = a * x for scalar x in [-1, 1]; dense 1 -> 1 regression.
ExampleSource line(double slope, std::size_t count) {
  return [slope, count](std::size_t i, Rng*) {
    const float x = -1.0f + 2.0f * static_cast<float>(i) / static_cast<float>(count - 1);
    return Example{Tensor::vector({x}), Tensor::vector({static_cast<float>(slope) * x})};
  };
}

Network regression_net() {
  Network net(Shape{1, 1, 1}, {layer::Dense{1, 8, Activation::relu}, layer::Dropout{0.2f},
                               layer::Dense{8, 1, Activation::linear}});
  net.initialize(3);
  return net;
}

// Two separable blobs in 2D with one-hot targets.
ExampleSource blobs(std::size_t count, std::uint64_t seed) {
  return [count, seed](std::size_t i, Rng*) {
    Rng rng(derive_seed(seed, i));
    const std::size_t cls = i % 2;
    const float cx = cls ? 1.0f : -1.0f;
    const float x = cx + static_cast<float>(uniform_real(rng, -0.5, 0.5));
    const float y = static_cast<float>(uniform_real(rng, -1.0, 1.0));
    (void)count;
    return Example{Tensor::vector({x, y}), Tensor::vector({cls ? 0.0f : 1.0f, cls ? 1.0f : 0.0f})};
  };
}

}  // namespace

TEST_CASE("early stopping counts strict improvements", "[training]") {
  EarlyStopping stop(2);
  CHECK(stop.observe(1.0));
  CHECK_FALSE(stop.observe(1.0));
  CHECK_FALSE(stop.should_stop());
  CHECK(stop.observe(0.5));
  CHECK_FALSE(stop.observe(0.7));
  CHECK_FALSE(stop.observe(0.6));
  CHECK(stop.should_stop());
  CHECK(stop.best() == 0.5);

  EarlyStopping disabled(0);
  for (int i = 0; i < 10; ++i) disabled.observe(1.0);
  CHECK_FALSE(disabled.should_stop());
}

TEST_CASE("plateau rule halves after patience flat epochs", "[training]") {
  PlateauScheduler plateau(3, 0.5, 1e-5);
  double lr = 1e-3;
  std::vector<double> lrs;
  for (int epoch = 0; epoch < 4; ++epoch) {
    lr = plateau.observe(1.0, lr);
    lrs.push_back(lr);
  }
  CHECK(lrs == std::vector<double>{1e-3, 1e-3, 1e-3, 5e-4});
  for (int epoch = 0; epoch < 3; ++epoch) lr = plateau.observe(1.0, lr);
  CHECK(lr == 2.5e-4);
  CHECK_THROWS_AS(PlateauScheduler(3, 1.0, 0.0), ContractError);
  CHECK_THROWS_AS(PlateauScheduler(3, 0.0, 0.0), ContractError);
}

TEST_CASE("learning rate never increases nor drops below min_lr", "[training]") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    PlateauScheduler plateau(1 + uniform_index(rng, 3), 0.1 + 0.8 * unit_real(rng), 1e-4);
    double lr = 1e-2;
    for (int epoch = 0; epoch < 60; ++epoch) {
      const double next = plateau.observe(unit_real(rng), lr);
      CHECK(next <= lr);
      CHECK(next >= 1e-4);
      lr = next;
    }
  }
}

TEST_CASE("fit reduces regression loss", "[training]") {
  Network net = regression_net();
  FitData data{64, line(2.0, 64), 0, {}};
  FitOptions options;
  options.epochs = 60;
  options.batch_size = 8;
  options.learning_rate = 1e-2;
  options.early_stop_patience = 0;
  const auto history = fit(net, data, options);
  CHECK(history.epochs_run == 60);
  CHECK(history.train_loss.size() == 60);
  CHECK(history.learning_rate.size() == 60);
  CHECK(history.val_loss.empty());
  CHECK(history.best_epoch == 0);
  CHECK_FALSE(history.stopped_early);
  CHECK(history.train_loss.back() < 0.25 * history.initial_train_loss);
}

TEST_CASE("fit is deterministic and independent of thread count", "[training]") {
  FitData data{40, line(-1.5, 40), 10, line(-1.5, 10)};
  FitOptions options;
  options.epochs = 5;
  options.batch_size = 7;
  options.learning_rate = 5e-3;
  options.seed = 9;
  Network a = regression_net();
  Network b = regression_net();
  Network c = regression_net();
  options.threads = 1;
  const auto ha = fit(a, data, options);
  const auto hb = fit(b, data, options);
  options.threads = 4;
  const auto hc = fit(c, data, options);
  CHECK(ha.train_loss == hb.train_loss);
  CHECK(ha.val_loss == hb.val_loss);
  CHECK(a.parameters() == b.parameters());
  CHECK(ha.train_loss == hc.train_loss);
  CHECK(a.parameters() == c.parameters());

  options.seed = 10;
  Network d = regression_net();
  const auto hd = fit(d, data, options);
  CHECK(hd.train_loss != ha.train_loss);
}

TEST_CASE("early stopping restores the best validation parameters", "[training]") {
  // Validation wants the opposite slope, so validation loss rises as
  // training fits the training slope.
  Network net = regression_net();
  FitData data{64, line(2.0, 64), 16, line(-2.0, 16)};
  FitOptions options;
  options.epochs = 40;
  options.batch_size = 8;
  options.learning_rate = 1e-2;
  options.early_stop_patience = 3;
  const auto history = fit(net, data, options);
  REQUIRE(history.stopped_early);
  CHECK(history.epochs_run < 40);
  CHECK(history.val_loss.size() == history.epochs_run);
  const double best = *std::min_element(history.val_loss.begin(), history.val_loss.end());
  CHECK(history.val_loss[history.best_epoch - 1] == best);
  CHECK(history.epochs_run == history.best_epoch + 3);
  const auto restored = evaluate_examples(net, 16, data.val, LossKind::mse);
  CHECK(restored.loss == best);
}

TEST_CASE("patience zero runs every epoch", "[training]") {
  Network net = regression_net();
  FitData data{16, line(2.0, 16), 8, line(-2.0, 8)};
  FitOptions options;
  options.epochs = 7;
  options.batch_size = 4;
  options.early_stop_patience = 0;
  const auto history = fit(net, data, options);
  CHECK(history.epochs_run == 7);
  CHECK(history.val_loss.size() == 7);
  CHECK_FALSE(history.stopped_early);
}

TEST_CASE("cross entropy fit tracks accuracy", "[training]") {
  Network net(Shape{1, 1, 2}, {layer::Dense{2, 8, Activation::relu}, layer::Dense{8, 2, Activation::linear}});
  net.initialize(4);
  FitData data{100, blobs(100, 1), 40, blobs(40, 2)};
  FitOptions options;
  options.epochs = 30;
  options.batch_size = 10;
  options.learning_rate = 1e-2;
  options.loss = LossKind::categorical_cross_entropy;
  options.plateau_patience = 2;
  std::size_t callbacks = 0;
  options.on_epoch = [&](std::size_t epoch, const TrainHistory& h) {
    ++callbacks;
    CHECK(h.epochs_run == epoch);
  };
  const auto history = fit(net, data, options);
  CHECK(callbacks == history.epochs_run);
  CHECK(history.train_accuracy.size() == history.epochs_run);
  CHECK(history.val_accuracy.size() == history.epochs_run);
  CHECK(*std::max_element(history.val_accuracy.begin(), history.val_accuracy.end()) >= 0.95);
  for (std::size_t e = 1; e < history.learning_rate.size(); ++e) {
    CHECK(history.learning_rate[e] <= history.learning_rate[e - 1]);
  }
}

TEST_CASE("fit contract errors", "[training]") {
  Network net = regression_net();
  CHECK_THROWS_AS(fit(net, FitData{0, line(1.0, 2), 0, {}}, FitOptions{}), ContractError);
  FitOptions zero_batch;
  zero_batch.batch_size = 0;
  CHECK_THROWS_AS(fit(net, FitData{4, line(1.0, 4), 0, {}}, zero_batch), ContractError);
}

TEST_CASE("history csv layout", "[training]") {
  TrainHistory h;
  h.epochs_run = 2;
  h.train_loss = {0.5, 0.25};
  h.val_loss = {0.75, 0.5};
  h.train_accuracy = {0.5, 1.0};
  h.val_accuracy = {0.25, 0.75};
  h.learning_rate = {0.001, 0.0005};
  CHECK(h.to_csv() ==
        "epoch,train_loss,val_loss,train_acc,val_acc,lr\n"
        "1,0.5,0.75,0.5,0.25,0.001\n"
        "2,0.25,0.5,1,0.75,0.0005\n");
  TrainHistory ae;
  ae.epochs_run = 1;
  ae.train_loss = {0.125};
  ae.learning_rate = {0.001};
  CHECK(ae.to_csv() == "epoch,train_loss,val_loss,train_acc,val_acc,lr\n1,0.125,,,,0.001\n");
}
