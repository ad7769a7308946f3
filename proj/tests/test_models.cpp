#include <doctest.h>

#include <cmath>

#include "metafl/datagen.hpp"
#include "metafl/error.hpp"
#include "metafl/models.hpp"
#include "support.hpp"

using namespace metafl;
using metafl::testing::random_values;

namespace {

ClientDataset random_dataset(Rng& rng, std::size_t n, std::size_t dim, std::size_t classes) {
  std::vector<double> x = random_values(rng, n * dim, -2.0, 2.0);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
  return ClientDataset(dim, classes, std::move(x), std::move(y));
}

}  // namespace

TEST_CASE("init_params") {
  const ModelSpec linear{2, 0, 2, Activation::relu};
  CHECK(linear.param_count() == 6);
  CHECK(init_params(linear, 3).dim() == 6);
  CHECK(init_params(linear, 3) == init_params(linear, 3));
  CHECK_FALSE(init_params(linear, 3) == init_params(linear, 4));

  const ModelSpec mlp{3, 4, 2, Activation::tanh};
  CHECK(mlp.param_count() == 4 * 3 + 4 + 2 * 4 + 2);
  const auto theta = init_params(mlp, 9);
  for (double t : theta.values()) CHECK(std::abs(t) <= 1.0);
}

TEST_CASE("train_local leaves params untouched for zero epochs or a vanishing step") {
  Rng rng(1);
  const ModelSpec spec{3, 0, 3, Activation::relu};
  const auto data = random_dataset(rng, 30, 3, 3);
  const auto theta = init_params(spec, 2);

  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK(train_local(spec, theta, data, cfg) == theta);

  cfg.epochs = 3;
  cfg.learning_rate = 1e-300;
  const auto moved = train_local(spec, theta, data, cfg);
  CHECK(max_abs_diff(moved.coords(), theta.coords()) <= 1e-12);
}

TEST_CASE("one full-batch SGD step from zero matches the closed form") {
  // One sample x = [1, 2] with label 1. At theta = 0 both classes have p = 0.5,
  // so dL/dW_c = (p_c - [c == 1]) x and dL/db_c = p_c - [c == 1].
  const ModelSpec spec{2, 0, 2, Activation::relu};
  const ClientDataset data(2, 2, {1.0, 2.0}, {1});
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.epochs = 1;
  cfg.batch_size = 1;
  const auto theta = train_local(spec, ParamVector::zeros(6), data, cfg);
  const std::vector<double> expected{-0.25, -0.5, 0.25, 0.5, -0.25, 0.25};
  CHECK(max_abs_diff(theta.coords(), expected) <= 1e-15);
}

TEST_CASE("evaluate") {
  const ModelSpec spec{1, 0, 2, Activation::relu};
  const auto balanced = metafl::testing::labels_only({0, 1, 0, 1}, 2);
  auto m = evaluate(spec, ParamVector::zeros(4), balanced);
  CHECK(m.val_loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(m.val_accuracy == 0.5);  // every tie goes to class 0

  // Separated data, large-margin model.
  const ClientDataset sep(1, 2, {-1.0, -2.0, 1.0, 3.0}, {0, 0, 1, 1});
  m = evaluate(spec, ParamVector({-10.0, 10.0, 0.0, 0.0}), sep);
  CHECK(m.val_accuracy == 1.0);

  // Hand evaluation of the mean cross-entropy.
  const ClientDataset three(1, 2, {1.0, -2.0, 0.5}, {0, 1, 1});
  const ParamVector theta({0.5, -0.5, 0.1, 0.0});
  double expected = 0.0;
  const double xs[] = {1.0, -2.0, 0.5};
  const int ys[] = {0, 1, 1};
  for (int i = 0; i < 3; ++i) {
    const double z0 = 0.5 * xs[i] + 0.1, z1 = -0.5 * xs[i];
    expected += std::log(std::exp(z0) + std::exp(z1)) - (ys[i] == 0 ? z0 : z1);
  }
  expected /= 3.0;
  CHECK(std::abs(evaluate(spec, theta, three).val_loss - expected) <= 1e-9);
  CHECK(local_loss(spec, theta, three) == evaluate(spec, theta, three).val_loss);
  CHECK(local_loss(spec, ParamVector::zeros(4), balanced) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("training lowers the loss on a separable toy set") {
  const ModelSpec spec{2, 0, 2, Activation::relu};
  const auto data = make_blobs(2, 2, 200, 0.2, 7);
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 16;
  cfg.seed = 3;
  auto theta = ParamVector::zeros(spec.param_count());
  double prev = local_loss(spec, theta, data);
  for (int epoch = 0; epoch < 5; ++epoch) {
    theta = train_local(spec, theta, data, cfg);
    const double now = local_loss(spec, theta, data);
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t dim = 1 + rng.below(4), classes = 2 + rng.below(3);
    const std::size_t hidden = trial % 2 == 0 ? 0 : 1 + rng.below(3);
    const ModelSpec spec{dim, hidden, classes, Activation::tanh};
    if (spec.param_count() > 30) continue;
    const auto data = random_dataset(rng, 5 + rng.below(10), dim, classes);
    const ParamVector theta(random_values(rng, spec.param_count(), -1.0, 1.0));
    const double l2 = rng.uniform(0.0, 0.1);
    const auto analytic = objective_gradient(spec, theta, data, l2);
    const auto numeric = finite_diff_grad(
        [&](std::span<const double> t) {
          return training_objective(spec, ParamVector({t.begin(), t.end()}), data, l2);
        },
        theta.coords(), 1e-6);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      CHECK(metafl::testing::rel_error(analytic[i], numeric[i]) <= 1e-5);
    }
  }
}

TEST_CASE("train_local is deterministic and pure") {
  Rng rng(4);
  const ModelSpec spec{3, 5, 3, Activation::relu};
  const auto data = random_dataset(rng, 40, 3, 3);
  const auto theta = init_params(spec, 1);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 7;
  cfg.seed = 99;
  const auto copy = theta;
  const auto a = train_local(spec, theta, data, cfg);
  const auto b = train_local(spec, theta, data, cfg);
  CHECK(a == b);
  CHECK(theta == copy);
  cfg.seed = 100;
  CHECK_FALSE(train_local(spec, theta, data, cfg) == a);
}

TEST_CASE("predictions form a distribution and ties go to the lowest class") {
  Rng rng(8);
  const ModelSpec spec{4, 3, 5, Activation::relu};
  for (int trial = 0; trial < 50; ++trial) {
    const ParamVector theta(random_values(rng, spec.param_count(), -3, 3));
    const auto x = random_values(rng, 4, -2, 2);
    const auto p = predict_proba(spec, theta, x);
    double s = 0;
    for (double pi : p) {
      CHECK(pi >= 0.0);
      s += pi;
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
  const std::vector<double> x{0.3, 0.1, -0.2, 1.0};
  CHECK(predict(spec, ParamVector::zeros(spec.param_count()), x) == 0);
}

TEST_CASE("shape errors") {
  const ModelSpec spec{2, 0, 2, Activation::relu};
  const auto data = metafl::testing::labels_only({0, 1}, 2);  // dim 1
  CHECK_THROWS_AS(evaluate(spec, ParamVector::zeros(6), data), InvalidArgument);
  CHECK_THROWS_AS(train_local(spec, ParamVector::zeros(6), data, TrainConfig{}), InvalidArgument);
  const ModelSpec one_d{1, 0, 2, Activation::relu};
  CHECK_THROWS_AS(evaluate(one_d, ParamVector::zeros(6), data), InvalidArgument);
  CHECK_THROWS_WITH_AS(ClientDataset(1, 2, {}, {}), "empty dataset", InvalidArgument);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
