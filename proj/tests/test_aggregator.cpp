#include <doctest.h>

#include <cmath>

#include "metafl/aggregator.hpp"
#include "metafl/datagen.hpp"
#include "metafl/error.hpp"
#include "support.hpp"

using namespace metafl;
using metafl::testing::make_report;
using metafl::testing::random_values;
using metafl::testing::simplex_ok;

TEST_CASE("weights_closed_form") {
  const std::vector<double> flat{0.2, 0.2, 0.2};
  for (double alpha : {0.0, 1.0, 50.0}) {
    const auto w = weights_closed_form(flat, alpha);
    for (double x : w.values()) CHECK(x == doctest::Approx(1.0 / 3));
  }
  const std::vector<double> gap{0.1, 0.9};
  CHECK(weights_closed_form(gap, 1e3)[0] >= 0.99);
  const std::vector<double> e{0.1, 0.5};
  const auto w = weights_closed_form(e, 1.0);
  CHECK(std::abs(w[0] - 0.598688) <= 1e-6);
  CHECK(std::abs(w[1] - 0.401312) <= 1e-6);
}

TEST_CASE("phi_objective") {
  const std::vector<double> e{0.3, 0.7, 0.1};
  CHECK(phi_objective(WeightVector::one_hot(3, 1), e, 2.0) == 0.7);

  const std::vector<double> zeros{0.0, 0.0};
  CHECK(phi_objective(WeightVector::uniform(2), zeros, 1.0) ==
        doctest::Approx(-0.693147).epsilon(1e-6));

  // 0.06 + 0.20 + 0.5 (0.6 ln 0.6 + 0.4 ln 0.4), evaluated in long double.
  const long double oracle =
      0.26L + 0.5L * (0.6L * std::log(0.6L) + 0.4L * std::log(0.4L));
  const std::vector<double> e2{0.1, 0.5};
  const double phi = phi_objective(WeightVector({0.6, 0.4}), e2, 0.5);
  CHECK(std::abs(phi - static_cast<double>(oracle)) <= 1e-12);
  CHECK(std::abs(phi - (-0.0765058)) <= 1e-6);
}

TEST_CASE("phi_gradient") {
  const std::vector<double> zeros{0.0, 0.0};
  const std::vector<double> w{0.5, 0.5};
  const auto g = phi_gradient(w, zeros, 1.0);
  const auto fd = finite_diff_grad(
      [&](std::span<const double> v) {
        double s = 0;
        for (double x : v) s += x * std::log(x);
        return s;
      },
      w, 1e-6);
  CHECK(std::abs(g[0] - fd[0]) <= 1e-8);
  CHECK(std::abs(g[0] - 0.306853) <= 1e-6);
  CHECK(g[0] == g[1]);

  const std::vector<double> e{0.3, -1.0, 2.5};
  const std::vector<double> interior{0.2, 0.3, 0.5};
  CHECK(phi_gradient(interior, e, 0.0) == e);

  const std::vector<double> boundary{0.0, 1.0};
  CHECK_THROWS_WITH_AS(phi_gradient(boundary, zeros, 1.0), "boundary gradient undefined",
                       InvalidArgument);
}

TEST_CASE("phi_gradient matches finite differences on interior points") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(10);
    const auto w = rng.dirichlet(2.0, k);
    const auto e = random_values(rng, k, 0.0, 1.0);
    const double tau = rng.uniform(0.1, 2.0);
    const auto g = phi_gradient(w, e, tau);
    const auto fd = finite_diff_grad(
        [&](std::span<const double> v) {
          double s = 0;
          for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * e[i] + tau * v[i] * std::log(v[i]);
          return s;
        },
        w, 1e-7);
    for (std::size_t i = 0; i < k; ++i) CHECK(metafl::testing::rel_error(g[i], fd[i]) <= 1e-5);
  }
}

TEST_CASE("weights_iterative examples") {
  MetaParams mp;
  const std::vector<double> single{0.7};
  auto r = weights_iterative(single, mp, Solver::mirror);
  CHECK(r.weights[0] == 1.0);
  CHECK(r.iters == 0);

  mp.tau = 1.0;
  mp.eta = 0.1;
  const std::vector<double> zeros{0.0, 0.0};
  for (auto solver : {Solver::mirror, Solver::projected}) {
    r = weights_iterative(zeros, mp, solver);
    CHECK(std::abs(r.weights[0] - 0.5) <= 1e-8);
  }

  mp.tol = 1e-10;
  const std::vector<double> e{0.1, 0.5};
  const auto closed = weights_closed_form(e, 1.0);
  for (auto solver : {Solver::mirror, Solver::projected}) {
    r = weights_iterative(e, mp, solver);
    CHECK(max_abs_diff(r.weights.values(), closed.values()) <= 1e-6);
    CHECK(r.residual < 1e-10);
  }
}

TEST_CASE("weights_iterative reports divergence") {
  MetaParams mp;
  mp.tau = 1.0;
  mp.eta = 1e300;
  const std::vector<double> e{0.1, 1e10};
  CHECK_THROWS_WITH_AS(weights_iterative(e, mp, Solver::projected),
                       doctest::Contains("projected"), NumericalError);
}

TEST_CASE("mirror solver agrees with the closed form") {
  Rng rng(32);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng.below(32);
    const auto e = random_values(rng, k, 0.0, 1.0);
    MetaParams mp;
    mp.alpha = rng.uniform(0.5, 2.0);
    const auto r = weights_iterative(e, mp, Solver::mirror);
    REQUIRE(simplex_ok(r.weights.values()));
    CHECK(max_abs_diff(r.weights.values(), weights_closed_form(e, mp.alpha).values()) <= 1e-6);
  }
}

TEST_CASE("solver output is invariant to shifting every error") {
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(8);
    const auto e = random_values(rng, k, 0.0, 1.0);
    auto shifted = e;
    const double c = rng.uniform(-5, 5);
    for (double& x : shifted) x += c;
    MetaParams mp;
    mp.tau = 1.0;
    CHECK(max_abs_diff(weights_closed_form(e, 1.0).values(),
                       weights_closed_form(shifted, 1.0).values()) <= 1e-9);
    CHECK(max_abs_diff(weights_iterative(e, mp, Solver::mirror).weights.values(),
                       weights_iterative(shifted, mp, Solver::mirror).weights.values()) <= 1e-9);
  }
}

TEST_CASE("mirror residuals decay geometrically") {
  Rng rng(34);
  MetaParams mp;
  mp.tau = 1.0;
  mp.eta = 0.1;
  mp.tol = 1e-10;
  for (int trial = 0; trial < 50; ++trial) {
    const auto e = random_values(rng, 2 + rng.below(20), 0.0, 1.0);
    const auto r = weights_iterative(e, mp, Solver::mirror);
    CHECK(r.iters <= 500);
    const auto& res = r.residuals;
    for (std::size_t t = 5; t + 10 < res.size(); ++t) CHECK(res[t + 10] <= 0.9 * res[t]);
  }
}

TEST_CASE("aggregate") {
  std::vector<ClientReport> one{make_report(0, {2.0, 4.0}, 0.3)};
  CHECK(aggregate(one, WeightVector({1.0}), 0.0) == one[0].theta_k);

  // Oracle: 1-D grid minimization of (t - c)^2 + lambda t^2 per coordinate.
  auto shrink = [](double c, double lambda) {
    double best = 0, best_f = INFINITY;
    for (int i = -100000; i <= 100000; ++i) {
      const double t = i * 1e-4;
      const double f = (t - c) * (t - c) + lambda * t * t;
      if (f < best_f) best_f = f, best = t;
    }
    return best;
  };
  const auto g = aggregate(one, WeightVector({1.0}), 1.0);
  CHECK(std::abs(g[0] - shrink(2.0, 1.0)) <= 1e-4);
  CHECK(std::abs(g[1] - shrink(4.0, 1.0)) <= 1e-4);
  CHECK(g == ParamVector({1.0, 2.0}));

  std::vector<ClientReport> two{make_report(0, {4, 0}, 0.1), make_report(1, {0, 4}, 0.1)};
  CHECK(aggregate(two, WeightVector({0.25, 0.75}), 0.0) == ParamVector({1, 3}));

  std::vector<ClientReport> bad{make_report(0, {4, 0}, 0.1), make_report(1, {0}, 0.1)};
  CHECK_THROWS_AS(aggregate(bad, WeightVector::uniform(2), 0.0), InvalidArgument);
}

TEST_CASE("global_loss") {
  std::vector<ClientReport> one{make_report(0, {1.0}, 0.42)};
  CHECK(global_loss(one, WeightVector({1.0}), ParamVector({3.0}), 0.0) == 0.42);

  std::vector<ClientReport> two{make_report(0, {1, 1}, 0.2), make_report(1, {1, 1}, 0.6)};
  CHECK(global_loss(two, WeightVector::uniform(2), ParamVector({0, 0}), 2.0) ==
        doctest::Approx(0.4));
  CHECK(global_loss(two, WeightVector::uniform(2), ParamVector({1, 1}), 1.0) ==
        doctest::Approx(2.4).epsilon(1e-12));
}

TEST_CASE("fedavg_weights") {
  const std::vector<std::size_t> even{5, 5};
  CHECK(fedavg_weights(even).values() == std::vector<double>{0.5, 0.5});
  const std::vector<std::size_t> skew{1, 3};
  CHECK(fedavg_weights(skew).values() == std::vector<double>{0.25, 0.75});
  const std::vector<std::size_t> empty;
  CHECK_THROWS_AS(fedavg_weights(empty), InvalidArgument);
  const std::vector<std::size_t> zero{0, 3};
  CHECK_THROWS_AS(fedavg_weights(zero), InvalidArgument);

  // softmax of ln n_k is n_k / n.
  Rng rng(35);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> n(1 + rng.below(20));
    std::vector<double> e;
    for (auto& x : n) {
      x = 1 + rng.below(5000);
      e.push_back(-std::log(static_cast<double>(x)));
    }
    CHECK(max_abs_diff(weights_closed_form(e, 1.0).values(), fedavg_weights(n).values()) <=
          1e-12);
  }
}

TEST_CASE("meta_agg") {
  MetaParams mp;
  mp.lambda = 0.5;
  std::vector<ClientReport> one{make_report(0, {3.0, -1.5}, 0.4)};
  for (auto mode : {AggregationMode::closed_form, AggregationMode::iterative_mirror,
                    AggregationMode::iterative_projected}) {
    const auto out = meta_agg(one, mp, mode);
    CHECK(out.weights[0] == 1.0);
    CHECK(out.theta_g == ParamVector({2.0, -1.0}));
  }

  mp.lambda = 0.0;
  std::vector<ClientReport> two{make_report(0, {2, 0}, 0.3), make_report(1, {0, 2}, 0.3)};
  for (auto mode : {AggregationMode::closed_form, AggregationMode::iterative_mirror,
                    AggregationMode::iterative_projected}) {
    const auto out = meta_agg(two, mp, mode);
    CHECK(out.weights[0] == doctest::Approx(0.5));
    CHECK(max_abs_diff(out.theta_g.coords(), std::vector<double>{1, 1}) <= 1e-12);
  }

  Rng rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClientReport> cohort;
    for (std::size_t k = 0; k < 5; ++k) {
      cohort.push_back(make_report(k, random_values(rng, 4, -1, 1), rng.uniform(0, 1.5),
                                   1 + rng.below(100)));
    }
    MetaParams m;
    m.alpha = rng.uniform(0.5, 3);
    const auto closed = meta_agg(cohort, m, AggregationMode::closed_form);
    const auto mirror = meta_agg(cohort, m, AggregationMode::iterative_mirror);
    CHECK(max_abs_diff(closed.weights.values(), mirror.weights.values()) <= 1e-6);
    CHECK(max_abs_diff(closed.theta_g.coords(), mirror.theta_g.coords()) <= 1e-6);
    CHECK(closed.solver_iters == 0);
    CHECK(mirror.solver_iters > 0);
    CHECK(std::isfinite(closed.phi_value));
  }
}

TEST_CASE("meta_agg embeds FedAvg") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ClientReport> cohort;
    std::vector<std::size_t> n;
    std::vector<double> e;
    for (std::size_t k = 0; k < 2 + rng.below(10); ++k) {
      n.push_back(1 + rng.below(1000));
      e.push_back(-std::log(static_cast<double>(n.back())));
      cohort.push_back(make_report(k, random_values(rng, 3, -2, 2), 0.5, n.back()));
    }
    MetaParams mp;
    mp.alpha = 1.0;
    const auto out = meta_agg(cohort, e, mp, AggregationMode::closed_form);
    const auto fed = aggregate(cohort, fedavg_weights(n), 0.0);
    CHECK(max_abs_diff(out.theta_g.coords(), fed.coords()) <= 1e-12);
  }
}

TEST_CASE("adapt_meta_params") {
  const ModelSpec spec{1, 0, 2, Activation::relu};
  const auto val = metafl::testing::labels_only({0, 1, 0, 1}, 2);
  std::vector<ClientReport> cohort{make_report(0, {0.1, 0.2, 0.0, 0.0}, 0.3),
                                   make_report(1, {-0.1, 0.4, 0.1, 0.0}, 0.5)};
  MetaParams mp;
  const std::vector<double> single{3.5};
  CHECK(adapt_meta_params(mp, single, cohort, spec, val).alpha == 3.5);

  // Both models have the same loss on val when weights are irrelevant.
  std::vector<ClientReport> twins{make_report(0, {0.1, 0.2, 0.0, 0.0}, 0.3),
                                  make_report(1, {0.1, 0.2, 0.0, 0.0}, 0.5)};
  const std::vector<double> dup{2.0, 7.0, 2.0, 0.5};
  CHECK(adapt_meta_params(mp, dup, twins, spec, val).alpha == 0.5);

  const std::vector<double> empty;
  CHECK_THROWS_AS(adapt_meta_params(mp, empty, cohort, spec, val), InvalidArgument);
}

TEST_CASE("adapt_meta_params down-weights a noisy client when that helps") {
  // Four clean clients and one with 40% label noise; exhaustive evaluation of
  // both candidates is the oracle.
  const ModelSpec spec{4, 0, 3, Activation::relu};
  const auto all = make_blobs(3, 4, 1500, 1.0, 41);
  auto [pool, global_val] = holdout_split(all, 0.2, 1);
  PartitionConfig pc;
  pc.num_clients = 5;
  pc.dirichlet_beta = 100.0;
  pc.noise_clients = {0};
  pc.label_noise_rate = 0.4;
  pc.seed = 2;
  auto clients = partition_dirichlet(pool, pc);
  apply_partition_noise(clients, pc);

  TrainConfig tc;
  tc.epochs = 3;
  tc.learning_rate = 0.2;
  std::vector<ClientReport> cohort;
  const auto theta0 = ParamVector::zeros(spec.param_count());
  for (std::size_t k = 0; k < clients.size(); ++k) {
    const auto theta = train_local(spec, theta0, clients[k].train, tc);
    cohort.push_back({k, theta, evaluate(spec, theta, clients[k].val), {},
                      clients[k].train.size()});
  }
  MetaParams mp;
  const std::vector<double> grid{0.0, 5.0};
  const auto chosen = adapt_meta_params(mp, grid, cohort, spec, global_val);

  auto val_loss = [&](double alpha) {
    MetaParams m;
    m.alpha = alpha;
    return local_loss(spec, meta_agg(cohort, m, AggregationMode::closed_form).theta_g, global_val);
  };
  const double expected = val_loss(5.0) < val_loss(0.0) ? 5.0 : 0.0;
  CHECK(chosen.alpha == expected);
  CHECK(expected == 5.0);
}

TEST_CASE("contraction_estimate") {
  Rng rng(38);
  MetaParams mp;
  mp.tau = 1.0;
  mp.eta = 0.0;
  const std::vector<double> e{0.1, 0.5};
  CHECK(contraction_estimate(e, mp, 100, rng) == 1.0);

  mp.eta = 0.1;
  const std::vector<double> single{0.3};
  CHECK(contraction_estimate(single, mp, 100, rng) == 0.0);

  const double est = contraction_estimate(e, mp, 1000, rng);
  CHECK(est < 1.0);
  CHECK(est == doctest::Approx(0.9).epsilon(1e-6));  // |1 - eta tau|

  // Cross-check against the residual decay of the iterative solver.
  mp.tol = 1e-12;
  const auto r = weights_iterative(e, mp, Solver::mirror);
  for (std::size_t t = 0; t + 1 < r.residuals.size(); ++t) {
    if (r.residuals[t] > 1e-13) CHECK(r.residuals[t + 1] <= r.residuals[t]);
  }
  CHECK_THROWS_AS(contraction_estimate(e, mp, 0, rng), InvalidArgument);
}

TEST_CASE("jensen_gap") {
  const ModelSpec spec{2, 0, 2, Activation::relu};
  const auto data = make_blobs(2, 2, 60, 1.0, 1);
  const ParamVector theta({0.3, -0.2, 0.1, 0.5, 0.0, 0.2});
  const std::vector<ParamVector> same{theta, theta, theta};
  CHECK(jensen_gap(spec, same, WeightVector::uniform(3), data) == 0.0);

  const std::vector<ParamVector> pm{ParamVector({-1.0}), ParamVector({1.0})};
  const double gap = jensen_gap([](std::span<const double> t) { return t[0] * t[0]; }, pm,
                                WeightVector::uniform(2));
  CHECK(gap == 1.0);

  Rng rng(39);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<ParamVector> thetas;
    for (int k = 0; k < 4; ++k) thetas.emplace_back(random_values(rng, 6, -3, 3));
    const auto w = WeightVector(rng.dirichlet(1.0, 4));
    CHECK(jensen_gap(spec, thetas, w, data) >= -1e-9);
  }
}

TEST_CASE("generalization_bound") {
  CHECK(generalization_bound(0.0, 4, 0.0) == 0.5);
  CHECK(generalization_bound(2.0, 16, 0.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(generalization_bound(2.0, 16, 2.0) == doctest::Approx(1.25).epsilon(1e-15));
  double prev = INFINITY;
  for (std::size_t m = 1; m < 1000; m *= 3) {
    const double b = generalization_bound(1.0, m, 0.3);
    CHECK(b < prev);
    prev = b;
  }
  CHECK_THROWS_AS(generalization_bound(1.0, 0, 0.0), InvalidArgument);
}
