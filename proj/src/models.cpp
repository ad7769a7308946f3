#include "metafl/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "metafl/error.hpp"
#include "metafl/rng.hpp"

namespace metafl {
namespace {

// Offsets of each parameter block inside the flat vector.
struct Layout {
  std::size_t d, h, c;
  std::size_t w1, b1, w2, b2, total;

  explicit Layout(const ModelSpec& s) : d(s.input_dim), h(s.hidden_dim), c(s.num_classes) {
    if (h == 0) {
      w1 = b1 = 0;
      w2 = 0;
      b2 = c * d;
      total = c * d + c;
    } else {
      w1 = 0;
      b1 = h * d;
      w2 = b1 + h;
      b2 = w2 + c * h;
      total = b2 + c;
    }
  }
};

double activate(Activation a, double x) {
  return a == Activation::relu ? std::max(x, 0.0) : std::tanh(x);
}

// Derivative expressed through the activation output.
double activate_grad(Activation a, double pre, double out) {
  if (a == Activation::relu) return pre > 0.0 ? 1.0 : 0.0;
  return 1.0 - out * out;
}

void check_shapes(const ModelSpec& spec, const ParamVector& params, const ClientDataset& data) {
  spec.validate();
  const Layout layout(spec);
  if (params.dim() != layout.total) {
    throw InvalidArgument("parameter vector has dim " + std::to_string(params.dim()) +
                          ", model expects " + std::to_string(layout.total));
  }
  if (data.dim() != spec.input_dim) {
    throw InvalidArgument("dataset feature dim " + std::to_string(data.dim()) +
                          " does not match model input_dim " + std::to_string(spec.input_dim));
  }
  if (data.num_classes() != spec.num_classes) {
    throw InvalidArgument("dataset has " + std::to_string(data.num_classes()) +
                          " classes, model expects " + std::to_string(spec.num_classes));
  }
}

// Scratch buffers for one forward/backward pass.
struct Workspace {
  std::vector<double> pre, hidden, logits, probs, delta_hidden;
  explicit Workspace(const Layout& l) : pre(l.h), hidden(l.h), logits(l.c), probs(l.c),
                                        delta_hidden(l.h) {}
};

// Fills ws.logits / ws.probs; returns log-sum-exp of the logits.
double forward(const ModelSpec& spec, const Layout& l, std::span<const double> theta,
               std::span<const double> x, Workspace& ws) {
  std::span<const double> input = x;
  std::size_t in_dim = l.d;
  std::size_t w_out = l.w2;
  if (l.h > 0) {
    for (std::size_t j = 0; j < l.h; ++j) {
      double z = theta[l.b1 + j];
      const double* row = theta.data() + l.w1 + j * l.d;
      for (std::size_t i = 0; i < l.d; ++i) z += row[i] * x[i];
      ws.pre[j] = z;
      ws.hidden[j] = activate(spec.activation, z);
    }
    input = ws.hidden;
    in_dim = l.h;
  }
  for (std::size_t c = 0; c < l.c; ++c) {
    double z = theta[l.b2 + c];
    const double* row = theta.data() + w_out + c * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) z += row[i] * input[i];
    ws.logits[c] = z;
  }
  const double top = *std::max_element(ws.logits.begin(), ws.logits.end());
  double total = 0.0;
  for (std::size_t c = 0; c < l.c; ++c) {
    ws.probs[c] = std::exp(ws.logits[c] - top);
    total += ws.probs[c];
  }
  for (double& p : ws.probs) p /= total;
  return top + std::log(total);
}

// Adds the cross-entropy gradient of one sample into `grad`; returns its loss.
double accumulate_sample(const ModelSpec& spec, const Layout& l, std::span<const double> theta,
                         std::span<const double> x, int y, Workspace& ws,
                         std::vector<double>& grad) {
  const double lse = forward(spec, l, theta, x, ws);
  const double loss = lse - ws.logits[static_cast<std::size_t>(y)];

  std::span<const double> input = x;
  std::size_t in_dim = l.d;
  if (l.h > 0) {
    input = ws.hidden;
    in_dim = l.h;
    std::fill(ws.delta_hidden.begin(), ws.delta_hidden.end(), 0.0);
  }
  for (std::size_t c = 0; c < l.c; ++c) {
    const double delta = ws.probs[c] - (static_cast<int>(c) == y ? 1.0 : 0.0);
    grad[l.b2 + c] += delta;
    double* grow = grad.data() + l.w2 + c * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) grow[i] += delta * input[i];
    if (l.h > 0) {
      const double* wrow = theta.data() + l.w2 + c * in_dim;
      for (std::size_t j = 0; j < l.h; ++j) ws.delta_hidden[j] += delta * wrow[j];
    }
  }
  if (l.h > 0) {
    for (std::size_t j = 0; j < l.h; ++j) {
      const double dz = ws.delta_hidden[j] * activate_grad(spec.activation, ws.pre[j],
                                                           ws.hidden[j]);
      if (dz == 0.0) continue;
      grad[l.b1 + j] += dz;
      double* grow = grad.data() + l.w1 + j * l.d;
      for (std::size_t i = 0; i < l.d; ++i) grow[i] += dz * x[i];
    }
  }
  return loss;
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

std::size_t ModelSpec::param_count() const { return Layout(*this).total; }

void ModelSpec::validate() const {
  if (input_dim < 1) throw InvalidArgument("model input_dim must be >= 1");
  if (num_classes < 2) throw InvalidArgument("model num_classes must be >= 2");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be positive");
  }
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw InvalidArgument("l2 must be non-negative");
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Layout l(spec);
  Rng rng(seed);
  std::vector<double> theta(l.total, 0.0);
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) theta[offset + i] = rng.uniform(-bound, bound);
  };
  if (l.h > 0) {
    fill(l.w1, l.h * l.d, l.d);
    fill(l.w2, l.c * l.h, l.h);
  } else {
    fill(l.w2, l.c * l.d, l.d);
  }
  return ParamVector(std::move(theta));
}

std::vector<double> predict_proba(const ModelSpec& spec, const ParamVector& params,
                                  std::span<const double> x) {
  spec.validate();
  const Layout l(spec);
  if (params.dim() != l.total || x.size() != l.d) {
    throw InvalidArgument("predict_proba: shape mismatch");
  }
  Workspace ws(l);
  forward(spec, l, params.coords(), x, ws);
  return ws.probs;
}

int predict(const ModelSpec& spec, const ParamVector& params, std::span<const double> x) {
  const auto probs = predict_proba(spec, params, x);
  // max_element returns the first maximum, i.e. the lowest index on ties.
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

PerformanceMetrics evaluate(const ModelSpec& spec, const ParamVector& params,
                            const ClientDataset& data) {
  check_shapes(spec, params, data);
  const Layout l(spec);
  Workspace ws(l);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double lse = forward(spec, l, params.coords(), data.row(i), ws);
    const auto y = static_cast<std::size_t>(data.label(i));
    loss += lse - ws.logits[y];
    const auto best = static_cast<std::size_t>(
        std::max_element(ws.logits.begin(), ws.logits.end()) - ws.logits.begin());
    if (best == y) ++correct;
  }
  const double n = static_cast<double>(data.size());
  PerformanceMetrics m;
  m.val_loss = loss / n;
  m.val_accuracy = static_cast<double>(correct) / n;
  if (!std::isfinite(m.val_loss)) throw NumericalError("evaluate: non-finite loss");
  return m;
}

PerformanceMetrics evaluate(const ModelSpec& spec, const ParamVector& params,
                            const ClientDataset& train, const ClientDataset& val) {
  PerformanceMetrics m = evaluate(spec, params, val);
  m.train_loss = local_loss(spec, params, train);
  return m;
}

double local_loss(const ModelSpec& spec, const ParamVector& params, const ClientDataset& data) {
  return evaluate(spec, params, data).val_loss;
}

double training_objective(const ModelSpec& spec, const ParamVector& params,
                          const ClientDataset& data, double l2) {
  return local_loss(spec, params, data) + 0.5 * l2 * params.squared_norm();
}

std::vector<double> objective_gradient(const ModelSpec& spec, const ParamVector& params,
                                       const ClientDataset& data, double l2) {
  check_shapes(spec, params, data);
  const Layout l(spec);
  Workspace ws(l);
  std::vector<double> grad(l.total, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    accumulate_sample(spec, l, params.coords(), data.row(i), data.label(i), ws, grad);
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = grad[i] * inv_n + l2 * params[i];
  return grad;
}

ParamVector train_local(const ModelSpec& spec, const ParamVector& params,
                        const ClientDataset& data, const TrainConfig& cfg) {
  check_shapes(spec, params, data);
  cfg.validate();
  if (cfg.epochs == 0) return params;

  const Layout l(spec);
  Workspace ws(l);
  Rng rng(cfg.seed);
  std::vector<double> theta = params.values();
  std::vector<double> grad(l.total);
  std::vector<std::size_t> order(data.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        accumulate_sample(spec, l, theta, data.row(order[b]), data.label(order[b]), ws, grad);
      }
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] -= cfg.learning_rate * (grad[i] * inv_b + cfg.l2 * theta[i]);
      }
    }
  }
  for (double t : theta) {
    if (!std::isfinite(t)) throw NumericalError("train_local: parameters diverged");
  }
  return ParamVector(std::move(theta));
}

}  // namespace metafl
