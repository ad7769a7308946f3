#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "metafl/dataset.hpp"
#include "metafl/numerics.hpp"

namespace metafl {

enum class Activation { relu, tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Architecture shared by every client in a federation.
/// hidden_dim == 0 is multinomial logistic regression; otherwise one hidden
/// layer. Parameter layout (row-major):
///   linear: W[C x D], b[C]
///   hidden: W1[H x D], b1[H], W2[C x H], b2[C]
struct ModelSpec {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 0;
  std::size_t num_classes = 2;
  Activation activation = Activation::relu;

  std::size_t param_count() const;
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double l2 = 0.0;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct PerformanceMetrics {
  double val_loss = 0.0;      // mean cross-entropy, nats
  double val_accuracy = 0.0;  // top-1, ties go to the lowest class index
  double train_loss = 0.0;
};

/// Scaled-uniform weights (bound 1/sqrt(fan_in)) and zero biases.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

/// Class probabilities for one sample.
std::vector<double> predict_proba(const ModelSpec& spec, const ParamVector& params,
                                  std::span<const double> x);

/// Highest-probability class; ties resolve to the lowest index.
int predict(const ModelSpec& spec, const ParamVector& params, std::span<const double> x);

/// Mean cross-entropy over `data`, in nats.
double local_loss(const ModelSpec& spec, const ParamVector& params, const ClientDataset& data);

/// Mean cross-entropy plus (l2 / 2) * ||params||^2.
double training_objective(const ModelSpec& spec, const ParamVector& params,
                          const ClientDataset& data, double l2);

/// Gradient of training_objective over the whole dataset.
std::vector<double> objective_gradient(const ModelSpec& spec, const ParamVector& params,
                                       const ClientDataset& data, double l2);

/// Seeded mini-batch SGD. Samples are reshuffled every epoch.
ParamVector train_local(const ModelSpec& spec, const ParamVector& params,
                        const ClientDataset& data, const TrainConfig& cfg);

/// Validation loss and accuracy on `data`; train_loss is left at zero.
PerformanceMetrics evaluate(const ModelSpec& spec, const ParamVector& params,
                            const ClientDataset& data);

/// Validation metrics on `val` plus the loss on `train`.
PerformanceMetrics evaluate(const ModelSpec& spec, const ParamVector& params,
                            const ClientDataset& train, const ClientDataset& val);

}  // namespace metafl
