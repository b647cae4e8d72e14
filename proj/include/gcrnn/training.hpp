#pragma once

// Losses, ADAM and the full-sequence BPTT training loop.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "gcrnn/autodiff.hpp"
#include "gcrnn/errors.hpp"
#include "gcrnn/model.hpp"
#include "gcrnn/processgen.hpp"

namespace gcrnn {

enum class LossKind { l1, cross_entropy };

inline std::string to_string(LossKind k) { return k == LossKind::l1 ? "l1" : "cross_entropy"; }

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "l1") return LossKind::l1;
  if (s == "cross_entropy") return LossKind::cross_entropy;
  throw InvalidArgument("unknown loss '" + s + "' (expected l1 | cross_entropy)");
}

enum class Metric { mae, accuracy };

inline std::string to_string(Metric m) { return m == Metric::mae ? "mae" : "accuracy"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "mae") return Metric::mae;
  if (s == "accuracy") return Metric::accuracy;
  throw InvalidArgument("unknown metric '" + s + "' (expected mae | accuracy)");
}

/// Mean absolute error over all entries of equally shaped sequences.
inline double l1_loss(const std::vector<Matrix>& predicted, const std::vector<Matrix>& target) {
  detail::require(predicted.size() == target.size() && !predicted.empty(), "l1_loss: sequence lengths differ");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    detail::require(predicted[t].rows() == target[t].rows() && predicted[t].cols() == target[t].cols(),
                    "l1_loss: shape mismatch at step " + std::to_string(t));
    total += (predicted[t] - target[t]).cwiseAbs().sum();
    count += static_cast<std::size_t>(predicted[t].size());
  }
  return total / static_cast<double>(count);
}

/// -log softmax(logits)[label], stabilized by subtracting the maximum logit.
inline double cross_entropy_loss(const Vector& logits, std::size_t label) {
  detail::require(label < static_cast<std::size_t>(logits.size()),
                  "cross_entropy_loss: label " + std::to_string(label) + " out of range");
  const double m = logits.maxCoeff();
  return std::log((logits.array() - m).exp().sum()) - (logits(static_cast<Eigen::Index>(label)) - m);
}

/// ADAM with bias correction.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

inline void adam_step(AdamState& state, const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  detail::require(grads.size() == params.size(), "adam_step: " + std::to_string(params.size()) + " parameters but " +
                                                      std::to_string(grads.size()) + " gradients");
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  detail::require(state.first_moment.size() == params.size(), "adam_step: parameter set changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i)
    detail::require(grads[i].shape() == params[i]->shape(), "adam_step: gradient " + std::to_string(i) +
                                                                " has shape " + shape_string(grads[i].shape()) +
                                                                ", parameter has " + shape_string(params[i]->shape()));

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i].matrix();
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    params[i]->matrix().array() -=
        state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  }
}

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  LossKind loss = LossKind::l1;
  std::size_t eval_every = 1;  // validation cadence in epochs; the last epoch is always evaluated
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(batch_size > 0, "TrainConfig: batch_size must be positive");
    detail::require(learning_rate > 0.0 && std::isfinite(learning_rate), "TrainConfig: learning_rate must be positive");
    detail::require(eval_every > 0, "TrainConfig: eval_every must be positive");
  }
};

/// Recorded loss of one sample: L1 over the prediction horizon or
/// cross-entropy of the node logits.
inline ad::Var sample_loss(ad::Tape& tape, const Network& net, const Gso& gso, const Sample& sample, LossKind loss) {
  std::vector<ad::Var> out = forward(tape, net, gso, sample.inputs);
  if (loss == LossKind::cross_entropy) {
    detail::require(sample.label.has_value(), "sample_loss: cross-entropy needs labelled samples");
    return ad::softmax_cross_entropy(out.back(), *sample.label);
  }
  detail::require(!sample.targets.empty(), "sample_loss: L1 loss needs target sequences");
  if (!net.recurrent()) return ad::mean_abs(out.front(), tape.constant(stack_sequence(sample.targets)));
  detail::require(out.size() == sample.targets.size(), "sample_loss: model emits " + std::to_string(out.size()) +
                                                           " steps, sample has " +
                                                           std::to_string(sample.targets.size()) + " targets");
  ad::Var total = ad::mean_abs(out[0], tape.constant(sample.targets[0]));
  for (std::size_t t = 1; t < out.size(); ++t) total = ad::add(total, ad::mean_abs(out[t], tape.constant(sample.targets[t])));
  return ad::scale(total, 1.0 / static_cast<double>(out.size()));
}

/// Node logits (classification) or per-step predictions (regression) without recording gradients.
inline std::vector<Matrix> predict(const Network& net, const Gso& gso, const Sample& sample) {
  ad::Tape tape(false);
  std::vector<Matrix> out;
  for (const ad::Var& v : forward(tape, net, gso, sample.inputs)) out.push_back(v.matrix());
  if (!net.recurrent() && net.spec.task == Task::regression) {
    const Matrix block = out.front();
    const auto g = static_cast<Eigen::Index>(net.spec.out_features);
    out.clear();
    for (Eigen::Index t = 0; t < block.cols() / g; ++t) out.push_back(block.middleCols(t * g, g));
  }
  return out;
}

inline std::size_t argmax(const Matrix& logits) {
  Eigen::Index best = 0;
  const double* d = logits.data();
  for (Eigen::Index i = 1; i < logits.size(); ++i)
    if (d[i] > d[best]) best = i;
  return static_cast<std::size_t>(best);
}

inline void check_compatible(const Network& net, const ProcessDataset& ds) {
  const NetworkSpec& s = net.spec;
  detail::require(s.n_nodes == ds.n_nodes(), "model expects " + std::to_string(s.n_nodes) + " nodes, dataset has " +
                                                 std::to_string(ds.n_nodes()));
  detail::require(s.task == ds.meta.task, "model task " + to_string(s.task) + " vs dataset task " + to_string(ds.meta.task));
  detail::require(s.in_features == ds.meta.in_features, "model expects " + std::to_string(s.in_features) +
                                                            " input features, dataset has " +
                                                            std::to_string(ds.meta.in_features));
  detail::require(s.t_in == ds.meta.t_in || s.architecture != Architecture::gnn_baseline,
                  "baseline model expects input length " + std::to_string(s.t_in) + ", dataset has " +
                      std::to_string(ds.meta.t_in));
  if (s.task == Task::regression)
    detail::require(s.t_out == ds.meta.t_out && s.out_features == ds.meta.out_features,
                    "model predicts " + std::to_string(s.t_out) + " x " + std::to_string(s.out_features) +
                        " outputs, dataset targets are " + std::to_string(ds.meta.t_out) + " x " +
                        std::to_string(ds.meta.out_features));
}

/// mae: mean L1 over the split. accuracy: fraction of argmax(logits) == label.
inline double evaluate(const Network& net, const ProcessDataset& ds, Split split, Metric metric) {
  const auto& idx = ds.split(split);
  detail::require(!idx.empty(), "evaluate: split '" + to_string(split) + "' is empty");
  double total = 0.0;
  for (auto i : idx) {
    const Sample& s = ds.samples[i];
    std::vector<Matrix> out = predict(net, ds.gso, s);
    if (metric == Metric::mae) {
      detail::require(!s.targets.empty(), "evaluate: mae needs target sequences");
      total += l1_loss(out, s.targets);
    } else {
      detail::require(s.label.has_value(), "evaluate: accuracy needs labelled samples");
      total += argmax(out.back()) == *s.label ? 1.0 : 0.0;
    }
  }
  return total / static_cast<double>(idx.size());
}

/// Mean training-objective value over a split (used for validation).
inline double mean_loss(const Network& net, const ProcessDataset& ds, Split split, LossKind loss) {
  const auto& idx = ds.split(split);
  detail::require(!idx.empty(), "mean_loss: split '" + to_string(split) + "' is empty");
  double total = 0.0;
  for (auto i : idx) {
    ad::Tape tape(false);
    total += sample_loss(tape, net, ds.gso, ds.samples[i], loss).value().item();
  }
  return total / static_cast<double>(idx.size());
}

struct EpochRecord {
  std::size_t epoch;  // 1-based
  double train_loss;
  double val_loss;  // NaN when the epoch was not evaluated
  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  Network model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
};

/// Per-batch gradient of the mean sample loss, accumulated in sample order.
inline double batch_gradient(const Network& net, const ProcessDataset& ds, const std::vector<std::size_t>& batch,
                             LossKind loss, std::vector<Tensor>& grads) {
  const auto params = parameter_tensors(net);
  grads.clear();
  for (const Tensor* p : params) grads.emplace_back(p->shape());
  double total = 0.0;
  ad::Tape tape;
  for (auto i : batch) {
    tape.reset();
    for (const Tensor* p : params) tape.parameter(*p);
    ad::Var l = sample_loss(tape, net, ds.gso, ds.samples[i], loss);
    total += l.value().item();
    ad::Gradients g = tape.backward(l);
    for (std::size_t k = 0; k < params.size(); ++k) grads[k].matrix() += g.at(k).matrix();
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grads) g.matrix() *= inv;
  return total * inv;
}

/// Mini-batch ADAM over the training split with per-epoch seeded Fisher-Yates
/// shuffling; returns the parameters of the epoch with the lowest validation loss.
inline TrainResult train(const Network& initial, const ProcessDataset& ds, const TrainConfig& config) {
  config.validate();
  check_compatible(initial, ds);
  TrainResult result{initial, {}, 0};
  if (config.epochs == 0) return result;
  detail::require(!ds.train.empty() && !ds.validation.empty(), "train: training and validation splits must be nonempty");

  Network net = initial;
  std::vector<Tensor*> params;
  for (auto& p : parameters(net)) params.push_back(p.tensor);
  AdamState adam;
  adam.learning_rate = config.learning_rate;

  std::vector<std::size_t> order = ds.train;
  std::mt19937_64 rng(config.seed);
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> grads;
  std::size_t batch_index = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + config.batch_size)));
      double l = 0.0;
      try {
        l = batch_gradient(net, ds, batch, config.loss, grads);
      } catch (const NumericalError& e) {
        throw NumericalError("train: numerical failure in batch " + std::to_string(batch_index) + " (epoch " +
                             std::to_string(epoch) + "): " + e.what());
      }
      if (!std::isfinite(l))
        throw NumericalError("train: non-finite loss in batch " + std::to_string(batch_index) + " (epoch " +
                             std::to_string(epoch) + ")");
      adam_step(adam, params, grads);
      epoch_loss += l;
      ++n_batches;
    }

    double val = std::numeric_limits<double>::quiet_NaN();
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      val = mean_loss(net, ds, Split::validation, config.loss);
      if (val < best_val) {
        best_val = val;
        result.model = net;
        result.best_epoch = epoch;
      }
    }
    result.history.push_back({epoch, epoch_loss / static_cast<double>(n_batches), val});
  }
  return result;
}

inline void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history) {
  os << "epoch,train_loss,val_loss\n" << std::setprecision(17);
  for (const auto& r : history) {
    os << r.epoch << ',' << r.train_loss << ',';
    if (!std::isnan(r.val_loss)) os << r.val_loss;
    os << '\n';
  }
}

}  // namespace gcrnn
