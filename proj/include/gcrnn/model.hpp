#pragma once

// Graph convolutional recurrent cells, time gates, readout heads and the
// non-recurrent GNN baseline, plus parameter accounting and initialization.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gcrnn/autodiff.hpp"
#include "gcrnn/errors.hpp"
#include "gcrnn/filter_bank.hpp"
#include "gcrnn/graph.hpp"
#include "gcrnn/tensor.hpp"

namespace gcrnn {

enum class Activation { identity, relu, tanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    default: return "tanh";
  }
}

inline Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + s + "'");
}

inline ad::Var activate(ad::Var x, Activation a) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return ad::relu(x);
    default: return ad::tanh(x);
  }
}

/// Recurrent cell H_t = tanh(A(S) X_t + B(S) H_{t-1}).
struct GcrnnCell {
  FilterBank input_bank;  // K x D x F
  FilterBank state_bank;  // K x D x D

  static GcrnnCell zeros(std::size_t k, std::size_t in_features, std::size_t state_features) {
    return {FilterBank::zeros(k, state_features, in_features), FilterBank::zeros(k, state_features, state_features)};
  }

  std::size_t in_features() const { return input_bank.in_features(); }
  std::size_t state_features() const { return input_bank.out_features(); }
  std::size_t n_taps() const { return input_bank.n_taps(); }
  std::size_t parameter_count() const { return input_bank.parameter_count() + state_bank.parameter_count(); }
};

/// Scalar time gate: its own recurrent cell over the inputs followed by a
/// sigmoid of a learned projection of the flattened N x U gate state.
struct GateUnit {
  GcrnnCell cell;
  /// Length N*U; entry u*N + i weighs state value M(i, u).
  Tensor projection;

  static GateUnit zeros(std::size_t n_nodes, std::size_t k, std::size_t in_features, std::size_t gate_features) {
    return {GcrnnCell::zeros(k, in_features, gate_features), Tensor(Shape{n_nodes * gate_features})};
  }

  std::size_t state_features() const { return cell.state_features(); }
  std::size_t parameter_count() const { return cell.parameter_count() + projection.numel(); }
};

struct GatePair {
  GateUnit input;
  GateUnit forget;
};

enum class ReadoutKind { lsigf, gnn, local_mlp };

inline std::string to_string(ReadoutKind k) {
  switch (k) {
    case ReadoutKind::lsigf: return "lsigf";
    case ReadoutKind::gnn: return "gnn";
    default: return "local_mlp";
  }
}

inline ReadoutKind parse_readout_kind(const std::string& s) {
  if (s == "lsigf") return ReadoutKind::lsigf;
  if (s == "gnn") return ReadoutKind::gnn;
  if (s == "local_mlp") return ReadoutKind::local_mlp;
  throw InvalidArgument("unknown readout kind '" + s + "'");
}

/// Maps a state H (N x D) to node outputs (N x G).
///
/// lsigf:     rho(C(S) H) with a single bank.
/// gnn:       filter-bank layers with ReLU between them, an optional per-node
///            dense map after the last layer, then rho.
/// local_mlp: rho(H C^T), the same G x D matrix at every node.
struct ReadoutHead {
  ReadoutKind kind = ReadoutKind::gnn;
  std::vector<FilterBank> layers;
  std::optional<Tensor> dense;  // G x D_last
  Activation output = Activation::identity;

  std::size_t in_features() const {
    return layers.empty() ? dense->shape()[1] : layers.front().in_features();
  }
  std::size_t out_features() const {
    if (dense) return dense->shape()[0];
    return layers.back().out_features();
  }
  std::size_t filter_parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
  }
  std::size_t dense_parameter_count() const { return dense ? dense->numel() : 0; }
  std::size_t parameter_count() const { return filter_parameter_count() + dense_parameter_count(); }
};

enum class ReadoutMode { per_step, final_step };

/// Recurrent model: one cell shared across time, optional gates, one readout.
struct GcrnnModel {
  std::size_t n_nodes = 0;
  GcrnnCell cell;
  std::optional<GatePair> gates;
  ReadoutHead readout;
  ReadoutMode mode = ReadoutMode::per_step;

  bool gated() const noexcept { return gates.has_value(); }
};

/// Non-recurrent GNN that stacks the T input signals as T*F features of a
/// single graph signal. With `pool_features` the last layer is followed by a
/// ReLU and a parameter-free average over features, giving one logit per node.
struct GnnBaseline {
  std::size_t n_nodes = 0;
  std::size_t sequence_length = 0;
  std::vector<FilterBank> layers;
  bool pool_features = false;
};

// ------------------------------------------------------------------ recorded steps

namespace detail {

inline void require_shape(const ad::Var& v, Eigen::Index rows, Eigen::Index cols, const char* what) {
  require(v.matrix().rows() == rows && v.matrix().cols() == cols,
          std::string(what) + ": expected " + std::to_string(rows) + " x " + std::to_string(cols) + ", got " +
              shape_string(v.shape()));
}

/// s = sum_u sum_i w[u*N + i] * M(i, u).
inline ad::Var project_columns(ad::Var w, ad::Var m) {
  const Matrix& mm = m.matrix();
  const auto n = mm.rows();
  const auto u = mm.cols();
  require(static_cast<Eigen::Index>(w.value().numel()) == n * u,
          "gate projection: expected " + std::to_string(n * u) + " weights, got " + std::to_string(w.value().numel()));
  Eigen::Map<const Matrix> wm(w.value().data(), u, n);  // row u holds the weights of state column u
  double s = wm.cwiseProduct(mm.transpose()).sum();
  return w.tape->record(Tensor::scalar(s), {w, m}, [w, m](ad::Tape& t, const Matrix& g) {
    const Matrix& mv = m.matrix();
    const double gs = g(0, 0);
    if (t.needs_grad(w)) {
      Matrix dw = mv.transpose() * gs;  // u x n, flat order u*N + i
      t.accumulate(w, Eigen::Map<const Matrix>(dw.data(), static_cast<Eigen::Index>(dw.size()), 1));
    }
    if (t.needs_grad(m)) {
      Eigen::Map<const Matrix> wv(w.value().data(), mv.cols(), mv.rows());
      t.accumulate(m, wv.transpose() * gs);
    }
  }, "project_columns");
}

}  // namespace detail

inline ad::Var gcrnn_step(ad::Tape& tape, const GcrnnCell& cell, const Gso& gso, ad::Var x, ad::Var h_prev) {
  const auto n = static_cast<Eigen::Index>(gso.n_nodes());
  detail::require_shape(x, n, static_cast<Eigen::Index>(cell.in_features()), "gcrnn_step input");
  detail::require_shape(h_prev, n, static_cast<Eigen::Index>(cell.state_features()), "gcrnn_step state");
  ad::Var ax = apply_filterbank(tape.parameter(cell.input_bank.taps), gso, x);
  ad::Var bh = apply_filterbank(tape.parameter(cell.state_bank.taps), gso, h_prev);
  return ad::tanh(ad::add(ax, bh));
}

struct GateOutput {
  ad::Var state;
  ad::Var value;
};

inline GateOutput gate_step(ad::Tape& tape, const GateUnit& gate, const Gso& gso, ad::Var x, ad::Var m_prev) {
  ad::Var m = gcrnn_step(tape, gate.cell, gso, x, m_prev);
  ad::Var value = ad::sigmoid(detail::project_columns(tape.parameter(gate.projection), m));
  return {m, value};
}

/// Pins gate values instead of computing them.
struct GateOverride {
  std::optional<double> input;
  std::optional<double> forget;
};

struct GatedStep {
  ad::Var state;
  ad::Var input_gate_state;
  ad::Var forget_gate_state;
  ad::Var alpha;
  ad::Var beta;
};

inline GatedStep ggcrnn_step(ad::Tape& tape, const GcrnnModel& model, const Gso& gso, ad::Var x, ad::Var h_prev,
                             ad::Var m_input_prev, ad::Var m_forget_prev, const GateOverride& override_gates = {}) {
  detail::require(model.gated(), "ggcrnn_step: model has no gates");
  const GcrnnCell& cell = model.cell;
  const auto n = static_cast<Eigen::Index>(gso.n_nodes());
  detail::require_shape(x, n, static_cast<Eigen::Index>(cell.in_features()), "ggcrnn_step input");
  detail::require_shape(h_prev, n, static_cast<Eigen::Index>(cell.state_features()), "ggcrnn_step state");

  GateOutput in = gate_step(tape, model.gates->input, gso, x, m_input_prev);
  GateOutput fg = gate_step(tape, model.gates->forget, gso, x, m_forget_prev);
  ad::Var alpha = override_gates.input ? tape.constant(Tensor::scalar(*override_gates.input)) : in.value;
  ad::Var beta = override_gates.forget ? tape.constant(Tensor::scalar(*override_gates.forget)) : fg.value;

  ad::Var ax = apply_filterbank(tape.parameter(cell.input_bank.taps), gso, x);
  ad::Var bh = apply_filterbank(tape.parameter(cell.state_bank.taps), gso, h_prev);
  ad::Var h = ad::tanh(ad::add(ad::scale_by(ax, alpha), ad::scale_by(bh, beta)));
  return {h, in.state, fg.state, alpha, beta};
}

inline ad::Var apply_readout(ad::Tape& tape, const ReadoutHead& head, const Gso& gso, ad::Var h) {
  detail::require(static_cast<std::size_t>(h.matrix().cols()) == head.in_features(),
                  "apply_readout: state has " + std::to_string(h.matrix().cols()) + " features, head expects " +
                      std::to_string(head.in_features()));
  ad::Var y = h;
  switch (head.kind) {
    case ReadoutKind::local_mlp:
      y = ad::matmul(y, ad::transpose(tape.parameter(*head.dense)));
      break;
    case ReadoutKind::lsigf:
    case ReadoutKind::gnn:
      for (std::size_t i = 0; i < head.layers.size(); ++i) {
        if (i > 0) y = ad::relu(y);
        y = apply_filterbank(tape.parameter(head.layers[i].taps), gso, y);
      }
      if (head.dense) y = ad::matmul(y, ad::transpose(tape.parameter(*head.dense)));
      break;
  }
  return activate(y, head.output);
}

/// Runs the model from zero initial states. per_step returns one output per
/// input step; final_step returns the readout of the last state only.
inline std::vector<ad::Var> run_sequence(ad::Tape& tape, const GcrnnModel& model, const Gso& gso,
                                         const std::vector<Matrix>& sequence, const GateOverride& override_gates = {}) {
  detail::require(!sequence.empty(), "run_sequence: empty input sequence");
  detail::require(gso.n_nodes() == model.n_nodes, "run_sequence: GSO has " + std::to_string(gso.n_nodes()) +
                                                      " nodes, model expects " + std::to_string(model.n_nodes));
  const auto n = static_cast<Eigen::Index>(model.n_nodes);
  const auto d = static_cast<Eigen::Index>(model.cell.state_features());
  ad::Var h = tape.constant(Matrix::Zero(n, d));
  std::optional<ad::Var> m_in, m_fg;
  if (model.gated()) {
    m_in = tape.constant(Matrix::Zero(n, static_cast<Eigen::Index>(model.gates->input.state_features())));
    m_fg = tape.constant(Matrix::Zero(n, static_cast<Eigen::Index>(model.gates->forget.state_features())));
  }

  std::vector<ad::Var> outputs;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    ad::Var x = tape.constant(sequence[t]);
    if (model.gated()) {
      GatedStep step = ggcrnn_step(tape, model, gso, x, h, *m_in, *m_fg, override_gates);
      h = step.state;
      m_in = step.input_gate_state;
      m_fg = step.forget_gate_state;
    } else {
      h = gcrnn_step(tape, model.cell, gso, x, h);
    }
    if (model.mode == ReadoutMode::per_step) outputs.push_back(apply_readout(tape, model.readout, gso, h));
  }
  if (model.mode == ReadoutMode::final_step) outputs.push_back(apply_readout(tape, model.readout, gso, h));
  return outputs;
}

/// Stacks the sequence column-wise: column t*F + f holds feature f at step t.
inline Matrix stack_sequence(const std::vector<Matrix>& sequence) {
  detail::require(!sequence.empty(), "stack_sequence: empty input sequence");
  const Eigen::Index n = sequence.front().rows();
  const Eigen::Index f = sequence.front().cols();
  Matrix out(n, f * static_cast<Eigen::Index>(sequence.size()));
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    detail::require(sequence[t].rows() == n && sequence[t].cols() == f, "stack_sequence: ragged sequence");
    out.middleCols(static_cast<Eigen::Index>(t) * f, f) = sequence[t];
  }
  return out;
}

inline ad::Var run_baseline(ad::Tape& tape, const GnnBaseline& model, const Gso& gso,
                            const std::vector<Matrix>& sequence) {
  detail::require(sequence.size() == model.sequence_length,
                  "run_baseline: sequence length " + std::to_string(sequence.size()) + " but model expects " +
                      std::to_string(model.sequence_length));
  ad::Var y = tape.constant(stack_sequence(sequence));
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (i > 0) y = ad::relu(y);
    y = apply_filterbank(tape.parameter(model.layers[i].taps), gso, y);
  }
  if (model.pool_features) {
    const auto g = y.matrix().cols();
    y = ad::matmul(ad::relu(y), tape.constant(Matrix::Constant(g, 1, 1.0 / static_cast<double>(g))));
  }
  return y;
}

// ------------------------------------------------------------------ networks

enum class Architecture { gnn_baseline, gcrnn_gnn, ggcrnn_gnn, gcrnn_localmlp, ggcrnn_localmlp };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::gnn_baseline: return "gnn_baseline";
    case Architecture::gcrnn_gnn: return "gcrnn_gnn";
    case Architecture::ggcrnn_gnn: return "ggcrnn_gnn";
    case Architecture::gcrnn_localmlp: return "gcrnn_localmlp";
    default: return "ggcrnn_localmlp";
  }
}

inline Architecture parse_architecture(const std::string& s) {
  for (auto a : {Architecture::gnn_baseline, Architecture::gcrnn_gnn, Architecture::ggcrnn_gnn,
                 Architecture::gcrnn_localmlp, Architecture::ggcrnn_localmlp})
    if (to_string(a) == s) return a;
  throw InvalidArgument("unknown architecture '" + s +
                        "' (expected gnn_baseline | gcrnn_gnn | ggcrnn_gnn | gcrnn_localmlp | ggcrnn_localmlp)");
}

enum class Task { regression, classification };

inline std::string to_string(Task t) { return t == Task::regression ? "regression" : "classification"; }

inline Task parse_task(const std::string& s) {
  if (s == "regression") return Task::regression;
  if (s == "classification") return Task::classification;
  throw InvalidArgument("unknown task '" + s + "'");
}

/// Everything needed to assemble a network for a dataset.
struct NetworkSpec {
  Architecture architecture = Architecture::gcrnn_gnn;
  Task task = Task::regression;
  std::size_t n_nodes = 0;
  std::size_t in_features = 1;   // F
  std::size_t out_features = 1;  // G per output step (regression)
  std::size_t t_in = 1;
  std::size_t t_out = 1;
  std::size_t state_features = 10;  // D
  std::size_t gate_features = 0;    // U = V; 0 means D
  std::size_t taps = 4;             // K
  std::size_t baseline_hidden = 0;  // 0 picks the width matching gcrnn_gnn's parameter count
};

struct Network {
  NetworkSpec spec;
  std::variant<GcrnnModel, GnnBaseline> body;

  bool recurrent() const noexcept { return std::holds_alternative<GcrnnModel>(body); }
  const GcrnnModel& gcrnn() const { return std::get<GcrnnModel>(body); }
  GcrnnModel& gcrnn() { return std::get<GcrnnModel>(body); }
  const GnnBaseline& baseline() const { return std::get<GnnBaseline>(body); }
  GnnBaseline& baseline() { return std::get<GnnBaseline>(body); }
};

/// Hidden width of the regression baseline so that its two layers hold as
/// many taps as the recurrent model with a one-layer GNN readout.
inline std::size_t matched_baseline_hidden(const NetworkSpec& s) {
  const std::size_t d = s.state_features, f = s.in_features, g = s.out_features, k = s.taps;
  const std::size_t target = d * f * k + d * d * k + d * g * k;
  const std::size_t per_unit = k * (s.t_in * f + s.t_out * g);
  std::size_t h = (target + per_unit / 2) / per_unit;
  return h == 0 ? 1 : h;
}

inline Network make_network(const NetworkSpec& spec) {
  detail::require(spec.n_nodes > 0, "make_network: n_nodes must be positive");
  detail::require(spec.taps > 0 && spec.state_features > 0 && spec.in_features > 0 && spec.out_features > 0,
                  "make_network: taps, features and state width must be positive");
  detail::require(spec.t_in > 0 && spec.t_out > 0, "make_network: sequence lengths must be positive");
  const std::size_t k = spec.taps, f = spec.in_features, g = spec.out_features, d = spec.state_features;
  const bool classify = spec.task == Task::classification;

  if (spec.architecture == Architecture::gnn_baseline) {
    GnnBaseline b;
    b.n_nodes = spec.n_nodes;
    b.sequence_length = spec.t_in;
    const std::size_t in = spec.t_in * f;
    if (classify) {
      b.layers.push_back(FilterBank::zeros(k, in + 2, in));
      b.pool_features = true;
    } else {
      std::size_t h = spec.baseline_hidden ? spec.baseline_hidden : matched_baseline_hidden(spec);
      b.layers.push_back(FilterBank::zeros(k, h, in));
      b.layers.push_back(FilterBank::zeros(k, spec.t_out * g, h));
    }
    return Network{spec, std::move(b)};
  }

  detail::require(classify || spec.t_out <= spec.t_in,
                  "make_network: recurrent regression needs t_out <= t_in (one prediction per input step)");
  GcrnnModel m;
  m.n_nodes = spec.n_nodes;
  m.cell = GcrnnCell::zeros(k, f, d);
  const bool gated = spec.architecture == Architecture::ggcrnn_gnn || spec.architecture == Architecture::ggcrnn_localmlp;
  if (gated) {
    const std::size_t u = spec.gate_features ? spec.gate_features : d;
    m.gates = GatePair{GateUnit::zeros(spec.n_nodes, k, f, u), GateUnit::zeros(spec.n_nodes, k, f, u)};
  }
  const bool local = spec.architecture == Architecture::gcrnn_localmlp || spec.architecture == Architecture::ggcrnn_localmlp;
  const std::size_t out = classify ? 1 : g;
  if (local) {
    m.readout.kind = ReadoutKind::local_mlp;
    m.readout.dense = Tensor(Shape{out, d});
  } else {
    m.readout.kind = ReadoutKind::gnn;
    m.readout.layers.push_back(FilterBank::zeros(k, out, d));
  }
  m.readout.output = Activation::identity;
  m.mode = classify ? ReadoutMode::final_step : ReadoutMode::per_step;
  return Network{spec, std::move(m)};
}

struct NamedParameter {
  std::string name;
  Tensor* tensor;
  std::size_t fan_in;
};

/// Every trainable tensor in a fixed order.
inline std::vector<NamedParameter> parameters(Network& net) {
  std::vector<NamedParameter> out;
  auto bank = [&](const std::string& name, FilterBank& b) {
    out.push_back({name, &b.taps, b.n_taps() * b.in_features()});
  };
  auto cell = [&](const std::string& prefix, GcrnnCell& c) {
    bank(prefix + ".input_bank", c.input_bank);
    bank(prefix + ".state_bank", c.state_bank);
  };
  if (net.recurrent()) {
    GcrnnModel& m = net.gcrnn();
    cell("cell", m.cell);
    if (m.gates) {
      for (auto [name, gate] : {std::pair<const char*, GateUnit*>{"input_gate", &m.gates->input},
                                std::pair<const char*, GateUnit*>{"forget_gate", &m.gates->forget}}) {
        cell(std::string(name) + ".cell", gate->cell);
        out.push_back({std::string(name) + ".projection", &gate->projection, gate->projection.numel()});
      }
    }
    for (std::size_t i = 0; i < m.readout.layers.size(); ++i)
      bank("readout.layer" + std::to_string(i), m.readout.layers[i]);
    if (m.readout.dense) out.push_back({"readout.dense", &*m.readout.dense, m.readout.dense->shape()[1]});
  } else {
    GnnBaseline& b = net.baseline();
    for (std::size_t i = 0; i < b.layers.size(); ++i) bank("layer" + std::to_string(i), b.layers[i]);
  }
  return out;
}

inline std::vector<const Tensor*> parameter_tensors(const Network& net) {
  std::vector<const Tensor*> out;
  for (auto& p : parameters(const_cast<Network&>(net))) out.push_back(p.tensor);
  return out;
}

/// Draws every parameter i.i.d. uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline void init_parameters(Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : parameters(net)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < p.tensor->numel(); ++i) (*p.tensor)[i] = dist(rng);
  }
}

struct ParameterItem {
  std::string component;
  std::size_t filter_taps = 0;
  std::size_t dense = 0;
  std::size_t total() const { return filter_taps + dense; }
};

struct ParameterCount {
  std::vector<ParameterItem> items;
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& i : items) n += i.total();
    return n;
  }
  std::size_t filter_taps() const {
    std::size_t n = 0;
    for (const auto& i : items) n += i.filter_taps;
    return n;
  }
  const ParameterItem* find(const std::string& name) const {
    for (const auto& i : items)
      if (i.component == name) return &i;
    return nullptr;
  }
};

inline ParameterCount count_parameters(const Network& net) {
  ParameterCount c;
  if (net.recurrent()) {
    const GcrnnModel& m = net.gcrnn();
    c.items.push_back({"cell", m.cell.parameter_count(), 0});
    if (m.gates) {
      c.items.push_back({"input_gate", m.gates->input.cell.parameter_count(), m.gates->input.projection.numel()});
      c.items.push_back({"forget_gate", m.gates->forget.cell.parameter_count(), m.gates->forget.projection.numel()});
    }
    c.items.push_back({"readout", m.readout.filter_parameter_count(), m.readout.dense_parameter_count()});
  } else {
    const GnnBaseline& b = net.baseline();
    for (std::size_t i = 0; i < b.layers.size(); ++i)
      c.items.push_back({"layer" + std::to_string(i), b.layers[i].parameter_count(), 0});
  }
  return c;
}

/// Forward pass of any architecture. Regression networks return one N x G
/// output per predicted step (the baseline returns a single N x (T_out*G)
/// block); classification networks return a single N x 1 logit column.
inline std::vector<ad::Var> forward(ad::Tape& tape, const Network& net, const Gso& gso,
                                    const std::vector<Matrix>& sequence) {
  if (!net.recurrent()) return {run_baseline(tape, net.baseline(), gso, sequence)};
  std::vector<ad::Var> out = run_sequence(tape, net.gcrnn(), gso, sequence);
  if (net.gcrnn().mode == ReadoutMode::per_step) {
    const std::size_t t_out = net.spec.t_out;
    detail::require(out.size() >= t_out, "forward: sequence shorter than the prediction horizon");
    out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(t_out));
  }
  return out;
}

}  // namespace gcrnn
