#pragma once

// Synthetic graph-process datasets and CSV ingestion of external sequences.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gcrnn/errors.hpp"
#include "gcrnn/graph.hpp"
#include "gcrnn/model.hpp"
#include "gcrnn/tensor.hpp"

namespace gcrnn {

/// Stream seed for item `index` of a generator seeded with `seed` (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Separable space-time noise: covariance C_time (x) C_nodes with
/// C_time[t][t'] = var_time * rho_time^|t-t'| and
/// C_nodes[i][j] = var_nodes * (i == j ? 1 : rho_nodes).
struct NoiseSpec {
  double var_time = 0.0;
  double var_nodes = 0.0;
  double rho_time = 0.0;
  double rho_nodes = 0.0;

  void validate() const {
    detail::require(std::isfinite(var_time) && std::isfinite(var_nodes) && var_time >= 0.0 && var_nodes >= 0.0,
                    "NoiseSpec: variances must be finite and non-negative");
    detail::require(rho_time >= 0.0 && rho_time < 1.0 && rho_nodes >= 0.0 && rho_nodes < 1.0,
                    "NoiseSpec: correlation factors must lie in [0, 1)");
  }

  bool is_zero() const { return var_time == 0.0 || var_nodes == 0.0; }

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

namespace detail {

/// L with L L^T = c, via eigendecomposition so singular PSD matrices factor too.
inline Matrix psd_factor(const Matrix& c, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver{Eigen::MatrixXd(c)};
  require(solver.info() == Eigen::Success, std::string(what) + ": eigendecomposition failed");
  const Eigen::VectorXd& ev = solver.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  require(ev.minCoeff() >= -1e-12 * scale, std::string(what) + ": covariance is not positive semidefinite");
  Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * root.asDiagonal();
}

}  // namespace detail

/// Precomputed Kronecker factors for repeated draws of a T x N noise block.
class NoiseSampler {
 public:
  NoiseSampler(std::size_t t, std::size_t n, const NoiseSpec& spec) : t_(t), n_(n), zero_(spec.is_zero()) {
    spec.validate();
    detail::require(t > 0 && n > 0, "NoiseSampler: dimensions must be positive");
    if (zero_) return;
    Matrix ct(t, t), cn(n, n);
    for (std::size_t a = 0; a < t; ++a)
      for (std::size_t b = 0; b < t; ++b)
        ct(a, b) = spec.var_time * std::pow(spec.rho_time, std::abs(static_cast<double>(a) - static_cast<double>(b)));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) cn(a, b) = spec.var_nodes * (a == b ? 1.0 : spec.rho_nodes);
    time_factor_ = detail::psd_factor(ct, "correlated_noise(time)");
    node_factor_ = detail::psd_factor(cn, "correlated_noise(nodes)");
  }

  Matrix sample(std::mt19937_64& rng) const {
    const auto t = static_cast<Eigen::Index>(t_), n = static_cast<Eigen::Index>(n_);
    if (zero_) return Matrix::Zero(t, n);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(t, n);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    return time_factor_ * z * node_factor_.transpose();
  }

 private:
  std::size_t t_, n_;
  bool zero_;
  Matrix time_factor_, node_factor_;
};

/// T x N zero-mean Gaussian block with covariance C_time (x) C_nodes.
inline Matrix correlated_noise(std::size_t t, std::size_t n, const NoiseSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return NoiseSampler(t, n, spec).sample(rng);
}

namespace detail {

inline Matrix diffuse(const Gso& gso, const Vector& x0, const Matrix& noise) {
  const auto steps = noise.rows();
  Matrix out(steps, x0.size());
  Vector x = x0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    x = gso.matrix * x + noise.row(t).transpose();
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e3)
      throw NumericalError("diffusion_sequence: trajectory diverged at step " + std::to_string(t + 1) +
                           " (use a normalized GSO)");
    out.row(t) = x.transpose();
  }
  return out;
}

}  // namespace detail

/// x_t = S x_{t-1} + w_t for t = 1..T; returns rows x_1..x_T.
inline Matrix diffusion_sequence(const Gso& gso, const Vector& x0, std::size_t t, const NoiseSpec& spec,
                                 std::uint64_t seed) {
  detail::require(x0.size() == static_cast<Eigen::Index>(gso.n_nodes()), "diffusion_sequence: x0 length mismatch");
  detail::require(x0.minCoeff() >= 0.0 && x0.maxCoeff() <= 1.0, "diffusion_sequence: x0 entries must lie in [0, 1]");
  detail::require(t > 0, "diffusion_sequence: T must be positive");
  return detail::diffuse(gso, x0, correlated_noise(t, gso.n_nodes(), spec, seed));
}

// ------------------------------------------------------------------ datasets

struct Sample {
  std::vector<Matrix> inputs;   // T_in signals, each N x F
  std::vector<Matrix> targets;  // T_out signals, each N x G (regression)
  std::optional<std::size_t> label;

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class Split { train, validation, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    default: return "test";
  }
}

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
  std::size_t total() const { return train + validation + test; }
};

/// Damped, delayed oscillation emitted from a planar epicenter.
struct WaveSpec {
  double sample_rate_hz = 2.0;
  double wave_speed = 0.1;     // coordinate units per second
  double frequency_hz = 0.35;
  double damping = 0.15;       // 1/s
  double origin_time = 2.0;    // s
  double margin = 0.1;         // epicenter region: sensor bounding box grown by this fraction per side
  NoiseSpec noise{0.1, 0.1, 0.1, 0.1};

  friend bool operator==(const WaveSpec&, const WaveSpec&) = default;
};

struct DatasetMetadata {
  std::string generator;  // diffusion | epicenter | csv
  Task task = Task::regression;
  std::uint64_t seed = 0;
  GsoKind gso_kind = GsoKind::normalized_adjacency;
  std::size_t in_features = 1;
  std::size_t out_features = 1;
  std::size_t t_in = 0;
  std::size_t t_out = 0;
  NoiseSpec noise;
  std::optional<WaveSpec> wave;
};

struct ProcessDataset {
  Graph graph{1};
  Gso gso;
  std::vector<Sample> samples;
  std::vector<std::size_t> train, validation, test;
  DatasetMetadata meta;

  std::size_t n_nodes() const { return graph.n_nodes(); }

  const std::vector<std::size_t>& split(Split s) const {
    switch (s) {
      case Split::train: return train;
      case Split::validation: return validation;
      default: return test;
    }
  }
};

/// Each sample starts from x_0 ~ U[0,1]^N and diffuses for T_in + T_out - 1
/// steps; inputs are x_0..x_{T_in-1}, targets the following T_out signals.
inline ProcessDataset make_prediction_dataset(const Graph& graph, const Gso& gso, SplitSizes sizes, std::size_t t_in,
                                              std::size_t t_out, const NoiseSpec& spec, std::uint64_t seed) {
  detail::require(t_in >= 1 && t_out >= 1, "make_prediction_dataset: T_in and T_out must be >= 1");
  detail::require(graph.n_nodes() == gso.n_nodes(), "make_prediction_dataset: graph and GSO sizes differ");
  const std::size_t n = gso.n_nodes();
  const std::size_t steps = t_in + t_out - 1;
  NoiseSampler sampler(steps, n, spec);

  ProcessDataset ds;
  ds.graph = graph;
  ds.gso = gso;
  ds.meta = DatasetMetadata{"diffusion", Task::regression, seed, gso.kind, 1, 1, t_in, t_out, spec, std::nullopt};
  ds.samples.reserve(sizes.total());
  for (std::size_t i = 0; i < sizes.total(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector x0(static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < x0.size(); ++j) x0(j) = unit(rng);
    Matrix traj = detail::diffuse(gso, x0, sampler.sample(rng));

    Sample s;
    s.inputs.push_back(x0);
    for (std::size_t t = 1; t < t_in; ++t) s.inputs.push_back(traj.row(static_cast<Eigen::Index>(t - 1)).transpose());
    for (std::size_t t = t_in; t < t_in + t_out; ++t)
      s.targets.push_back(traj.row(static_cast<Eigen::Index>(t - 1)).transpose());
    ds.samples.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < sizes.train; ++i) ds.train.push_back(i);
  for (std::size_t i = 0; i < sizes.validation; ++i) ds.validation.push_back(sizes.train + i);
  for (std::size_t i = 0; i < sizes.test; ++i) ds.test.push_back(sizes.train + sizes.validation + i);
  return ds;
}

namespace detail {

inline std::size_t nearest_node(const std::vector<Point2>& coords, const Point2& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double d = std::hypot(coords[i][0] - p[0], coords[i][1] - p[1]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// Region epicenters are drawn from: the sensor bounding box grown by
/// `margin` times its extent on every side. Returns {xmin, xmax, ymin, ymax}.
inline std::array<double, 4> epicenter_region(const std::vector<Point2>& coords, const WaveSpec& wave) {
  double x0 = coords[0][0], x1 = x0, y0 = coords[0][1], y1 = y0;
  for (const auto& p : coords) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  double dx = std::max(x1 - x0, 1e-9) * wave.margin, dy = std::max(y1 - y0, 1e-9) * wave.margin;
  return {x0 - dx, x1 + dx, y0 - dy, y1 + dy};
}

/// Noise-free readings (T x N) of a quake at `epicenter`.
inline Matrix epicenter_waveforms(const std::vector<Point2>& coords, const Point2& epicenter, std::size_t t,
                                  const WaveSpec& wave) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double d = std::hypot(coords[i][0] - epicenter[0], coords[i][1] - epicenter[1]);
    const double arrival = wave.origin_time + d / wave.wave_speed;
    const double amplitude = 1.0 / (1.0 + d);
    for (std::size_t s = 0; s < t; ++s) {
      const double tau = static_cast<double>(s) / wave.sample_rate_hz - arrival;
      if (tau < 0.0) continue;
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) =
          amplitude * std::exp(-wave.damping * tau) * std::sin(2.0 * std::numbers::pi * wave.frequency_hz * tau);
    }
  }
  return out;
}

/// Synthetic epicenter-placement task: label = sensor nearest to a uniformly
/// drawn epicenter; inputs = T readings per sensor plus correlated noise.
inline ProcessDataset make_epicenter_dataset(const Graph& graph, GsoKind gso_kind, SplitSizes sizes, std::size_t t,
                                             const WaveSpec& wave, std::uint64_t seed) {
  detail::require(graph.coordinates().has_value(), "make_epicenter_dataset: graph has no sensor coordinates");
  detail::require(t >= 1, "make_epicenter_dataset: T must be >= 1");
  detail::require(wave.sample_rate_hz > 0.0 && wave.wave_speed > 0.0, "make_epicenter_dataset: invalid wave spec");
  const auto& coords = *graph.coordinates();
  const std::size_t n = graph.n_nodes();
  NoiseSampler sampler(t, n, wave.noise);
  auto region = epicenter_region(coords, wave);

  ProcessDataset ds;
  ds.graph = graph;
  ds.gso = build_gso(graph, gso_kind);
  ds.meta = DatasetMetadata{"epicenter", Task::classification, seed, gso_kind, 1, 1, t, 1, wave.noise, wave};
  ds.samples.reserve(sizes.total());
  for (std::size_t i = 0; i < sizes.total(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    std::uniform_real_distribution<double> ux(region[0], region[1]), uy(region[2], region[3]);
    Point2 epicenter{ux(rng), uy(rng)};
    Matrix readings = epicenter_waveforms(coords, epicenter, t, wave) + sampler.sample(rng);
    Sample s;
    for (std::size_t step = 0; step < t; ++step) s.inputs.push_back(readings.row(static_cast<Eigen::Index>(step)).transpose());
    s.label = detail::nearest_node(coords, epicenter);
    ds.samples.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < sizes.train; ++i) ds.train.push_back(i);
  for (std::size_t i = 0; i < sizes.validation; ++i) ds.validation.push_back(sizes.train + i);
  for (std::size_t i = 0; i < sizes.test; ++i) ds.test.push_back(sizes.train + sizes.validation + i);
  return ds;
}

// ------------------------------------------------------------------ CSV sequences
//
// One row per (sample, time step):
//   sample_id,t,node_0,...,node_{N-1}[,label]
// Rows of a sample are contiguous with t = 0, 1, ..., T-1. An optional header
// line starting with `sample_id` is skipped. Every sample has the same T.

struct CsvSequence {
  std::string id;
  std::vector<Matrix> steps;  // each N x 1
  std::optional<std::size_t> label;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double(const std::string& s, std::size_t line) {
  if (s.empty()) throw ParseError("empty numeric cell", line);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("non-numeric cell '" + s + "'", line);
  }
  if (used != s.size() || !std::isfinite(v)) throw ParseError("non-numeric cell '" + s + "'", line);
  return v;
}

inline long long parse_integer(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    throw ParseError("expected an integer, got '" + s + "'", line);
  }
  if (used != s.size()) throw ParseError("expected an integer, got '" + s + "'", line);
  return v;
}

}  // namespace detail

inline std::vector<CsvSequence> read_sequences_csv(std::istream& is, std::size_t n_nodes) {
  std::vector<CsvSequence> out;
  std::optional<std::size_t> steps_per_sample;
  std::optional<bool> has_label;
  std::string line;
  std::size_t line_no = 0;

  auto close_sample = [&](std::size_t at_line) {
    if (out.empty()) return;
    const std::size_t len = out.back().steps.size();
    if (!steps_per_sample) steps_per_sample = len;
    else if (len != *steps_per_sample)
      throw ParseError("ragged sequence: sample '" + out.back().id + "' has " + std::to_string(len) +
                           " steps, expected " + std::to_string(*steps_per_sample),
                       at_line);
  };

  std::size_t last_data_line = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = detail::split_csv(line);
    if (line_no == 1 && !cells.empty() && cells[0] == "sample_id") continue;

    const std::size_t values = cells.size() < 2 ? 0 : cells.size() - 2;
    if (values != n_nodes && values != n_nodes + 1)
      throw ParseError("expected " + std::to_string(n_nodes) + " node values (plus optional label), got " +
                           std::to_string(values),
                       line_no);
    const bool row_label = values == n_nodes + 1;
    if (!has_label) has_label = row_label;
    else if (*has_label != row_label) throw ParseError("label column present on some rows only", line_no);

    const std::string& id = cells[0];
    const long long t = detail::parse_integer(cells[1], line_no);
    if (out.empty() || out.back().id != id) {
      close_sample(last_data_line);
      for (const auto& s : out)
        if (s.id == id) throw ParseError("rows of sample '" + id + "' are not contiguous", line_no);
      out.push_back(CsvSequence{id, {}, std::nullopt});
    }
    CsvSequence& seq = out.back();
    if (t != static_cast<long long>(seq.steps.size()))
      throw ParseError("expected t = " + std::to_string(seq.steps.size()) + " for sample '" + id + "'", line_no);
    if (steps_per_sample && seq.steps.size() >= *steps_per_sample)
      throw ParseError("ragged sequence: sample '" + id + "' exceeds " + std::to_string(*steps_per_sample) + " steps",
                       line_no);

    Matrix x(static_cast<Eigen::Index>(n_nodes), 1);
    for (std::size_t i = 0; i < n_nodes; ++i) x(static_cast<Eigen::Index>(i), 0) = detail::parse_double(cells[2 + i], line_no);
    seq.steps.push_back(std::move(x));
    if (row_label) {
      long long label = detail::parse_integer(cells.back(), line_no);
      if (label < 0 || static_cast<std::size_t>(label) >= n_nodes)
        throw ParseError("label " + std::to_string(label) + " out of range [0, " + std::to_string(n_nodes) + ")", line_no);
      if (seq.label && *seq.label != static_cast<std::size_t>(label))
        throw ParseError("label changes within sample '" + id + "'", line_no);
      seq.label = static_cast<std::size_t>(label);
    }
    last_data_line = line_no;
  }
  close_sample(last_data_line);
  return out;
}

/// Writes sequences with 17 significant digits so values round-trip exactly.
inline void write_sequences_csv(std::ostream& os, const std::vector<const std::vector<Matrix>*>& sequences,
                                const std::vector<std::optional<std::size_t>>& labels, std::size_t n_nodes) {
  const bool with_label = !labels.empty() && labels.front().has_value();
  os << "sample_id,t";
  for (std::size_t i = 0; i < n_nodes; ++i) os << ",node_" << i;
  if (with_label) os << ",label";
  os << '\n' << std::setprecision(17);
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = *sequences[s];
    for (std::size_t t = 0; t < seq.size(); ++t) {
      detail::require(seq[t].size() == static_cast<Eigen::Index>(n_nodes),
                      "write_sequences_csv: only single-feature signals are supported");
      os << s << ',' << t;
      for (Eigen::Index i = 0; i < seq[t].size(); ++i) os << ',' << seq[t].data()[i];
      if (with_label) os << ',' << *labels[s];
      os << '\n';
    }
  }
}

/// Reads externally supplied readings into a dataset whose samples all sit in
/// the training split. Labelled files become classification datasets.
inline ProcessDataset ingest_csv_sequences(const std::string& path, const Graph& graph,
                                           GsoKind gso_kind = GsoKind::normalized_adjacency) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  auto seqs = read_sequences_csv(is, graph.n_nodes());

  ProcessDataset ds;
  ds.graph = graph;
  ds.gso = graph.n_edges() ? build_gso(graph, gso_kind) : Gso{Matrix::Zero(graph.n_nodes(), graph.n_nodes()), gso_kind};
  const bool labelled = !seqs.empty() && seqs.front().label.has_value();
  const std::size_t t = seqs.empty() ? 0 : seqs.front().steps.size();
  ds.meta = DatasetMetadata{"csv", labelled ? Task::classification : Task::regression, 0, gso_kind, 1, 1, t,
                            labelled ? 1u : 0u, NoiseSpec{}, std::nullopt};
  for (auto& seq : seqs) {
    ds.train.push_back(ds.samples.size());
    ds.samples.push_back(Sample{std::move(seq.steps), {}, seq.label});
  }
  return ds;
}

// ------------------------------------------------------------------ dataset directories
//
// <dir>/meta.txt                      key = value metadata
// <dir>/graph.txt                     edge list
// <dir>/coordinates.csv               optional sensor positions (x,y per line)
// <dir>/<split>_inputs.csv            input sequences (with labels for classification)
// <dir>/<split>_targets.csv           target sequences (regression)

namespace detail {

inline void write_kv(std::ostream& os, const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; }

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path + ": expected key = value", line_no);
    auto trim = [](std::string s) {
      auto first = s.find_first_not_of(" \t\r");
      auto last = s.find_last_not_of(" \t\r");
      return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace detail

inline void save_dataset(const std::filesystem::path& dir, const ProcessDataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_edge_list((dir / "graph.txt").string(), ds.graph);
  if (ds.graph.coordinates()) {
    std::ofstream cs(dir / "coordinates.csv");
    cs << std::setprecision(17);
    for (const auto& p : *ds.graph.coordinates()) cs << p[0] << ',' << p[1] << '\n';
  }
  {
    std::ofstream ms(dir / "meta.txt");
    const auto& m = ds.meta;
    detail::write_kv(ms, "format_version", "1");
    detail::write_kv(ms, "generator", m.generator);
    detail::write_kv(ms, "task", to_string(m.task));
    detail::write_kv(ms, "seed", std::to_string(m.seed));
    detail::write_kv(ms, "n_nodes", std::to_string(ds.n_nodes()));
    detail::write_kv(ms, "gso", to_string(m.gso_kind));
    detail::write_kv(ms, "in_features", std::to_string(m.in_features));
    detail::write_kv(ms, "out_features", std::to_string(m.out_features));
    detail::write_kv(ms, "t_in", std::to_string(m.t_in));
    detail::write_kv(ms, "t_out", std::to_string(m.t_out));
    detail::write_kv(ms, "noise.var_time", detail::fmt_double(m.noise.var_time));
    detail::write_kv(ms, "noise.var_nodes", detail::fmt_double(m.noise.var_nodes));
    detail::write_kv(ms, "noise.rho_time", detail::fmt_double(m.noise.rho_time));
    detail::write_kv(ms, "noise.rho_nodes", detail::fmt_double(m.noise.rho_nodes));
    if (m.wave) {
      detail::write_kv(ms, "wave.sample_rate_hz", detail::fmt_double(m.wave->sample_rate_hz));
      detail::write_kv(ms, "wave.wave_speed", detail::fmt_double(m.wave->wave_speed));
      detail::write_kv(ms, "wave.frequency_hz", detail::fmt_double(m.wave->frequency_hz));
      detail::write_kv(ms, "wave.damping", detail::fmt_double(m.wave->damping));
      detail::write_kv(ms, "wave.origin_time", detail::fmt_double(m.wave->origin_time));
      detail::write_kv(ms, "wave.margin", detail::fmt_double(m.wave->margin));
    }
    detail::write_kv(ms, "n_train", std::to_string(ds.train.size()));
    detail::write_kv(ms, "n_validation", std::to_string(ds.validation.size()));
    detail::write_kv(ms, "n_test", std::to_string(ds.test.size()));
  }
  for (Split split : {Split::train, Split::validation, Split::test}) {
    std::vector<const std::vector<Matrix>*> inputs, targets;
    std::vector<std::optional<std::size_t>> labels;
    for (auto idx : ds.split(split)) {
      inputs.push_back(&ds.samples[idx].inputs);
      targets.push_back(&ds.samples[idx].targets);
      labels.push_back(ds.samples[idx].label);
    }
    std::ofstream is(dir / (to_string(split) + "_inputs.csv"));
    write_sequences_csv(is, inputs, labels, ds.n_nodes());
    if (ds.meta.task == Task::regression) {
      std::ofstream ts(dir / (to_string(split) + "_targets.csv"));
      write_sequences_csv(ts, targets, {}, ds.n_nodes());
    }
  }
}

inline ProcessDataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir / "meta.txt"))
    throw InvalidArgument("'" + dir.string() + "' is not a dataset directory (meta.txt missing)");
  auto kv = detail::read_kv_file((dir / "meta.txt").string());
  auto get = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw ParseError("meta.txt: missing key '" + k + "'", 0);
    return it->second;
  };
  auto get_size = [&](const std::string& k) { return static_cast<std::size_t>(std::stoull(get(k))); };
  auto get_double = [&](const std::string& k) { return std::stod(get(k)); };

  ProcessDataset ds;
  ds.graph = load_edge_list((dir / "graph.txt").string());
  if (fs::exists(dir / "coordinates.csv")) {
    std::ifstream cs(dir / "coordinates.csv");
    std::vector<Point2> coords;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(cs, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto cells = detail::split_csv(line);
      if (cells.size() != 2) throw ParseError("coordinates.csv: expected x,y", line_no);
      coords.push_back({detail::parse_double(cells[0], line_no), detail::parse_double(cells[1], line_no)});
    }
    ds.graph.set_coordinates(std::move(coords));
  }
  auto& m = ds.meta;
  m.generator = get("generator");
  m.task = parse_task(get("task"));
  m.seed = std::stoull(get("seed"));
  m.gso_kind = parse_gso_kind(get("gso"));
  m.in_features = get_size("in_features");
  m.out_features = get_size("out_features");
  m.t_in = get_size("t_in");
  m.t_out = get_size("t_out");
  m.noise = NoiseSpec{get_double("noise.var_time"), get_double("noise.var_nodes"), get_double("noise.rho_time"),
                      get_double("noise.rho_nodes")};
  if (kv.count("wave.sample_rate_hz")) {
    WaveSpec w;
    w.sample_rate_hz = get_double("wave.sample_rate_hz");
    w.wave_speed = get_double("wave.wave_speed");
    w.frequency_hz = get_double("wave.frequency_hz");
    w.damping = get_double("wave.damping");
    w.origin_time = get_double("wave.origin_time");
    w.margin = get_double("wave.margin");
    w.noise = m.noise;
    m.wave = w;
  }
  detail::require(get_size("n_nodes") == ds.graph.n_nodes(), "load_dataset: meta.txt node count disagrees with graph.txt");
  ds.gso = build_gso(ds.graph, m.gso_kind);

  for (Split split : {Split::train, Split::validation, Split::test}) {
    std::ifstream is(dir / (to_string(split) + "_inputs.csv"));
    if (!is) throw std::runtime_error("missing " + to_string(split) + "_inputs.csv in '" + dir.string() + "'");
    auto inputs = read_sequences_csv(is, ds.n_nodes());
    std::vector<CsvSequence> targets;
    if (m.task == Task::regression) {
      std::ifstream ts(dir / (to_string(split) + "_targets.csv"));
      if (!ts) throw std::runtime_error("missing " + to_string(split) + "_targets.csv in '" + dir.string() + "'");
      targets = read_sequences_csv(ts, ds.n_nodes());
      detail::require(targets.size() == inputs.size(), "load_dataset: input/target sample counts differ in split " +
                                                           to_string(split));
    }
    auto& index = split == Split::train ? ds.train : split == Split::validation ? ds.validation : ds.test;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      index.push_back(ds.samples.size());
      Sample s{std::move(inputs[i].steps), {}, inputs[i].label};
      if (m.task == Task::regression) s.targets = std::move(targets[i].steps);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace gcrnn
