#pragma once

// Experiment drivers behind the command-line verbs. Each function is a pure
// function of its config, seed and input files; wall-clock timings are kept
// out of the data files they write.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gcrnn/config.hpp"
#include "gcrnn/errors.hpp"
#include "gcrnn/graph.hpp"
#include "gcrnn/model.hpp"
#include "gcrnn/processgen.hpp"
#include "gcrnn/serialize.hpp"
#include "gcrnn/training.hpp"

namespace gcrnn {

namespace fs = std::filesystem;

/// Independent seed streams of one experiment round.
struct RoundSeeds {
  std::uint64_t graph, data, init, shuffle;
};

inline RoundSeeds round_seeds(std::uint64_t seed, std::size_t round) {
  const std::uint64_t base = derive_seed(seed, round);
  return {derive_seed(base, 0), derive_seed(base, 1), derive_seed(base, 2), derive_seed(base, 3)};
}

inline std::string round_name(std::size_t round) {
  std::ostringstream os;
  os << "round_" << std::setw(2) << std::setfill('0') << round;
  return os.str();
}

inline std::vector<Point2> read_coordinates(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open coordinates file '" + path + "'");
  std::vector<Point2> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != 2) throw ParseError(path + ": expected x,y", line_no);
    out.push_back({detail::parse_double(cells[0], line_no), detail::parse_double(cells[1], line_no)});
  }
  return out;
}

inline Graph build_graph(const ExperimentConfig& cfg, std::uint64_t seed) {
  const GraphConfig& g = cfg.graph;
  if (g.kind == "sbm") return sbm_generate(g.n_nodes, g.communities, g.p_intra, g.p_inter, seed);
  std::vector<Point2> coords;
  if (!g.coordinates.empty()) {
    coords = read_coordinates(g.coordinates);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < g.n_nodes; ++i) {
      double x = unit(rng);
      coords.push_back({x, unit(rng)});
    }
  }
  return knn_graph(coords, g.k, g.weighting == "unit" ? KnnWeighting::unit : KnnWeighting::inverse_distance);
}

/// Graph and dataset of one round.
inline ProcessDataset generate_round(const ExperimentConfig& cfg, std::size_t round) {
  const RoundSeeds seeds = round_seeds(cfg.seed, round);
  Graph graph = build_graph(cfg, seeds.graph);
  if (cfg.data.generator == "diffusion") {
    Gso gso = build_gso(graph, cfg.graph.gso);
    return make_prediction_dataset(graph, gso, cfg.data.splits, cfg.data.t_in, cfg.data.t_out, cfg.data.noise,
                                   seeds.data);
  }
  WaveSpec wave = cfg.data.wave;
  wave.noise = cfg.data.noise;
  return make_epicenter_dataset(graph, cfg.graph.gso, cfg.data.splits, cfg.data.t_in, wave, seeds.data);
}

/// Writes <out>/round_XX/ for every round plus a copy of the config.
inline std::vector<fs::path> cmd_generate(const ExperimentConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  fs::create_directories(out_dir);
  {
    std::ofstream os(out_dir / "config.ini");
    write_config(os, cfg);
  }
  std::vector<fs::path> dirs;
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    fs::path dir = out_dir / round_name(r);
    save_dataset(dir, generate_round(cfg, r));
    dirs.push_back(dir);
  }
  return dirs;
}

inline NetworkSpec network_spec(const ExperimentConfig& cfg, Architecture arch, const ProcessDataset& ds) {
  NetworkSpec s;
  s.architecture = arch;
  s.task = ds.meta.task;
  s.n_nodes = ds.n_nodes();
  s.in_features = ds.meta.in_features;
  s.out_features = ds.meta.out_features;
  s.t_in = ds.meta.t_in;
  s.t_out = ds.meta.task == Task::classification ? 1 : ds.meta.t_out;
  s.state_features = cfg.model.state_features;
  s.gate_features = cfg.model.gate_features;
  s.taps = cfg.model.taps;
  s.baseline_hidden = cfg.model.baseline_hidden;
  return s;
}

inline bool uses_local_mlp(Architecture a) {
  return a == Architecture::gcrnn_localmlp || a == Architecture::ggcrnn_localmlp;
}

inline TrainConfig train_config(const ExperimentConfig& cfg, Architecture arch, Task task, std::uint64_t shuffle_seed) {
  TrainConfig t;
  t.epochs = cfg.training.epochs;
  t.batch_size = cfg.training.batch_size;
  t.learning_rate = uses_local_mlp(arch) ? cfg.training.learning_rate_local_mlp : cfg.training.learning_rate;
  t.loss = cfg.training.loss == "auto" ? (task == Task::regression ? LossKind::l1 : LossKind::cross_entropy)
                                       : parse_loss_kind(cfg.training.loss);
  t.eval_every = cfg.training.eval_every;
  t.seed = shuffle_seed;
  return t;
}

inline Metric metric_for(const ExperimentConfig& cfg, Task task) {
  if (cfg.training.metric != "auto") return parse_metric(cfg.training.metric);
  return task == Task::regression ? Metric::mae : Metric::accuracy;
}

struct TrainSummary {
  Architecture architecture;
  std::size_t parameters = 0;
  Metric metric = Metric::mae;
  double test_value = 0.0;
  std::size_t best_epoch = 0;
  double wall_seconds = 0.0;
  std::vector<EpochRecord> history;
};

inline void write_summary(std::ostream& os, const TrainSummary& s) {
  os << std::setprecision(17);
  os << "architecture = " << to_string(s.architecture) << '\n';
  os << "parameters = " << s.parameters << '\n';
  os << "metric = " << to_string(s.metric) << '\n';
  os << "test_value = " << s.test_value << '\n';
  os << "best_epoch = " << s.best_epoch << '\n';
}

/// Trains one architecture on a loaded dataset and writes model.json,
/// history.csv, summary.txt and timing.txt into `out_dir`.
inline TrainSummary train_architecture(const ExperimentConfig& cfg, Architecture arch, const ProcessDataset& ds,
                                       const RoundSeeds& seeds, const fs::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  Network net = make_network(network_spec(cfg, arch, ds));
  init_parameters(net, seeds.init);
  check_compatible(net, ds);
  TrainResult result = train(net, ds, train_config(cfg, arch, ds.meta.task, seeds.shuffle));

  TrainSummary s;
  s.architecture = arch;
  s.parameters = count_parameters(result.model).total();
  s.metric = metric_for(cfg, ds.meta.task);
  s.test_value = evaluate(result.model, ds, Split::test, s.metric);
  s.best_epoch = result.best_epoch;
  s.history = result.history;
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  fs::create_directories(out_dir);
  save_network((out_dir / "model.json").string(), result.model);
  {
    std::ofstream os(out_dir / "history.csv");
    write_history_csv(os, result.history);
  }
  {
    std::ofstream os(out_dir / "summary.txt");
    write_summary(os, s);
  }
  {
    std::ofstream os(out_dir / "timing.txt");
    os << "wall_seconds = " << s.wall_seconds << '\n';
  }
  return s;
}

/// Round index encoded in a generated directory name (`round_XX` or
/// `round_XX/data`), 0 when the path carries none.
inline std::size_t round_of(const fs::path& data_dir) {
  fs::path p = fs::absolute(data_dir).lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  for (const fs::path& candidate : {p, p.parent_path()}) {
    const std::string name = candidate.filename().string();
    if (name.rfind("round_", 0) != 0) continue;
    try {
      return static_cast<std::size_t>(std::stoul(name.substr(6)));
    } catch (const std::exception&) {
    }
  }
  return 0;
}

inline std::vector<TrainSummary> cmd_train(const ExperimentConfig& cfg, const fs::path& data_dir,
                                           const fs::path& out_dir) {
  validate(cfg);
  ProcessDataset ds = load_dataset(data_dir);
  const RoundSeeds seeds = round_seeds(cfg.seed, round_of(data_dir));
  // Shape problems surface before any architecture starts training.
  for (Architecture arch : cfg.model.architectures) check_compatible(make_network(network_spec(cfg, arch, ds)), ds);
  std::vector<TrainSummary> out;
  for (Architecture arch : cfg.model.architectures)
    out.push_back(train_architecture(cfg, arch, ds, seeds, out_dir / to_string(arch)));
  return out;
}

/// Test-split metric of a saved model; appends `model,data,metric,value` to `results_csv` when given.
inline double cmd_eval(const fs::path& model_file, const fs::path& data_dir, Metric metric,
                       const fs::path& results_csv = {}) {
  Network net = load_network(model_file.string());
  ProcessDataset ds = load_dataset(data_dir);
  try {
    check_compatible(net, ds);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("model '" + model_file.string() + "' (" + std::to_string(net.spec.n_nodes) + " nodes, " +
                          std::to_string(net.spec.t_in) + " x " + std::to_string(net.spec.in_features) +
                          " inputs) is incompatible with dataset '" + data_dir.string() + "' (" +
                          std::to_string(ds.n_nodes()) + " nodes, " + std::to_string(ds.meta.t_in) + " x " +
                          std::to_string(ds.meta.in_features) + " inputs): " + e.what());
  }
  const double value = evaluate(net, ds, Split::test, metric);
  if (!results_csv.empty()) {
    const bool fresh = !fs::exists(results_csv);
    if (results_csv.has_parent_path()) fs::create_directories(results_csv.parent_path());
    std::ofstream os(results_csv, std::ios::app);
    if (fresh) os << "model,data,metric,value\n";
    os << std::setprecision(17) << model_file.string() << ',' << data_dir.string() << ',' << to_string(metric) << ','
       << value << '\n';
  }
  return value;
}

struct ResultRow {
  std::size_t round;
  Architecture architecture;
  std::size_t parameters;
  Metric metric;
  double value;
};

struct AggregateRow {
  Architecture architecture;
  std::size_t parameters;
  Metric metric;
  std::size_t rounds;
  double mean;
  double stddev;  // sample standard deviation; 0 for a single round
};

inline std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  std::vector<AggregateRow> out;
  std::vector<Architecture> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.architecture) == order.end()) order.push_back(r.architecture);
  for (Architecture a : order) {
    std::vector<double> values;
    AggregateRow agg{a, 0, Metric::mae, 0, 0.0, 0.0};
    for (const auto& r : rows) {
      if (r.architecture != a) continue;
      values.push_back(r.value);
      agg.parameters = r.parameters;
      agg.metric = r.metric;
    }
    agg.rounds = values.size();
    for (double v : values) agg.mean += v;
    agg.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - agg.mean) * (v - agg.mean);
      agg.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    out.push_back(agg);
  }
  return out;
}

/// Columns: kind,round,architecture,parameters,metric,value,std. Per-round rows
/// have kind `round`; aggregate rows have kind `aggregate`, an empty round
/// column, the mean in `value` and the standard deviation in `std`.
inline void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows,
                              const std::vector<AggregateRow>& aggs) {
  os << "kind,round,architecture,parameters,metric,value,std\n" << std::setprecision(17);
  for (const auto& r : rows)
    os << "round," << r.round << ',' << to_string(r.architecture) << ',' << r.parameters << ',' << to_string(r.metric)
       << ',' << r.value << ",\n";
  for (const auto& a : aggs)
    os << "aggregate,," << to_string(a.architecture) << ',' << a.parameters << ',' << to_string(a.metric) << ','
       << a.mean << ',' << a.stddev << '\n';
}

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<std::vector<TrainSummary>> rounds;
};

/// rounds x (generate, train every architecture, evaluate); writes
/// <out>/round_XX/{data,<arch>}/ and <out>/results.csv.
inline ExperimentResult cmd_experiment(const ExperimentConfig& cfg, const fs::path& out_dir,
                                       std::ostream* progress = nullptr) {
  validate(cfg);
  fs::create_directories(out_dir);
  {
    std::ofstream os(out_dir / "config.ini");
    write_config(os, cfg);
  }
  ExperimentResult result;
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    try {
      const fs::path round_dir = out_dir / round_name(r);
      ProcessDataset ds = generate_round(cfg, r);
      save_dataset(round_dir / "data", ds);
      const RoundSeeds seeds = round_seeds(cfg.seed, r);
      std::vector<TrainSummary> summaries;
      for (Architecture arch : cfg.model.architectures) {
        TrainSummary s = train_architecture(cfg, arch, ds, seeds, round_dir / to_string(arch));
        result.rows.push_back({r, arch, s.parameters, s.metric, s.test_value});
        if (progress)
          *progress << round_name(r) << ' ' << to_string(arch) << " params=" << s.parameters << ' '
                    << to_string(s.metric) << '=' << s.test_value << " (" << std::fixed << std::setprecision(1)
                    << s.wall_seconds << "s)" << std::defaultfloat << std::setprecision(6) << std::endl;
        summaries.push_back(std::move(s));
      }
      result.rounds.push_back(std::move(summaries));
    } catch (const NumericalError& e) {
      throw NumericalError("round " + std::to_string(r) + ": " + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("round " + std::to_string(r) + ": " + e.what());
    }
  }
  result.aggregates = aggregate(result.rows);
  std::ofstream os(out_dir / "results.csv");
  write_results_csv(os, result.rows, result.aggregates);
  return result;
}

/// Parameter table for every configured architecture, sized from the config
/// alone (no data is generated).
inline std::vector<std::pair<Architecture, ParameterCount>> cmd_count_params(const ExperimentConfig& cfg) {
  validate(cfg);
  ProcessDataset shape_only;
  shape_only.graph = Graph(cfg.graph.n_nodes);
  shape_only.meta.task = cfg.data.generator == "epicenter" ? Task::classification : Task::regression;
  shape_only.meta.t_in = cfg.data.t_in;
  shape_only.meta.t_out = cfg.data.t_out;
  std::vector<std::pair<Architecture, ParameterCount>> out;
  for (Architecture arch : cfg.model.architectures)
    out.emplace_back(arch, count_parameters(make_network(network_spec(cfg, arch, shape_only))));
  return out;
}

inline void print_parameter_table(std::ostream& os, const std::vector<std::pair<Architecture, ParameterCount>>& table) {
  for (const auto& [arch, count] : table) {
    os << to_string(arch) << '\n';
    os << "  " << std::left << std::setw(14) << "component" << std::right << std::setw(12) << "filter_taps"
       << std::setw(10) << "dense" << std::setw(10) << "total" << '\n';
    for (const auto& item : count.items)
      os << "  " << std::left << std::setw(14) << item.component << std::right << std::setw(12) << item.filter_taps
         << std::setw(10) << item.dense << std::setw(10) << item.total() << '\n';
    os << "  " << std::left << std::setw(14) << "total" << std::right << std::setw(12) << count.filter_taps()
       << std::setw(10) << count.total() - count.filter_taps() << std::setw(10) << count.total() << '\n';
  }
}

}  // namespace gcrnn
