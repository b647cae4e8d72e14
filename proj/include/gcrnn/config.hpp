#pragma once

// Sectioned key-value experiment configuration.
//
//   # comment
//   [section]
//   key = value
//
// Every key is known in advance; unknown sections or keys, duplicates and
// malformed values are reported with their line number.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gcrnn/errors.hpp"
#include "gcrnn/graph.hpp"
#include "gcrnn/model.hpp"
#include "gcrnn/processgen.hpp"
#include "gcrnn/training.hpp"

namespace gcrnn {

struct GraphConfig {
  std::string kind = "sbm";  // sbm | knn
  std::size_t n_nodes = 20;
  std::size_t communities = 4;
  double p_intra = 0.8;
  double p_inter = 0.2;
  std::size_t k = 3;
  std::string coordinates;  // CSV of x,y rows; empty draws sensors uniformly in the unit square
  std::string weighting = "unit";  // unit | inverse_distance
  GsoKind gso = GsoKind::normalized_adjacency;

  friend bool operator==(const GraphConfig&, const GraphConfig&) = default;
};

struct DataConfig {
  std::string generator = "diffusion";  // diffusion | epicenter
  std::size_t t_in = 10;
  std::size_t t_out = 10;
  SplitSizes splits{10000, 2400, 200};
  NoiseSpec noise{0.01, 0.01, 0.1, 0.1};
  WaveSpec wave;

  friend bool operator==(const DataConfig& a, const DataConfig& b) {
    return a.generator == b.generator && a.t_in == b.t_in && a.t_out == b.t_out && a.splits.train == b.splits.train &&
           a.splits.validation == b.splits.validation && a.splits.test == b.splits.test && a.noise == b.noise &&
           a.wave == b.wave;
  }
};

struct ModelConfig {
  std::vector<Architecture> architectures{Architecture::gnn_baseline, Architecture::gcrnn_gnn,
                                          Architecture::ggcrnn_gnn};
  std::size_t state_features = 10;
  std::size_t gate_features = 0;
  std::size_t taps = 4;
  std::size_t baseline_hidden = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainingConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 100;
  double learning_rate = 0.001;
  double learning_rate_local_mlp = 0.005;
  std::string loss = "auto";    // auto | l1 | cross_entropy
  std::string metric = "auto";  // auto | mae | accuracy
  std::size_t eval_every = 1;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t rounds = 1;
  GraphConfig graph;
  DataConfig data;
  ModelConfig model;
  TrainingConfig training;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Binds config keys to fields; used in both directions.
class KeyTable {
 public:
  using Setter = std::function<void(const std::string&)>;
  using Getter = std::function<std::string()>;

  void add(const std::string& section, const std::string& key, Setter set, Getter get) {
    order_.push_back({section, key});
    entries_[section + "." + key] = {std::move(set), std::move(get)};
    sections_.insert(section);
  }

  bool has_section(const std::string& s) const { return sections_.count(s) != 0; }
  bool has(const std::string& section, const std::string& key) const {
    return entries_.count(section + "." + key) != 0;
  }
  void set(const std::string& section, const std::string& key, const std::string& value) {
    entries_.at(section + "." + key).first(value);
  }
  const std::vector<std::pair<std::string, std::string>>& order() const { return order_; }
  std::string get(const std::string& section, const std::string& key) const {
    return entries_.at(section + "." + key).second();
  }

 private:
  std::vector<std::pair<std::string, std::string>> order_;
  std::map<std::string, std::pair<Setter, Getter>> entries_;
  std::set<std::string> sections_;
};

inline std::size_t to_size(const std::string& v) {
  std::size_t used = 0;
  long long x = std::stoll(v, &used);
  if (used != v.size() || x < 0) throw InvalidArgument("expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(x);
}

inline double to_real(const std::string& v) {
  std::size_t used = 0;
  double x = std::stod(v, &used);
  if (used != v.size() || !std::isfinite(x)) throw InvalidArgument("expected a real number, got '" + v + "'");
  return x;
}

inline KeyTable key_table(ExperimentConfig& c) {
  KeyTable t;
  auto size_key = [&t](const std::string& s, const std::string& k, std::size_t& field) {
    t.add(s, k, [&field](const std::string& v) { field = to_size(v); }, [&field] { return std::to_string(field); });
  };
  auto real_key = [&t](const std::string& s, const std::string& k, double& field) {
    t.add(s, k, [&field](const std::string& v) { field = to_real(v); }, [&field] { return fmt(field); });
  };
  auto text_key = [&t](const std::string& s, const std::string& k, std::string& field) {
    t.add(s, k, [&field](const std::string& v) { field = v; }, [&field] { return field; });
  };

  t.add("experiment", "seed", [&c](const std::string& v) { c.seed = std::stoull(v); },
        [&c] { return std::to_string(c.seed); });
  size_key("experiment", "rounds", c.rounds);

  text_key("graph", "kind", c.graph.kind);
  size_key("graph", "n_nodes", c.graph.n_nodes);
  size_key("graph", "communities", c.graph.communities);
  real_key("graph", "p_intra", c.graph.p_intra);
  real_key("graph", "p_inter", c.graph.p_inter);
  size_key("graph", "k", c.graph.k);
  text_key("graph", "coordinates", c.graph.coordinates);
  text_key("graph", "weighting", c.graph.weighting);
  t.add("graph", "gso", [&c](const std::string& v) { c.graph.gso = parse_gso_kind(v); },
        [&c] { return to_string(c.graph.gso); });

  text_key("data", "generator", c.data.generator);
  size_key("data", "t_in", c.data.t_in);
  size_key("data", "t_out", c.data.t_out);
  size_key("data", "n_train", c.data.splits.train);
  size_key("data", "n_validation", c.data.splits.validation);
  size_key("data", "n_test", c.data.splits.test);
  real_key("data", "var_time", c.data.noise.var_time);
  real_key("data", "var_nodes", c.data.noise.var_nodes);
  real_key("data", "rho_time", c.data.noise.rho_time);
  real_key("data", "rho_nodes", c.data.noise.rho_nodes);
  real_key("data", "sample_rate_hz", c.data.wave.sample_rate_hz);
  real_key("data", "wave_speed", c.data.wave.wave_speed);
  real_key("data", "frequency_hz", c.data.wave.frequency_hz);
  real_key("data", "damping", c.data.wave.damping);
  real_key("data", "origin_time", c.data.wave.origin_time);
  real_key("data", "margin", c.data.wave.margin);

  t.add("model", "architectures",
        [&c](const std::string& v) {
          c.model.architectures.clear();
          std::istringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) c.model.architectures.push_back(parse_architecture(trim(item)));
        },
        [&c] {
          std::string out;
          for (std::size_t i = 0; i < c.model.architectures.size(); ++i)
            out += (i ? ", " : "") + to_string(c.model.architectures[i]);
          return out;
        });
  size_key("model", "state_features", c.model.state_features);
  size_key("model", "gate_features", c.model.gate_features);
  size_key("model", "taps", c.model.taps);
  size_key("model", "baseline_hidden", c.model.baseline_hidden);

  size_key("training", "epochs", c.training.epochs);
  size_key("training", "batch_size", c.training.batch_size);
  real_key("training", "learning_rate", c.training.learning_rate);
  real_key("training", "learning_rate_local_mlp", c.training.learning_rate_local_mlp);
  text_key("training", "loss", c.training.loss);
  text_key("training", "metric", c.training.metric);
  size_key("training", "eval_every", c.training.eval_every);
  return t;
}

}  // namespace detail

/// Rejects inconsistent values before any work starts.
inline void validate(const ExperimentConfig& c) {
  using detail::require;
  require(c.rounds >= 1, "experiment.rounds must be >= 1");
  require(c.graph.kind == "sbm" || c.graph.kind == "knn", "graph.kind must be sbm or knn");
  require(c.graph.n_nodes >= 1, "graph.n_nodes must be >= 1");
  if (c.graph.kind == "sbm") {
    require(c.graph.communities >= 1 && c.graph.n_nodes % c.graph.communities == 0,
            "graph.n_nodes must be divisible by graph.communities");
    require(c.graph.p_inter >= 0.0 && c.graph.p_intra <= 1.0 && c.graph.p_inter <= c.graph.p_intra,
            "graph probabilities must satisfy 0 <= p_inter <= p_intra <= 1");
  } else {
    require(c.graph.k >= 1, "graph.k must be >= 1");
    require(c.graph.coordinates.empty() ? c.graph.n_nodes >= c.graph.k + 1 : true, "graph.n_nodes must exceed graph.k");
  }
  require(c.graph.weighting == "unit" || c.graph.weighting == "inverse_distance",
          "graph.weighting must be unit or inverse_distance");
  require(c.data.generator == "diffusion" || c.data.generator == "epicenter",
          "data.generator must be diffusion or epicenter");
  require(c.data.generator != "epicenter" || c.graph.kind == "knn", "the epicenter generator needs graph.kind = knn");
  require(c.data.t_in >= 1 && c.data.t_out >= 1, "data.t_in and data.t_out must be >= 1");
  require(c.data.splits.train >= 1 && c.data.splits.validation >= 1 && c.data.splits.test >= 1,
          "data split sizes must be >= 1");
  c.data.noise.validate();
  require(c.data.wave.sample_rate_hz > 0.0 && c.data.wave.wave_speed > 0.0 && c.data.wave.damping >= 0.0 &&
              c.data.wave.margin >= 0.0,
          "data wave parameters out of range");
  require(!c.model.architectures.empty(), "model.architectures must list at least one architecture");
  require(c.model.state_features >= 1 && c.model.taps >= 1, "model.state_features and model.taps must be >= 1");
  require(c.training.batch_size >= 1 && c.training.eval_every >= 1, "training.batch_size and eval_every must be >= 1");
  require(c.training.learning_rate > 0.0 && c.training.learning_rate_local_mlp > 0.0,
          "training learning rates must be positive");
  require(c.training.loss == "auto" || c.training.loss == "l1" || c.training.loss == "cross_entropy",
          "training.loss must be auto, l1 or cross_entropy");
  require(c.training.metric == "auto" || c.training.metric == "mae" || c.training.metric == "accuracy",
          "training.metric must be auto, mae or accuracy");
}

inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig c;
  auto table = detail::key_table(c);
  std::set<std::string> seen;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("malformed section header '" + line + "'", line_no);
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!table.has_section(section)) throw ParseError("unknown section [" + section + "]", line_no);
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    if (section.empty()) throw ParseError("key outside of any [section]", line_no);
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (!table.has(section, key)) throw ParseError("unknown key '" + key + "' in [" + section + "]", line_no);
    if (!seen.insert(section + "." + key).second) throw ParseError("duplicate key '" + key + "'", line_no);
    try {
      table.set(section, key, value);
    } catch (const std::invalid_argument& e) {
      throw ParseError(section + "." + key + ": " + e.what(), line_no);
    } catch (const std::out_of_range&) {
      throw ParseError(section + "." + key + ": value out of range", line_no);
    }
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open config '" + path + "'");
  try {
    return parse_config(is);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

inline void write_config(std::ostream& os, const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  auto table = detail::key_table(copy);
  std::string section;
  for (const auto& [s, k] : table.order()) {
    if (s != section) {
      os << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    os << k << " = " << table.get(s, k) << '\n';
  }
}

}  // namespace gcrnn
