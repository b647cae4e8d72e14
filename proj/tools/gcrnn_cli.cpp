// Command-line front end: generate | train | eval | experiment | count-params.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gcrnn/gcrnn.hpp"

namespace {

gcrnn::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed) {
  gcrnn::ExperimentConfig cfg = gcrnn::load_config(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph convolutional recurrent networks: data generation, training and evaluation"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, model_path, metric_name = "auto";
  std::optional<std::uint64_t> seed;

  auto* generate = app.add_subcommand("generate", "Generate graphs and datasets for every round");
  generate->add_option("--config", config_path, "Experiment config file")->required();
  generate->add_option("--out", out_dir, "Output directory")->required();
  generate->add_option("--seed", seed, "Override experiment.seed");

  auto* train = app.add_subcommand("train", "Train every configured architecture on a dataset directory");
  train->add_option("--config", config_path, "Experiment config file")->required();
  train->add_option("--data", data_dir, "Dataset directory (contains meta.txt)")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--seed", seed, "Override experiment.seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a saved model on a dataset's test split");
  eval->add_option("--model", model_path, "Model file (model.json)")->required();
  eval->add_option("--data", data_dir, "Dataset directory")->required();
  eval->add_option("--metric", metric_name, "mae | accuracy | auto");
  eval->add_option("--out", out_dir, "Results CSV to append to");

  auto* experiment = app.add_subcommand("experiment", "Run rounds x architectures and aggregate test metrics");
  experiment->add_option("--config", config_path, "Experiment config file")->required();
  experiment->add_option("--out", out_dir, "Output directory")->required();
  experiment->add_option("--seed", seed, "Override experiment.seed");

  auto* count = app.add_subcommand("count-params", "Print itemized parameter counts");
  count->add_option("--config", config_path, "Experiment config file")->required();
  count->add_option("--seed", seed, "Ignored; accepted for symmetry with other verbs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*generate) {
      auto dirs = gcrnn::cmd_generate(load(config_path, seed), out_dir);
      for (const auto& d : dirs) std::cout << d.string() << '\n';
    } else if (*train) {
      for (const auto& s : gcrnn::cmd_train(load(config_path, seed), data_dir, out_dir))
        std::cout << gcrnn::to_string(s.architecture) << " parameters=" << s.parameters << ' '
                  << gcrnn::to_string(s.metric) << '=' << s.test_value << " best_epoch=" << s.best_epoch
                  << " wall_seconds=" << s.wall_seconds << '\n';
    } else if (*eval) {
      gcrnn::Metric metric;
      if (metric_name == "auto") {
        metric = gcrnn::load_network(model_path).spec.task == gcrnn::Task::regression ? gcrnn::Metric::mae
                                                                                       : gcrnn::Metric::accuracy;
      } else {
        metric = gcrnn::parse_metric(metric_name);
      }
      double value = gcrnn::cmd_eval(model_path, data_dir, metric, out_dir);
      std::cout.precision(17);
      std::cout << gcrnn::to_string(metric) << ' ' << value << '\n';
    } else if (*experiment) {
      auto result = gcrnn::cmd_experiment(load(config_path, seed), out_dir, &std::cout);
      gcrnn::write_results_csv(std::cout, result.rows, result.aggregates);
    } else if (*count) {
      gcrnn::print_parameter_table(std::cout, gcrnn::cmd_count_params(load(config_path, seed)));
    }
  } catch (const gcrnn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
