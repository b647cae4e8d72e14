#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "support.hpp"

using namespace gcrnn;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / ("gcrnn_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.seed = 42;
  c.data.splits = {30, 10, 10};
  c.training.epochs = 2;
  c.training.batch_size = 10;
  c.model.architectures = {Architecture::gnn_baseline, Architecture::gcrnn_gnn, Architecture::ggcrnn_gnn};
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + GCRNN_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ------------------------------------------------------------------ config

TEST(Config, RoundTrip) {
  ExperimentConfig c = small_config();
  c.graph.p_inter = 0.125;
  c.training.learning_rate = 3e-4;
  std::ostringstream first;
  write_config(first, c);
  std::istringstream in(first.str());
  ExperimentConfig back = parse_config(in);
  std::ostringstream second;
  write_config(second, back);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.data.splits.train, 30u);
  EXPECT_EQ(back.graph.p_inter, 0.125);
  EXPECT_EQ(back.model.architectures, c.model.architectures);
}

TEST(Config, DefaultsWhenEmpty) {
  std::istringstream in("# nothing\n\n");
  ExperimentConfig c = parse_config(in);
  EXPECT_EQ(c.graph.n_nodes, 20u);
  EXPECT_EQ(c.data.splits.train, 10000u);
  EXPECT_EQ(c.training.batch_size, 100u);
}

TEST(Config, UnknownKeyReportsLine) {
  std::istringstream in("[graph]\nn_nodes = 20\nbogus = 3\n");
  try {
    parse_config(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
}

TEST(Config, RejectsMalformedInput) {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      parse_config(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("[graph]\nk = 3\nk = 4\n"), 3u);
  EXPECT_EQ(line_of("[graph]\nn_nodes = ten\n"), 2u);
  EXPECT_EQ(line_of("[graph]\nn_nodes = 20x\n"), 2u);
  EXPECT_EQ(line_of("n_nodes = 20\n"), 1u);
  EXPECT_EQ(line_of("[nowhere]\n"), 1u);
  EXPECT_EQ(line_of("[graph\n"), 1u);
  EXPECT_EQ(line_of("[model]\narchitectures = gcrnn_gnn, nope\n"), 2u);
  std::istringstream inconsistent("[graph]\nn_nodes = 10\ncommunities = 3\n");
  EXPECT_THROW(parse_config(inconsistent), InvalidArgument);
  EXPECT_THROW(load_config("/nonexistent/config.ini"), InvalidArgument);
}

// ------------------------------------------------------------------ generate

TEST(Generate, FullSizeRound) {
  ExperimentConfig c;
  ProcessDataset ds = generate_round(c, 0);
  EXPECT_EQ(ds.samples.size(), 12600u);
  EXPECT_EQ(ds.train.size(), 10000u);
  EXPECT_EQ(ds.validation.size(), 2400u);
  EXPECT_EQ(ds.test.size(), 200u);
  EXPECT_EQ(ds.n_nodes(), 20u);
  EXPECT_EQ(ds.samples[0].inputs.size(), 10u);
  EXPECT_EQ(ds.samples[0].targets.size(), 10u);
}

TEST(Generate, WritesOneDirectoryPerRound) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  c.rounds = 2;
  auto dirs = cmd_generate(c, tmp.path());
  ASSERT_EQ(dirs.size(), 2u);
  for (const auto& d : dirs) EXPECT_TRUE(fs::exists(d / "meta.txt")) << d;
  ProcessDataset r0 = load_dataset(dirs[0]), r1 = load_dataset(dirs[1]);
  EXPECT_EQ(r0.samples.size(), 50u);
  EXPECT_FALSE(r0.graph == r1.graph && r0.samples == r1.samples);
  EXPECT_EQ(r0.graph, generate_round(c, 0).graph);
}

TEST(Generate, ByteIdenticalOnRepeat) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  cmd_generate(c, tmp / "a");
  cmd_generate(c, tmp / "b");
  auto a = tree_contents(tmp / "a"), b = tree_contents(tmp / "b");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  c.seed = 43;
  cmd_generate(c, tmp / "c");
  EXPECT_NE(a, tree_contents(tmp / "c"));
}

TEST(Generate, EpicenterNeedsKnnGraph) {
  ExperimentConfig c = small_config();
  c.data.generator = "epicenter";
  EXPECT_THROW(validate(c), InvalidArgument);
  c.graph.kind = "knn";
  c.graph.n_nodes = 8;
  c.data.t_in = 12;
  ProcessDataset ds = generate_round(c, 0);
  EXPECT_EQ(ds.meta.task, Task::classification);
  EXPECT_EQ(ds.n_nodes(), 8u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_GE(ds.graph.neighbors(i).size(), 3u);
}

// ------------------------------------------------------------------ train

TEST(TrainCommand, WritesArtifactsAndCountsParameters) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  c.model.architectures = {Architecture::gcrnn_gnn};
  auto dirs = cmd_generate(c, tmp / "data");
  auto summaries = cmd_train(c, dirs[0], tmp / "out");
  ASSERT_EQ(summaries.size(), 1u);
  EXPECT_EQ(summaries[0].parameters, 480u);
  EXPECT_EQ(summaries[0].history.size(), 2u);
  for (const char* f : {"model.json", "history.csv", "summary.txt", "timing.txt"})
    EXPECT_TRUE(fs::exists(tmp / "out" / "gcrnn_gnn" / f)) << f;
  EXPECT_NE(slurp(tmp / "out" / "gcrnn_gnn" / "summary.txt").find("parameters = 480"), std::string::npos);
}

TEST(TrainCommand, ZeroEpochs) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  c.training.epochs = 0;
  auto dirs = cmd_generate(c, tmp / "data");
  auto summaries = cmd_train(c, dirs[0], tmp / "out");
  for (const auto& s : summaries) {
    EXPECT_TRUE(s.history.empty());
    EXPECT_TRUE(std::isfinite(s.test_value));
  }
  EXPECT_EQ(slurp(tmp / "out" / "gcrnn_gnn" / "history.csv"), "epoch,train_loss,val_loss\n");
}

TEST(TrainCommand, Repeatable) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  auto dirs = cmd_generate(c, tmp / "data");
  auto a = cmd_train(c, dirs[0], tmp / "a");
  auto b = cmd_train(c, dirs[0], tmp / "b");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].test_value, b[i].test_value);
    EXPECT_EQ(a[i].history, b[i].history);
  }
  for (Architecture arch : c.model.architectures)
    EXPECT_EQ(slurp(tmp / "a" / to_string(arch) / "model.json"), slurp(tmp / "b" / to_string(arch) / "model.json"));
}

TEST(TrainCommand, RoundSeedsFollowDirectoryName) {
  EXPECT_EQ(round_of("runs/round_03"), 3u);
  EXPECT_EQ(round_of("runs/round_03/"), 3u);
  EXPECT_EQ(round_of("runs/round_12/data"), 12u);
  EXPECT_EQ(round_of("runs/data"), 0u);
  EXPECT_EQ(round_of("round_x"), 0u);
  EXPECT_NE(round_seeds(1, 0).init, round_seeds(1, 1).init);
  EXPECT_NE(round_seeds(1, 0).graph, round_seeds(2, 0).graph);
}

// ------------------------------------------------------------------ eval

TEST(EvalCommand, MatchesEvaluateAndAppendsCsv) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  c.model.architectures = {Architecture::ggcrnn_gnn};
  auto dirs = cmd_generate(c, tmp / "data");
  auto s = cmd_train(c, dirs[0], tmp / "out");
  const fs::path model = tmp / "out" / "ggcrnn_gnn" / "model.json";
  const double v1 = cmd_eval(model, dirs[0], Metric::mae, tmp / "results.csv");
  const double v2 = cmd_eval(model, dirs[0], Metric::mae, tmp / "results.csv");
  EXPECT_EQ(v1, v2);
  EXPECT_EQ(v1, s[0].test_value);
  EXPECT_EQ(v1, evaluate(load_network(model.string()), load_dataset(dirs[0]), Split::test, Metric::mae));
  std::istringstream csv(slurp(tmp / "results.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "model,data,metric,value");
  EXPECT_EQ(lines[1], lines[2]);
}

TEST(EvalCommand, IncompatibleDataNamesBothShapes) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  c.model.architectures = {Architecture::gcrnn_gnn};
  auto dirs = cmd_generate(c, tmp / "data20");
  cmd_train(c, dirs[0], tmp / "out");
  c.graph.n_nodes = 12;
  auto other = cmd_generate(c, tmp / "data12");
  try {
    cmd_eval(tmp / "out" / "gcrnn_gnn" / "model.json", other[0], Metric::mae);
    FAIL();
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("20 nodes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("12 nodes"), std::string::npos) << msg;
  }
}

// ------------------------------------------------------------------ experiment

TEST(ExperimentCommand, RowsAndAggregates) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  c.rounds = 10;
  c.training.epochs = 1;
  std::ostringstream progress;
  ExperimentResult r = cmd_experiment(c, tmp.path(), &progress);
  ASSERT_EQ(r.rows.size(), 30u);
  ASSERT_EQ(r.aggregates.size(), 3u);
  std::istringstream csv(slurp(tmp / "results.csv"));
  std::string line;
  std::size_t n_round = 0, n_agg = 0;
  std::getline(csv, line);
  EXPECT_EQ(line, "kind,round,architecture,parameters,metric,value,std");
  while (std::getline(csv, line)) (line.rfind("round,", 0) == 0 ? n_round : n_agg) += 1;
  EXPECT_EQ(n_round, 30u);
  EXPECT_EQ(n_agg, 3u);
  for (const auto& agg : r.aggregates) {
    std::vector<double> v;
    for (const auto& row : r.rows)
      if (row.architecture == agg.architecture) v.push_back(row.value);
    ASSERT_EQ(v.size(), 10u);
    double mean = 0.0;
    for (double x : v) mean += x / 10.0;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(agg.mean, mean, 1e-14);
    EXPECT_NEAR(agg.stddev, std::sqrt(ss / 9.0), 1e-14);
  }
  EXPECT_TRUE(fs::exists(tmp / "round_09" / "data" / "meta.txt"));
  EXPECT_TRUE(fs::exists(tmp / "config.ini"));
  EXPECT_NE(progress.str().find("round_09 ggcrnn_gnn"), std::string::npos);
}

TEST(ExperimentCommand, SingleRoundHasZeroSpread) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  c.training.epochs = 1;
  ExperimentResult r = cmd_experiment(c, tmp.path());
  for (const auto& agg : r.aggregates) {
    EXPECT_EQ(agg.rounds, 1u);
    EXPECT_EQ(agg.stddev, 0.0);
  }
}

TEST(ExperimentCommand, MatchesGenerateThenTrain) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  c.rounds = 2;
  c.model.architectures = {Architecture::ggcrnn_gnn};
  ExperimentResult r = cmd_experiment(c, tmp / "exp");
  auto dirs = cmd_generate(c, tmp / "gen");
  auto s = cmd_train(c, dirs[1], tmp / "train");
  EXPECT_EQ(r.rows[1].value, s[0].test_value);
  EXPECT_EQ(slurp(tmp / "exp" / "round_01" / "ggcrnn_gnn" / "history.csv"),
            slurp(tmp / "train" / "ggcrnn_gnn" / "history.csv"));
}

// ------------------------------------------------------------------ count-params

TEST(CountParamsCommand, Table) {
  ExperimentConfig c;
  c.model.architectures = {Architecture::gnn_baseline, Architecture::gcrnn_gnn, Architecture::ggcrnn_gnn,
                           Architecture::gcrnn_localmlp, Architecture::ggcrnn_localmlp};
  auto table = cmd_count_params(c);
  ASSERT_EQ(table.size(), 5u);
  EXPECT_EQ(table[0].second.total(), 480u);
  EXPECT_EQ(table[1].second.total(), 480u);
  EXPECT_EQ(table[2].second.total(), 1760u);
  EXPECT_EQ(table[3].second.total(), 450u);
  EXPECT_EQ(table[4].second.total(), 1730u);

  c.graph.kind = "knn";
  c.graph.n_nodes = 8;
  c.data.generator = "epicenter";
  c.model.architectures = {Architecture::gnn_baseline};
  c.data.t_in = 60;
  EXPECT_EQ(cmd_count_params(c)[0].second.total(), 14880u);
  c.data.t_in = 120;
  EXPECT_EQ(cmd_count_params(c)[0].second.total(), 58560u);

  std::ostringstream os;
  print_parameter_table(os, table);
  EXPECT_NE(os.str().find("ggcrnn_gnn"), std::string::npos);
  EXPECT_NE(os.str().find("1760"), std::string::npos);
}

// ------------------------------------------------------------------ binary

TEST(CliBinary, ExitCodes) {
  TempDir tmp;
  ExperimentConfig c = small_config();
  c.training.epochs = 1;
  {
    std::ofstream os(tmp / "ok.ini");
    write_config(os, c);
  }
  const std::string ok = (tmp / "ok.ini").string();
  const fs::path log = tmp / "log.txt";

  EXPECT_EQ(run_cli("--help", log), 0);
  EXPECT_EQ(run_cli("count-params --config \"" + ok + "\"", log), 0);
  EXPECT_NE(slurp(log).find("gcrnn_gnn"), std::string::npos);
  EXPECT_EQ(run_cli("generate --config \"" + ok + "\" --out \"" + (tmp / "gen").string() + "\" --seed 7", log), 0);
  EXPECT_TRUE(fs::exists(tmp / "gen" / "round_00" / "meta.txt"));
  EXPECT_EQ(run_cli("train --config \"" + ok + "\" --data \"" + (tmp / "gen" / "round_00").string() + "\" --out \"" +
                        (tmp / "train").string() + "\"",
                    log),
            0);
  EXPECT_EQ(run_cli("eval --model \"" + (tmp / "train" / "gcrnn_gnn" / "model.json").string() + "\" --data \"" +
                        (tmp / "gen" / "round_00").string() + "\"",
                    log),
            0);
  EXPECT_EQ(slurp(log).rfind("mae ", 0), 0u) << slurp(log);

  EXPECT_EQ(run_cli("", log), 1);
  EXPECT_EQ(run_cli("frobnicate", log), 1);
  EXPECT_EQ(run_cli("count-params", log), 1);
  EXPECT_EQ(run_cli("count-params --config /nonexistent.ini", log), 1);
  write_text(tmp / "bad.ini", "[graph]\nn_nodes = 20\nbogus = 1\n");
  EXPECT_EQ(run_cli("count-params --config \"" + (tmp / "bad.ini").string() + "\"", log), 1);
  EXPECT_NE(slurp(log).find("line 3"), std::string::npos) << slurp(log);
  EXPECT_EQ(run_cli("eval --model /nonexistent.json --data \"" + (tmp / "gen" / "round_00").string() + "\"", log), 1);

  // An unnormalized shift operator makes the diffusion process blow up.
  c.graph.gso = GsoKind::adjacency;
  {
    std::ofstream os(tmp / "diverge.ini");
    write_config(os, c);
  }
  EXPECT_EQ(run_cli("generate --config \"" + (tmp / "diverge.ini").string() + "\" --out \"" +
                        (tmp / "div").string() + "\"",
                    log),
            2);
  EXPECT_NE(slurp(log).find("numerical error"), std::string::npos) << slurp(log);
}
