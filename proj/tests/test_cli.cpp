#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "exotune/commands.hpp"
#include "exotune/plot.hpp"

using namespace exotune;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("exotune_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  // A run small enough for unit tests.
  fs::path write_config(json overrides = json::object()) {
    json j = {{"task", "vertical"},
              {"seed", 3},
              {"collect", {{"grid", "20:50:30"}, {"episodes", 1}, {"episode_seconds", 2.0}}},
              {"train", {{"steps", 100}, {"hidden", {8, 8}}, {"sample_count", 16}}},
              {"eval", {{"episodes", 2}, {"episode_seconds", 2.0}}}};
    j.merge_patch(overrides);
    const auto p = path("config" + std::to_string(config_count_++) + ".json");
    std::ofstream(p) << j.dump(2);
    return p;
  }

  int run(const std::string& cmd, const CommandArgs& args) {
    out_.str("");
    err_.str("");
    return run_command(cmd, args, out_, err_);
  }

  CommandArgs args_with(const fs::path& config, const fs::path& out) {
    CommandArgs a;
    a.config = config;
    a.out = out;
    return a;
  }

  fs::path collect(const fs::path& config, const std::string& name = "ds.data") {
    const auto out = path(name);
    EXPECT_EQ(run("collect", args_with(config, out)), kExitOk) << err_.str();
    return out;
  }

  fs::path train(const fs::path& config, const fs::path& dataset, const std::string& name = "ckpt.json") {
    auto a = args_with(config, path(name));
    a.datasets = {dataset};
    EXPECT_EQ(run("train", a), kExitOk) << err_.str();
    return path(name);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  int config_count_ = 0;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(CliTest, ConfigRejectsUnknownKeyWithPath) {
  const auto cfg = write_config({{"train", {{"gama", 0.9}}}});
  EXPECT_EQ(run("collect", args_with(cfg, path("x.data"))), kExitConfig);
  EXPECT_NE(err_.str().find("train.gama"), std::string::npos) << err_.str();
  EXPECT_FALSE(fs::exists(path("x.data")));
}

TEST_F(CliTest, ConfigRejectsWrongTypesAndRanges) {
  EXPECT_THROW(run_config_from_json(json{{"seed", "abc"}}), ConfigError);
  EXPECT_THROW(run_config_from_json(json{{"train", {{"gamma", 1.5}}}}), ConfigError);
  EXPECT_THROW(run_config_from_json(json{{"task", "diagonal"}}), ConfigError);
  EXPECT_NO_THROW(run_config_from_json(json::object()));
  const auto round = run_config_from_json(to_json(run_config_from_json(json{{"seed", 5}})));
  EXPECT_EQ(round.seed, 5u);
}

TEST_F(CliTest, FlagsOverrideConfig) {
  auto cfg = run_config_from_json(json{{"seed", 1}, {"collect", {{"episodes", 4}}}, {"eval", {{"episodes", 7}}}});
  Overrides o;
  o.seed = 9;
  o.episodes = 2;
  o.task = Task::kHorizontal;
  o.grid = GridSpec::parse("20:40:10");
  apply_overrides(cfg, o, "collect");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.collect_episodes, 2);
  EXPECT_EQ(cfg.eval_episodes, 7);
  EXPECT_EQ(cfg.task, Task::kHorizontal);
  EXPECT_EQ(cfg.effective_user().task, Task::kHorizontal);
  EXPECT_EQ(cfg.grid.high, 40.0);
  apply_overrides(cfg, o, "eval");
  EXPECT_EQ(cfg.eval_episodes, 2);
}

TEST_F(CliTest, CollectIsByteIdenticalForSameSeed) {
  const auto cfg = write_config();
  const auto a = collect(cfg, "a.data");
  const auto b = collect(cfg, "b.data");
  EXPECT_EQ(slurp(a), slurp(b));
  const auto ds = read_dataset(a);
  EXPECT_EQ(ds.header.grid.cell_count(), 4u);
  EXPECT_EQ(ds.transitions.size(), 4u * 100u);
}

TEST_F(CliTest, TrainIsByteIdenticalAndRoundTrips) {
  const auto cfg = write_config();
  const auto ds = collect(cfg);
  const auto ck1 = train(cfg, ds, "c1.json");
  const auto ck2 = train(cfg, ds, "c2.json");
  EXPECT_EQ(slurp(ck1), slurp(ck2));
  EXPECT_EQ(slurp(path("c1.loss.csv")), slurp(path("c2.loss.csv")));
  const auto losses = parse_loss_csv(slurp(path("c1.loss.csv")));
  EXPECT_EQ(losses.size(), 100u);

  // Save then load gives bit-identical greedy thresholds.
  const auto checkpoint = load_checkpoint(ck1);
  const Learner restored = restore_learner(checkpoint);
  std::vector<double> scratch;
  const Learner original = train_learner(checkpoint.config, read_dataset(ds), scratch);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> p(0, 130), e(0, 100);
  for (int i = 0; i < 100; ++i) {
    const Observation o{p(gen), e(gen), e(gen)};
    Rng r1(i), r2(i);
    EXPECT_EQ(original.select_actions(o, r1), restored.select_actions(o, r2));
  }
  // Re-serializing a loaded checkpoint is lossless.
  save_checkpoint(path("c3.json"), checkpoint);
  EXPECT_EQ(slurp(ck1), slurp(path("c3.json")));
}

TEST_F(CliTest, ZeroStepsWritesEmptyLossCurve) {
  const auto cfg = write_config({{"train", {{"steps", 0}}}});
  const auto ck = train(cfg, collect(cfg));
  EXPECT_TRUE(parse_loss_csv(slurp(path("ckpt.loss.csv"))).empty());
  EXPECT_EQ(load_checkpoint(ck).step, 0);
}

TEST_F(CliTest, DivergenceExitsWithFour) {
  const auto cfg = write_config({{"train", {{"learning_rate", 1e200}, {"steps", 50}}}});
  auto a = args_with(cfg, path("ck.json"));
  a.datasets = {collect(cfg)};
  EXPECT_EQ(run("train", a), kExitDivergence) << err_.str();
  EXPECT_FALSE(fs::exists(path("ck.json")));
}

TEST_F(CliTest, ErrorsMapToExitCodes) {
  const auto cfg = write_config();
  CommandArgs a = args_with(cfg, path("ck.json"));
  a.datasets = {path("missing.data")};
  EXPECT_EQ(run("train", a), kExitIo);

  a = args_with(path("missing.json"), path("x.data"));
  EXPECT_EQ(run("collect", a), kExitIo);

  std::ofstream(path("bad.json")) << "{not json";
  a = args_with(path("bad.json"), path("x.data"));
  EXPECT_EQ(run("collect", a), kExitConfig);

  std::ofstream(path("corrupt.data")) << "{\"schema_version\":1}\n1,2,3\n";
  a = args_with(cfg, path("ck.json"));
  a.datasets = {path("corrupt.data")};
  EXPECT_EQ(run("train", a), kExitConfig);

  a = args_with(cfg, path("nodir/sub/x.data"));
  fs::create_directories(path("nodir"));
  std::ofstream(path("nodir/sub")) << "file in the way";
  EXPECT_EQ(run("collect", a), kExitIo);

  EXPECT_EQ(run("nonsense", args_with(cfg, path("y"))), kExitConfig);
}

TEST_F(CliTest, CorruptCheckpointIsRejected) {
  const auto cfg = write_config();
  const auto ck = train(cfg, collect(cfg));
  auto j = json::parse(slurp(ck));
  j["schema_version"] = 999;
  std::ofstream(path("v999.json")) << j.dump();
  EXPECT_THROW(load_checkpoint(path("v999.json")), CheckpointError);
  j = json::parse(slurp(ck));
  j["agents"][0]["prediction"]["layers"][0]["bias"].erase(0);
  std::ofstream(path("shape.json")) << j.dump();
  EXPECT_THROW(load_checkpoint(path("shape.json")), CheckpointError);

  CommandArgs a = args_with(cfg, path("m.csv"));
  a.checkpoint = path("shape.json");
  EXPECT_EQ(run("eval", a), kExitConfig);
}

TEST_F(CliTest, EvalThresholdsStayInRange) {
  const auto cfg = write_config();
  const auto ck = train(cfg, collect(cfg));
  CommandArgs a = args_with(cfg, path("metrics.csv"));
  a.checkpoint = ck;
  ASSERT_EQ(run("eval", a), kExitOk) << err_.str();
  std::istringstream in(slurp(path("metrics.thresholds.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "episode,step,time,p,E_b,E_t,th_b,th_t,r");
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<double> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(std::stod(cell));
    ASSERT_EQ(f.size(), 9u);
    EXPECT_GE(f[6], 20.0);
    EXPECT_LE(f[6], 50.0);
    EXPECT_GE(f[7], 20.0);
    EXPECT_LE(f[7], 50.0);
    ++rows;
  }
  EXPECT_EQ(rows, 2 * 100);
  // Metrics: one row per episode plus the mean row.
  const auto metrics = slurp(path("metrics.csv"));
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 4);
}

TEST_F(CliTest, ZeroWeightCheckpointGivesConstantThresholds) {
  const auto cfg = write_config();
  const auto ck = train(cfg, collect(cfg));
  auto j = json::parse(slurp(ck));
  for (auto& agent : j["agents"]) {
    for (auto& layer : agent["prediction"]["layers"]) {
      for (auto& row : layer["weights"])
        for (auto& w : row) w = 0.0;
      for (auto& b : layer["bias"]) b = 0.0;
    }
  }
  std::ofstream(path("zero.json")) << j.dump();
  CommandArgs a = args_with(cfg, path("z.csv"));
  a.checkpoint = path("zero.json");
  ASSERT_EQ(run("eval", a), kExitOk) << err_.str();
  std::istringstream in(slurp(path("z.thresholds.csv")));
  std::string line, first_pair;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto cut = line.find(',', line.find(',', line.find(',', line.find(',', line.find(',', line.find(',') + 1) + 1) + 1) + 1) + 1);
    const auto pair = line.substr(cut + 1, line.rfind(',') - cut - 1);
    if (first_pair.empty()) first_pair = pair;
    EXPECT_EQ(pair, first_pair);
  }
  EXPECT_FALSE(first_pair.empty());
}

TEST_F(CliTest, GridscanSingleCellMatchesFixedRollouts) {
  const auto cfg_path = write_config();
  CommandArgs a = args_with(cfg_path, path("oracle.csv"));
  a.overrides.grid = GridSpec::parse("30:30:5");
  ASSERT_EQ(run("gridscan", a), kExitOk) << err_.str();
  const auto cells = parse_oracle_csv(slurp(path("oracle.csv")));
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0].action, (ThresholdAction{30, 30}));

  auto config = load_run_config(cfg_path);
  apply_overrides(config, a.overrides, "gridscan");
  const Policy fixed = [](const SimState&) { return ThresholdAction{30, 30}; };
  const auto eval = evaluate_policy(fixed, config, config.eval_episodes);
  EXPECT_NEAR(cells[0].mean_reward, eval.mean.mean_reward, 1e-12);
}

TEST_F(CliTest, InputsAreNotModified) {
  const auto cfg = write_config();
  const auto ds = collect(cfg);
  const auto cfg_before = slurp(cfg), ds_before = slurp(ds);
  const auto ck = train(cfg, ds);
  const auto ck_before = slurp(ck);
  CommandArgs a = args_with(cfg, path("m.csv"));
  a.checkpoint = ck;
  ASSERT_EQ(run("eval", a), kExitOk);
  EXPECT_EQ(slurp(cfg), cfg_before);
  EXPECT_EQ(slurp(ds), ds_before);
  EXPECT_EQ(slurp(ck), ck_before);
}

TEST_F(CliTest, PlotDispatchesOnInputType) {
  const auto cfg = write_config();
  const auto ds = collect(cfg);
  const auto ck = train(cfg, ds);
  CommandArgs a = args_with(cfg, path("m.csv"));
  a.checkpoint = ck;
  ASSERT_EQ(run("eval", a), kExitOk);
  a = args_with(cfg, path("oracle.csv"));
  ASSERT_EQ(run("gridscan", a), kExitOk);

  for (const auto& in : {ds, path("ckpt.loss.csv"), path("oracle.csv"), path("m.thresholds.csv")}) {
    CommandArgs p;
    p.input = in;
    p.out = path(in.filename().string() + ".svg");
    ASSERT_EQ(run("plot", p), kExitOk) << in << err_.str();
    const auto svg = slurp(p.out);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
  }
  CommandArgs p;
  p.input = path("m.csv");
  p.out = path("m.svg");
  EXPECT_EQ(run("plot", p), kExitConfig);
}

TEST(ConfidenceBand, MatchesDirectComputation) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<std::vector<double>> traces(5, std::vector<double>(50));
  for (auto& t : traces)
    for (auto& x : t) x = n(gen);
  const auto band = confidence_band(traces);
  for (std::size_t s = 0; s < 50; ++s) {
    double mean = 0.0;
    for (const auto& t : traces) mean += t[s] / 5.0;
    double var = 0.0;
    for (const auto& t : traces) var += (t[s] - mean) * (t[s] - mean) / 4.0;
    const double half = 1.96 * std::sqrt(var / 5.0);
    EXPECT_NEAR(band.mean[s], mean, 1e-12);
    EXPECT_NEAR(band.upper[s] - band.mean[s], half, 1e-12);
    EXPECT_NEAR(band.mean[s] - band.lower[s], half, 1e-12);
  }
}

TEST(ConfidenceBand, DegenerateCases) {
  const auto one = confidence_band({{1.0, 2.0, 3.0}});
  EXPECT_EQ(one.lower, one.mean);
  EXPECT_EQ(one.upper, one.mean);
  const auto same = confidence_band({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
  EXPECT_EQ(same.lower, same.upper);
  const auto ragged = confidence_band({{1.0, 2.0, 3.0}, {3.0}});
  EXPECT_EQ(ragged.count, (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_EQ(ragged.mean[0], 2.0);
  EXPECT_EQ(ragged.lower[2], 3.0);
}

TEST(LossSummary, SmoothedEnds) {
  std::vector<double> losses(300);
  for (std::size_t i = 0; i < losses.size(); ++i) losses[i] = i < 100 ? 2.0 : (i >= 200 ? 0.5 : 1.0);
  const auto s = summarize_losses(losses);
  EXPECT_EQ(s.steps, 300);
  EXPECT_DOUBLE_EQ(*s.initial_smoothed, 2.0);
  EXPECT_DOUBLE_EQ(*s.final_smoothed, 0.5);
  EXPECT_FALSE(summarize_losses({}).initial_smoothed.has_value());
}
