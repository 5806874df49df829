#include "fm/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;
using fm::Command;

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::path(testing::TempDir()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kToyCsv = "x,y\n1,0.4\n0.9,0.3\n-0.5,-1\n";

TEST(ParseConfig, MinimalSynthAppliesDefaults) {
  const auto cfg = fm::parse_config(
      Command::Bench,
      {{"run.task", "linear"}, {"synth.n", "100"}, {"synth.d", "3"}}, {},
      std::nullopt);
  EXPECT_EQ(cfg.folds, 5u);
  EXPECT_EQ(cfg.repeats, 50u);
  EXPECT_DOUBLE_EQ(cfg.epsilon, 0.8);
  EXPECT_EQ(cfg.strategy, fm::RepairStrategy::RegularizeTrim);
  ASSERT_EQ(cfg.methods.size(), 1u);
  EXPECT_EQ(cfg.methods[0], fm::MethodKind::FM);
  ASSERT_TRUE(cfg.synth.has_value());
  EXPECT_EQ(cfg.synth->true_omega, fm::Vec(3, 0.0));
}

TEST(ParseConfig, ZeroEpsilonWithFmIsError) {
  try {
    fm::parse_config(Command::Bench,
                     {{"run.task", "linear"},
                      {"synth.n", "10"},
                      {"synth.d", "1"},
                      {"run.epsilon", "0"}},
                     {}, std::nullopt);
    FAIL() << "expected ConfigError";
  } catch (const fm::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("epsilon must be positive"),
              std::string::npos);
  }
}

TEST(ParseConfig, BothSourcesIsError) {
  try {
    fm::parse_config(Command::Train,
                     {{"run.task", "linear"},
                      {"data.path", "foo.csv"},
                      {"data.target_index", "1"},
                      {"synth.n", "10"},
                      {"synth.d", "1"}},
                     {}, std::nullopt);
    FAIL() << "expected ConfigError";
  } catch (const fm::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("exactly one data source"),
              std::string::npos);
  }
}

TEST(ParseConfig, UnknownKeyIsNamed) {
  try {
    fm::parse_config(Command::Bench, {{"run.tsak", "linear"}}, {}, std::nullopt);
    FAIL() << "expected ConfigError";
  } catch (const fm::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.tsak"), std::string::npos);
  }
}

TEST(ParseConfig, MissingRequiredFieldsAreNamed) {
  // no task
  EXPECT_THROW(fm::parse_config(Command::Bench, {{"synth.n", "10"}, {"synth.d", "1"}},
                                {}, std::nullopt),
               fm::ConfigError);
  // file source without bounds
  try {
    fm::parse_config(Command::Train,
                     {{"run.task", "linear"},
                      {"data.path", "foo.csv"},
                      {"data.target_index", "1"}},
                     {}, std::nullopt);
    FAIL() << "expected ConfigError";
  } catch (const fm::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("data.bounds"), std::string::npos);
  }
}

TEST(ParseConfig, FlagsOverrideFileAndEnvSeedsDefaults) {
  const auto cfg = fm::parse_config(
      Command::Bench,
      {{"run.task", "linear"},
       {"synth.n", "10"},
       {"synth.d", "1"},
       {"run.epsilon", "0.4"}},
      {{"run.epsilon", "1.6"}}, std::string("99"));
  EXPECT_DOUBLE_EQ(cfg.epsilon, 1.6);  // command line wins
  EXPECT_EQ(cfg.seed, 99u);            // env provides the default seed

  const auto cfg2 = fm::parse_config(
      Command::Bench,
      {{"run.task", "linear"}, {"synth.n", "10"}, {"synth.d", "1"}},
      {{"run.seed", "7"}}, std::string("99"));
  EXPECT_EQ(cfg2.seed, 7u);  // --seed beats the environment
}

TEST(ParseConfig, TrainRequiresSingleMethod) {
  EXPECT_THROW(fm::parse_config(Command::Train,
                                {{"run.task", "linear"},
                                 {"synth.n", "10"},
                                 {"synth.d", "1"},
                                 {"run.methods", "fm,noprivacy"}},
                                {}, std::nullopt),
               fm::ConfigError);
}

TEST(ParseConfig, GridAndStrategyParsing) {
  const auto cfg = fm::parse_config(
      Command::Bench,
      {{"run.task", "logistic"},
       {"synth.n", "100"},
       {"synth.d", "2"},
       {"run.strategy", "rerun-once"},
       {"run.methods", "fm,noprivacy,truncated"},
       {"grid.epsilons", "3.2,1.6,0.8"},
       {"grid.rates", "0.5,1"},
       {"grid.dims", "1,2"}},
      {}, std::nullopt);
  EXPECT_EQ(cfg.strategy, fm::RepairStrategy::RerunOnce);
  EXPECT_EQ(cfg.methods.size(), 3u);
  EXPECT_EQ(cfg.grid.epsilons, (fm::Vec{3.2, 1.6, 0.8}));
  EXPECT_EQ(cfg.grid.sampling_rates, (fm::Vec{0.5, 1.0}));
  EXPECT_EQ(cfg.grid.dims, (std::vector<std::size_t>{1, 2}));
}

TEST(ReadConfigFile, SectionsAndComments) {
  const auto dir = temp_dir("cfg");
  const auto path = write_file(dir / "run.cfg",
                               "# comment\n"
                               "[run]\n"
                               "task = linear\n"
                               "epsilon = 1.6\n"
                               "; another comment\n"
                               "[synth]\n"
                               "n = 50\n"
                               "d = 2\n");
  const auto entries = fm::read_config_file(path);
  ASSERT_EQ(entries.size(), 4u);
  EXPECT_EQ(entries[0], (fm::KeyValue{"run.task", "linear"}));
  EXPECT_EQ(entries[1], (fm::KeyValue{"run.epsilon", "1.6"}));
  EXPECT_EQ(entries[2], (fm::KeyValue{"synth.n", "50"}));

  const auto bad = write_file(dir / "bad.cfg", "[run]\nnot a pair\n");
  EXPECT_THROW(fm::read_config_file(bad), fm::ConfigError);
}

TEST(RunTrain, ToyFilePrintsMinimizer) {
  const auto dir = temp_dir("train_toy");
  const auto csv = write_file(dir / "toy.csv", kToyCsv);

  fm::RunConfig cfg = fm::parse_config(
      Command::Train,
      {{"run.task", "linear"},
       {"data.path", csv.string()},
       {"data.target_index", "1"},
       {"data.pre_normalized", "true"},
       {"run.epsilon", "1e12"},
       {"run.output", (dir / "out").string()}},
      {}, std::nullopt);

  std::ostringstream out;
  EXPECT_EQ(fm::run(cfg, out), 0);
  const std::string text = out.str();
  const auto pos = text.find("omega = [");
  ASSERT_NE(pos, std::string::npos) << text;
  const double printed = std::stod(text.substr(pos + 9));
  EXPECT_NEAR(printed, 117.0 / 206.0, 1e-4);
  EXPECT_TRUE(fs::exists(dir / "out" / "model.json"));
}

TEST(RunTrain, MissingInputNamesPath) {
  fm::RunConfig cfg = fm::parse_config(
      Command::Train,
      {{"run.task", "linear"},
       {"data.path", "/no/such/input.csv"},
       {"data.target_index", "1"},
       {"data.pre_normalized", "true"}},
      {}, std::nullopt);
  std::ostringstream out;
  try {
    fm::run(cfg, out);
    FAIL() << "expected DataError";
  } catch (const fm::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/no/such/input.csv"),
              std::string::npos);
  }
}

TEST(RunBench, ByteIdenticalArtifactsForSameSeed) {
  const auto dir = temp_dir("bench_det");
  const std::vector<fm::KeyValue> base{
      {"run.task", "linear"},   {"synth.n", "80"},
      {"synth.d", "2"},         {"synth.omega", "0.5,-0.2"},
      {"synth.noise", "0.1"},   {"run.methods", "fm,noprivacy"},
      {"run.epsilon", "0.8"},   {"run.repeats", "2"},
      {"run.seed", "42"}};

  std::vector<std::string> reports, csvs;
  for (int round = 0; round < 2; ++round) {
    auto entries = base;
    const fs::path out_dir = dir / ("out" + std::to_string(round));
    entries.push_back({"run.output", out_dir.string()});
    const auto cfg = fm::parse_config(Command::Bench, entries, {}, std::nullopt);
    std::ostringstream out;
    EXPECT_EQ(fm::run(cfg, out), 0);
    reports.push_back(slurp(out_dir / "report.json"));
    csvs.push_back(slurp(out_dir / "cells.csv"));
  }
  EXPECT_FALSE(reports[0].empty());
  EXPECT_EQ(reports[0], reports[1]);
  EXPECT_EQ(csvs[0], csvs[1]);
}

TEST(RunSynth, EmitsLoadableFile) {
  const auto dir = temp_dir("synth_cmd");
  const auto cfg = fm::parse_config(Command::Synth,
                                    {{"run.task", "logistic"},
                                     {"synth.n", "120"},
                                     {"synth.d", "3"},
                                     {"synth.omega", "1.0"},
                                     {"run.output", (dir / "data.csv").string()}},
                                    {}, std::nullopt);
  std::ostringstream out;
  EXPECT_EQ(fm::run(cfg, out), 0);
  const auto loaded =
      fm::load_normalized(dir / "data.csv", 3, fm::Task::Logistic);
  EXPECT_EQ(loaded.n(), 120u);
  EXPECT_EQ(loaded.d(), 3u);
}

TEST(RunValidate, AllChecksPass) {
  const auto cfg =
      fm::parse_config(Command::Validate, {}, {{"run.seed", "3"}}, std::nullopt);
  std::ostringstream out;
  EXPECT_EQ(fm::run(cfg, out), 0);
  EXPECT_NE(out.str().find("[PASS] sensitivity-neighbor-bound"),
            std::string::npos);
  EXPECT_EQ(out.str().find("[FAIL]"), std::string::npos);
}

#ifdef FMREG_BINARY
int exit_code_of(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

TEST(Process, ExitCodesFollowTheContract) {
  const std::string bin = FMREG_BINARY;
  const auto dir = temp_dir("proc");
  write_file(dir / "toy.csv", kToyCsv);

  // 0: success
  EXPECT_EQ(exit_code_of(bin + " train --task linear --input " +
                         (dir / "toy.csv").string() +
                         " --target-index 1 --pre-normalized --epsilon 1e12" +
                         " --out " + (dir / "ok").string()),
            0);
  // 1: config error (epsilon = 0 with FM)
  EXPECT_EQ(exit_code_of(bin + " train --task linear --input " +
                         (dir / "toy.csv").string() +
                         " --target-index 1 --pre-normalized --epsilon 0"),
            1);
  // 2: data error (nonexistent path)
  EXPECT_EQ(exit_code_of(bin +
                         " train --task linear --input /no/such/file.csv"
                         " --target-index 1 --pre-normalized"),
            2);
  // 0: validate passes
  EXPECT_EQ(exit_code_of(bin + " validate"), 0);
}
#endif

}  // namespace
