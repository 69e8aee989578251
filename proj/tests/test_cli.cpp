#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "chaosnet/checkpoint.hpp"
#include "chaosnet/commands.hpp"
#include "chaosnet/config.hpp"

using namespace chaosnet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_rows(const fs::path& csv, const std::string& split) {
  std::ifstream in(csv);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += line.find("," + split + ",") != std::string::npos;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("chaosnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& extra, const fs::path& dataset) {
    const fs::path p = dir_ / "run.ini";
    std::ofstream(p) << "[data]\npath = " << dataset.string() << "\n" << extra
                     << "\n[model]\nnum_kernels = 6\nrbf_out = 6\nhidden = 6\nbranch_out = 4\nmerge = 6\n"
                     << "[train]\nepochs = 2\nbatch_size = 32\nseed = 11\n[run]\nout = out\n";
    return p;
  }

  fs::path fixture() const { return fs::path(CHAOSNET_DATA_DIR) / "fixture_100.csv"; }

  int run(int (*cmd)(const CommandOptions&, std::ostream&, std::ostream&), CommandOptions opts) {
    log_.str("");
    err_.str("");
    return cmd(opts, log_, err_);
  }

  fs::path dir_;
  std::ostringstream log_, err_;
};

}  // namespace

TEST_F(Cli, MissingDatasetIsDataError) {
  const fs::path missing = dir_ / "nowhere.csv";
  EXPECT_EQ(run(cmd_train, {.config = write_config("", missing)}), kExitData);
  EXPECT_NE(err_.str().find(missing.string()), std::string::npos) << err_.str();
}

TEST_F(Cli, BadConfigIsConfigError) {
  const fs::path p = dir_ / "bad.ini";
  std::ofstream(p) << "[model]\nlayers = 3\n";
  EXPECT_EQ(run(cmd_train, {.config = p}), kExitConfig);
  EXPECT_FALSE(err_.str().empty());
}

TEST_F(Cli, TrainWritesArtifactsPerModel) {
  const fs::path cfg = write_config("", fixture());
  ASSERT_EQ(run(cmd_train, {.config = cfg}), kExitOk) << err_.str();
  const fs::path out = dir_ / "out";
  for (const char* m : {"object1", "object2"}) {
    const fs::path losses = out / (std::string(m) + ".losses.csv");
    EXPECT_EQ(count_rows(losses, "train"), 2u) << m;
    EXPECT_EQ(count_rows(losses, "test"), 2u) << m;
    EXPECT_TRUE(fs::exists(out / (std::string(m) + ".checkpoint.json")));
    EXPECT_TRUE(fs::exists(out / (std::string(m) + ".losses.svg")));
  }
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 11);
  EXPECT_EQ(manifest["dataset"]["records"], 100);
  EXPECT_EQ(manifest["dataset"]["sha256"], sha256_file(fixture()));
  EXPECT_EQ(manifest["dataset"]["sha256"].get<std::string>().size(), 64u);
}

TEST_F(Cli, SeedFlagOverridesConfig) {
  const fs::path cfg = write_config("models = object1", fixture());
  ASSERT_EQ(run(cmd_train, {.config = cfg, .seed = 5, .out = dir_ / "flag"}), kExitOk) << err_.str();
  EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "flag" / "manifest.json"))["seed"], 5);
}

TEST_F(Cli, TrainIsDeterministic) {
  const fs::path cfg = write_config("models = object1", fixture());
  ASSERT_EQ(run(cmd_train, {.config = cfg, .out = dir_ / "a"}), kExitOk) << err_.str();
  ASSERT_EQ(run(cmd_train, {.config = cfg, .out = dir_ / "b"}), kExitOk) << err_.str();
  for (const char* f : {"object1.checkpoint.json", "object1.losses.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  auto ma = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
  auto mb = nlohmann::json::parse(slurp(dir_ / "b" / "manifest.json"));
  ma["config"].erase("run.out");
  mb["config"].erase("run.out");
  EXPECT_EQ(ma.dump(), mb.dump());
}

TEST_F(Cli, CompareEmitsTwoCurves) {
  const fs::path cfg = write_config("models = object2", fixture());
  ASSERT_EQ(run(cmd_compare, {.config = cfg}), kExitOk) << err_.str();
  const fs::path out = dir_ / "out";
  std::size_t curves = 0;
  for (const auto& e : fs::directory_iterator(out)) {
    curves += e.path().filename().string().ends_with(".losses.csv");
  }
  EXPECT_EQ(curves, 2u);

  const RunConfig rc = load_config(cfg);
  std::ifstream summary(out / "compare_summary.csv");
  std::string line;
  std::getline(summary, line);
  EXPECT_EQ(line, "architecture,parameters,final_train_loss,best_train_loss,final_test_loss");
  std::size_t rows = 0;
  while (std::getline(summary, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    ModelConfig mc = rc.model;
    mc.architecture = *parse_architecture(line.substr(0, c1));
    EXPECT_EQ(std::stoull(line.substr(c1 + 1, c2 - c1 - 1)), make_model(mc)->count_parameters()) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 2u);
  EXPECT_EQ(nlohmann::json::parse(slurp(out / "manifest.json"))["seed"], 11);
}

TEST_F(Cli, RolloutDefaultsToHundredSteps) {
  const fs::path cfg = write_config("models = object1", fixture());
  ASSERT_EQ(run(cmd_train, {.config = cfg}), kExitOk) << err_.str();
  ASSERT_EQ(run(cmd_rollout, {.config = cfg}), kExitOk) << err_.str();
  const std::string csv = slurp(dir_ / "out" / "object1.trajectory.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 101);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "object1.trajectory.svg"));

  ASSERT_EQ(run(cmd_rollout, {.config = cfg, .steps = 7}), kExitOk) << err_.str();
  const std::string short_csv = slurp(dir_ / "out" / "object1.trajectory.csv");
  EXPECT_EQ(std::count(short_csv.begin(), short_csv.end(), '\n'), 8);
}

TEST_F(Cli, GradcheckPasses) {
  EXPECT_EQ(run(cmd_gradcheck, {}), kExitOk) << log_.str() << err_.str();
  EXPECT_NE(log_.str().find("worst relative error"), std::string::npos);
}

TEST_F(Cli, EvaluatePerfectModelReportsZero) {
  // Training rows sweep [-1, 1] in every object-1 column; every test target sits at 0.5,
  // which a model with a zero head and bias 0.5 reproduces exactly.
  const fs::path csv = dir_ / "perfect.csv";
  {
    std::ofstream out(csv);
    out << "time,distance,angle1,pos1x,pos1y,angle2,pos2x,pos2y\n";
    for (int i = 0; i < 100; ++i) {
      const double v = i <= 80 ? std::cos(i * M_PI / 10.0) : 0.5;
      out << 0.05 * i << ',' << i << ',' << v << ',' << v << ',' << v << ',' << -i << ',' << i << ',' << i << '\n';
    }
  }
  const fs::path cfg = write_config("models = object1", csv);
  ASSERT_EQ(run(cmd_train, {.config = cfg}), kExitOk) << err_.str();

  const fs::path ck_path = dir_ / "out" / "object1.checkpoint.json";
  auto ck = nlohmann::ordered_json::parse(slurp(ck_path));
  for (auto& p : ck["parameters"]) {
    if (p["layer"] != "head") continue;
    for (auto& v : p["values"]) v = p["name"] == "weight" ? 0.0 : 0.5;
  }
  std::ofstream(ck_path) << ck.dump(1);

  ASSERT_EQ(run(cmd_evaluate, {.config = cfg}), kExitOk) << err_.str();
  const auto metrics = nlohmann::json::parse(slurp(dir_ / "out" / "object1.metrics.json"));
  EXPECT_EQ(metrics["mse_overall"].get<double>(), 0.0);
  EXPECT_EQ(metrics["samples"], 19);
}

TEST_F(Cli, IncompatibleCheckpointIsConfigError) {
  const fs::path cfg = write_config("models = object1", fixture());
  ASSERT_EQ(run(cmd_train, {.config = cfg}), kExitOk) << err_.str();
  const fs::path other = dir_ / "other.ini";
  std::string text = slurp(cfg);
  text.replace(text.find("[model]\n"), 8, "[model]\narchitecture = single_sequential\n");
  std::ofstream(other) << text;
  const fs::path ck = dir_ / "out" / "object1.checkpoint.json";
  EXPECT_EQ(run(cmd_evaluate, {.config = other, .checkpoint = ck}), kExitConfig);
  EXPECT_NE(err_.str().find("multi_branch("), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("single_sequential("), std::string::npos) << err_.str();
  EXPECT_EQ(run(cmd_rollout, {.config = other, .checkpoint = ck}), kExitConfig);
}
