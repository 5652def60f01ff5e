// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/cli.hpp"
#include "cli/config.hpp"
#include "rpgan/io/errors.hpp"

namespace rpgan::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "rpgan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rpgan_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const auto path = dir_ / name;
    std::ofstream(path) << text;
    return path.string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string ring_config(std::size_t steps) {
    return write("ring.cfg", "model.instances = 3,3,2\nmodel.z_dim = 4\nmodel.hidden = 8\n"
                             "data.samples = 500\ntrain.d_steps = 1\ntrain.batch = 16\ntrain.steps = " +
                                 std::to_string(steps) + "\ndisc.hidden = 8\n");
  }

  std::string linear_config() {
    return write("lin.cfg", "model.kind = linear\nmodel.instances = 2,3,3,2\nmodel.widths = 4,6,6,6,5\n"
                            "data.source = none\ntrain.steps = 0\n");
  }

  fs::path dir_;
};

TEST(RunConfig, RejectsUnknownAndDuplicateKeys) {
  EXPECT_THROW(RunConfig::parse("model.colour = 3\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("train.steps = 3\ntrain.steps = 4\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("train.steps 3\n"), ConfigError);
  const auto cfg = RunConfig::parse("# comment\n\ntrain.steps = 12  # trailing\nmodel.instances = 4, 5\n");
  EXPECT_EQ(cfg.size("train.steps"), 12u);
  EXPECT_EQ(cfg.sizes("model.instances"), (std::vector<std::size_t>{4, 5}));
  EXPECT_TRUE(cfg.explicit_keys().contains("train.steps"));
  EXPECT_FALSE(cfg.explicit_keys().contains("train.lr"));
}

TEST(RunConfig, ErrorNamesFileAndLine) {
  try {
    RunConfig::parse("train.steps = 1\nbogus.key = 2\n", "x.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x.cfg:2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus.key"), std::string::npos);
  }
}

TEST(RunConfig, OverlayCopiesOnlyExplicitKeys) {
  auto base = RunConfig::parse("train.steps = 7\ntrain.lr = 0.5\n");
  base.overlay(RunConfig::parse("train.steps = 9\n"));
  EXPECT_EQ(base.size("train.steps"), 9u);
  EXPECT_DOUBLE_EQ(base.real("train.lr"), 0.5);
}

TEST_F(CliTest, HelpExitsZeroAndMissingSubcommandIsConfigError) {
  EXPECT_EQ(invoke({"--help"}).code, kOk);
  EXPECT_EQ(invoke({}).code, kConfigError);
  EXPECT_EQ(invoke({"train"}).code, kConfigError);
  const auto help = invoke({"train", "--help"});
  EXPECT_EQ(help.code, kOk);
  EXPECT_NE(help.out.find("train.d_steps"), std::string::npos);
}

TEST_F(CliTest, MissingDatasetPathNamesTheKey) {
  const auto r = invoke({"train", "--config", write("idx.cfg", "data.source = idx\n"), "--out", path("o")});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("data.images"), std::string::npos);
  const auto r2 = invoke({"train", "--config",
                          write("idx2.cfg", "data.source = idx\ndata.images = " + path("nope") + "\n"),
                          "--out", path("o")});
  EXPECT_EQ(r2.code, kConfigError);
  EXPECT_NE(r2.err.find("data.images"), std::string::npos);
}

TEST_F(CliTest, UnknownKeyIsConfigError) {
  const auto r = invoke({"train", "--config", write("bad.cfg", "train.stepz = 3\n")});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("train.stepz"), std::string::npos);
}

TEST_F(CliTest, MissingCheckpointIsConfigError) {
  EXPECT_EQ(invoke({"analyze", "--checkpoint", path("absent.rpgn")}).code, kConfigError);
}

TEST_F(CliTest, TrainWritesArtifactsAndIsReproducible) {
  const auto cfg = ring_config(40);
  ASSERT_EQ(invoke({"train", "--config", cfg, "--seed", "7", "--out", path("a")}).code, kOk);
  ASSERT_EQ(invoke({"train", "--config", cfg, "--seed", "7", "--out", path("b")}).code, kOk);
  for (const char* f : {"model.rpgn", "loss.csv", "routes_used.csv", "metrics.csv", "samples.csv"}) {
    EXPECT_EQ(io::read_file(dir_ / "a" / f), io::read_file(dir_ / "b" / f)) << f;
  }
  const auto resolved = io::read_text(dir_ / "a" / "config.resolved");
  EXPECT_NE(resolved.find("run.seed = 7"), std::string::npos);
  EXPECT_NE(resolved.find("train.lr = "), std::string::npos);  // defaults are listed too

  ASSERT_EQ(invoke({"train", "--config", cfg, "--seed", "8", "--out", path("c")}).code, kOk);
  EXPECT_NE(io::read_file(dir_ / "a" / "model.rpgn"), io::read_file(dir_ / "c" / "model.rpgn"));
}

TEST_F(CliTest, UntrainedModelNeedsZeroSteps) {
  const auto r = invoke({"train", "--config", write("n.cfg", "data.source = none\ntrain.steps = 5\n"), "--out",
                         path("o")});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("train.steps"), std::string::npos);
}

TEST_F(CliTest, AnalyzeWritesOneRowPerBucketWithUnitFirstRatio) {
  ASSERT_EQ(invoke({"train", "--config", ring_config(20), "--out", path("m")}).code, kOk);
  const auto before = io::read_file(dir_ / "m" / "model.rpgn");
  const auto r = invoke({"analyze", "--checkpoint", path("m/model.rpgn"), "--routes", "10", "--per-bucket", "2",
                         "--out", path("an")});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream csv(io::read_text(dir_ / "an" / "diversity.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "bucket,metric,mean_ratio,std_ratio,routes");
  std::getline(csv, line);
  EXPECT_EQ(line, "1,color,1,0,10");
  std::size_t rows = 1;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3u);
  EXPECT_EQ(io::read_file(dir_ / "m" / "model.rpgn"), before);  // input untouched
  EXPECT_EQ(invoke({"analyze", "--checkpoint", path("m/model.rpgn"), "--metric", "pixel", "--per-bucket", "2",
                    "--out", path("px")})
                .code,
            kOk);
  EXPECT_EQ(invoke({"analyze", "--checkpoint", path("m/model.rpgn"), "--metric", "hue"}).code, kConfigError);
  const auto big_k = invoke({"analyze", "--checkpoint", path("m/model.rpgn"), "--per-bucket", "3"});
  EXPECT_EQ(big_k.code, kConfigError);
  EXPECT_NE(big_k.err.find("bucket 3"), std::string::npos);
}

TEST_F(CliTest, SemanticMetricNeedsTrainedDiscriminator) {
  ASSERT_EQ(invoke({"train", "--config", write("u.cfg", "model.instances = 2,2\ndata.source = none\ntrain.steps = 0\n"),
                    "--out", path("m")})
                .code,
            kOk);
  const auto r = invoke({"analyze", "--checkpoint", path("m/model.rpgn"), "--metric", "semantic", "--per-bucket",
                         "2", "--out", path("an")});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("pixel"), std::string::npos);
}

TEST_F(CliTest, FuseRefusesNonlinearRangeWithBucketNumber) {
  ASSERT_EQ(invoke({"train", "--config", ring_config(0), "--out", path("m")}).code, kOk);
  const auto r = invoke({"fuse", "--checkpoint", path("m/model.rpgn"), "--range", "1..2", "--count", "2"});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("bucket 1"), std::string::npos);
  EXPECT_EQ(invoke({"fuse", "--checkpoint", path("m/model.rpgn"), "--range", "2..9", "--count", "2"}).code,
            kConfigError);
  EXPECT_EQ(invoke({"fuse", "--checkpoint", path("m/model.rpgn"), "--range", "x", "--count", "2"}).code,
            kConfigError);
}

TEST_F(CliTest, FuseWritesCheckpointAndBench) {
  ASSERT_EQ(invoke({"train", "--config", linear_config(), "--out", path("m")}).code, kOk);
  const auto r = invoke({"fuse", "--checkpoint", path("m/model.rpgn"), "--range", "2..4", "--count", "5",
                         "--reps", "3", "--out", path("f")});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "f" / "fused.rpgn"));
  EXPECT_EQ(io::read_text(dir_ / "f" / "bench.csv").rfind("variant,batch,ns_per_image,flops,speedup\n", 0), 0u);
  // The fused model renders and can be fused again.
  EXPECT_EQ(invoke({"generate", "--checkpoint", path("f/fused.rpgn"), "--count", "3", "--out", path("g")}).code,
            kOk);
}

TEST_F(CliTest, FuseEquivalenceFailureIsExitFour) {
  ASSERT_EQ(invoke({"train", "--config", linear_config(), "--out", path("m")}).code, kOk);
  const auto r = invoke({"fuse", "--checkpoint", path("m/model.rpgn"), "--range", "1..4", "--count", "3",
                         "--tolerance", "0", "--reps", "1", "--out", path("f")});
  EXPECT_EQ(r.code, kVerificationFailure);
  EXPECT_NE(r.err.find("max abs diff"), std::string::npos);
}

TEST_F(CliTest, SweepDeduplicatesValues) {
  const auto r = invoke({"sweep", "--config", ring_config(5), "--values", "2,4,4,8", "--out", path("s")});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.err.find("duplicate n_in value 4"), std::string::npos);
  std::istringstream csv(io::read_text(dir_ / "s" / "sweep.csv"));
  std::string line;
  std::size_t rows = 0;
  std::getline(csv, line);
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 3u);
}

TEST_F(CliTest, SweepAcceptsSteppedRange) {
  const auto r = invoke({"sweep", "--config", ring_config(0), "--values", "5..50:5", "--out", path("s")});
  ASSERT_EQ(r.code, kOk) << r.err;
  std::istringstream csv(io::read_text(dir_ / "s" / "sweep.csv"));
  std::string line;
  std::size_t rows = 0;
  std::getline(csv, line);
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 10u);
  EXPECT_EQ(invoke({"sweep", "--config", ring_config(0), "--values", "5..1"}).code, kConfigError);
}

TEST_F(CliTest, ExtendKeepsFrozenWeightsAndTrainsNewOnes) {
  ASSERT_EQ(invoke({"train", "--config", ring_config(10), "--out", path("m")}).code, kOk);
  const auto r = invoke({"extend", "--checkpoint", path("m/model.rpgn"), "--add", "1,1,0", "--steps", "10",
                         "--out", path("e")});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(io::read_text(dir_ / "e" / "metrics.csv").find("instances,4x4x2"), std::string::npos);
  // Old routes of the extended model still render.
  EXPECT_EQ(invoke({"generate", "--checkpoint", path("e/extended.rpgn"), "--route", "2-2-1", "--out", path("g")})
                .code,
            kOk);
  EXPECT_EQ(invoke({"extend", "--checkpoint", path("m/model.rpgn"), "--add", "1,1"}).code, kConfigError);
  EXPECT_EQ(invoke({"extend", "--checkpoint", path("m/model.rpgn"), "--add", "1,1,0", "--init", "x"}).code,
            kConfigError);
}

TEST_F(CliTest, GenerateRouteAndEdit) {
  ASSERT_EQ(invoke({"train", "--config", ring_config(0), "--out", path("m")}).code, kOk);
  ASSERT_EQ(invoke({"generate", "--checkpoint", path("m/model.rpgn"), "--route", "0-1-1", "--edit", "2:2",
                    "--out", path("g")})
                .code,
            kOk);
  const auto csv = io::read_text(dir_ / "g" / "samples.csv");
  EXPECT_NE(csv.find("0,0-1-1,"), std::string::npos);
  EXPECT_NE(csv.find("1,0-2-1,"), std::string::npos);
  EXPECT_EQ(invoke({"generate", "--checkpoint", path("m/model.rpgn"), "--route", "0-1-1", "--edit", "4:0"}).code,
            kConfigError);
  EXPECT_EQ(invoke({"generate", "--checkpoint", path("m/model.rpgn"), "--route", "0-9-1"}).code, kConfigError);
}

TEST_F(CliTest, InvertAndNoise) {
  ASSERT_EQ(invoke({"train", "--config", ring_config(0), "--out", path("m")}).code, kOk);
  ASSERT_EQ(invoke({"invert", "--checkpoint", path("m/model.rpgn"), "--samples", "200", "--epochs", "2", "--out",
                    path("i")})
                .code,
            kOk);
  EXPECT_EQ(io::read_text(dir_ / "i" / "accuracy.csv").substr(0, 32), "bucket,instances,accuracy,chance");
  EXPECT_EQ(invoke({"noise", "--checkpoint", path("m/model.rpgn")}).code, kConfigError);

  ASSERT_EQ(invoke({"train", "--config",
                    write("one.cfg", "model.instances = 1,1\ndata.source = none\ntrain.steps = 0\n"), "--out",
                    path("one")})
                .code,
            kOk);
  const auto r = invoke({"noise", "--checkpoint", path("one/model.rpgn"), "--bucket", "2", "--sigmas", "0,0.5",
                         "--draws", "4", "--out", path("n")});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(io::read_text(dir_ / "n" / "noise.csv").find("2,0,0\n"), std::string::npos);
}

}  // namespace
}  // namespace rpgan::cli
