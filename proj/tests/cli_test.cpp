// Copyright 2026 The zok Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_util.hpp"

namespace {

using zok::testing::ScratchDir;
using zok::testing::slurp;
using zok::testing::spit;

// Runs the CLI with output discarded and returns its exit status.
int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " ZOK_BIN " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_text(const std::filesystem::path& p) {
  const auto bytes = slurp(p);
  return {bytes.begin(), bytes.end()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = (dir_ / "data").string();
    ASSERT_EQ(run("synth --out-dir " + data_ + " --count 2 --width 32 --height 32 --seed 3"), 0);
  }
  ScratchDir dir_;
  std::string data_;
};

TEST_F(CliTest, HelpAndSuccessExitZero) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("pipeline --help"), 0);
  EXPECT_EQ(run("pipeline --mode oracle --test " + data_ + " --k 16"), 0);
}

TEST_F(CliTest, ValidationErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("pipeline --mode oracle --test " + data_ + " --bogus"), 1);
  EXPECT_EQ(run("pipeline --mode sideways --test " + data_), 1);
  EXPECT_EQ(run("slic --input " + data_ + "/img_0000.ppm --k 0 --out x.zot"), 1);
  EXPECT_EQ(run("pipeline --mode full --test " + data_), 1);
}

TEST_F(CliTest, MissingFilesExitTwo) {
  EXPECT_EQ(run("slic --input " + (dir_ / "nope.ppm").string() + " --out x.zot"), 2);
  EXPECT_EQ(run("pipeline --mode oracle --test " + (dir_ / "nope").string()), 2);
  EXPECT_EQ(run("pipeline --config " + (dir_ / "nope.json").string()), 2);
}

TEST_F(CliTest, ConfigMergesWithFlagPrecedence) {
  const auto cfg = dir_ / "cfg.json";
  const auto out = dir_ / "r.json";
  spit(cfg, nlohmann::json{{"mode", "oracle"},
                           {"test", data_},
                           {"k", 16},
                           {"format", "text"},
                           {"no-timings", true}}
                .dump());
  ASSERT_EQ(run("pipeline --config " + cfg.string() + " --format json --report " + out.string()), 0);
  const auto report = nlohmann::json::parse(read_text(out));
  EXPECT_DOUBLE_EQ(report["mIoU"].get<double>(), 1.0);
  EXPECT_FALSE(report.contains("timings"));

  spit(cfg, R"({"mode": "oracle", "test": ")" + data_ + R"(", "colour": 1})");
  EXPECT_EQ(run("pipeline --config " + cfg.string()), 1);
  spit(cfg, "[1, 2]");
  EXPECT_EQ(run("pipeline --config " + cfg.string()), 1);
  spit(cfg, "{broken");
  EXPECT_EQ(run("pipeline --config " + cfg.string()), 1);
}

TEST_F(CliTest, ThreadsEnvironment) {
  const std::string args = "pipeline --mode oracle --k 16 --test " + data_;
  EXPECT_EQ(run(args, "ZOK_THREADS=2"), 0);
  EXPECT_EQ(run(args, "ZOK_THREADS=zero"), 1);
  EXPECT_EQ(run(args, "ZOK_THREADS=0"), 1);
  EXPECT_EQ(run(args + " --threads 0"), 1);
}

TEST_F(CliTest, PipelineOutputIsReproducible) {
  const std::string base = "pipeline --mode full --train " + data_ + " --test " + data_ +
                           " --k 16 --hidden 8 --epochs 3 --no-timings --seed 2";
  const auto a = dir_ / "a.json", b = dir_ / "b.json";
  ASSERT_EQ(run(base + " --report " + a.string() + " --model-out " + (dir_ / "a.zom").string()), 0);
  ASSERT_EQ(run(base + " --report " + b.string() + " --model-out " + (dir_ / "b.zom").string(),
                "ZOK_THREADS=2"),
            0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(slurp(dir_ / "a.zom"), slurp(dir_ / "b.zom"));
}

TEST_F(CliTest, StepwiseToolsChain) {
  const std::string img = data_ + "/img_0000.ppm", gt = data_ + "/img_0000.pgm";
  const auto p = [&](const char* f) { return (dir_ / f).string(); };
  ASSERT_EQ(run("slic --input " + img + " --k 16 --out " + p("sp.zot")), 0);
  ASSERT_EQ(run("features --image " + img + " --superpixels " + p("sp.zot") + " --out " +
                p("f.zot")),
            0);
  ASSERT_EQ(run("train --features " + p("f.zot") + " --labels " + gt + " --superpixels " +
                p("sp.zot") + " --classes 4 --hidden 8 --epochs 2 --out " + p("m.zom")),
            0);
  ASSERT_EQ(run("predict --model " + p("m.zom") + " --features " + p("f.zot") + " --out " +
                p("l.zot") + " --probs " + p("pr.zot")),
            0);
  ASSERT_EQ(run("crf --unary " + p("pr.zot") + " --image " + img + " --superpixels " +
                p("sp.zot") + " --out " + p("c.zot")),
            0);
  EXPECT_EQ(run("crf --unary " + p("pr.zot") + " --image " + img + " --out " + p("c2.zot")), 1);
  ASSERT_EQ(run("eval --pred " + gt + " --gt " + gt + " --classes 4 --out " + p("e.json")), 0);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(read_text(p("e.json")))["mIoU"].get<double>(), 1.0);
}

}  // namespace
