/* Copyright 2026 The racdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include <gtest/gtest.h>

#include "racdet/racdet.hpp"
#include "test_util.hpp"

namespace racdet {
namespace {

using testing::read_file;
using testing::TempDir;
using testing::write_file;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(RACDET_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(out), read_file(err)};
}

std::string at(const TempDir& dir, const std::string& name) { return (dir / name).string(); }

class CliFlow : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto r = cli(dir_, "gen-fixtures --domain easy --seed 4 --pool-images 150 --query-images 40 --budget 5 --out " +
                                 at(dir_, "fx"));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  std::string fx(const std::string& name) const { return at(dir_, "fx/" + name); }

  TempDir dir_;
};

TEST_F(CliFlow, GenFixturesWritesEverything) {
  for (const char* name : {"manifest.json", "pool.jsonl", "pool_instances.jsonl", "queries.jsonl", "proposals.jsonl",
                           "groundtruth.jsonl", "config.json", "bank/manifest.json", "bank/images.jsonl",
                           "bank/instances.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(fx(name))) << name;
  }
  const auto bank = MemoryBank::load(fx("bank"));
  EXPECT_LE(bank.image_count(), 30u);
  EXPECT_GT(bank.image_count(), 0u);
}

TEST_F(CliFlow, ClassifyThenEvalViaConfig) {
  const auto c = cli(dir_, "classify --config " + fx("config.json"));
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(c.out.find("detections"), std::string::npos);
  const auto e = cli(dir_, "eval --config " + fx("config.json") + " --out " + at(dir_, "report.json"));
  ASSERT_EQ(e.code, 0) << e.err;
  const json rep = json::parse(read_file(dir_ / "report.json"));
  EXPECT_GE(rep["mAP"].get<double>(), 0.9);
  EXPECT_EQ(rep["per_class"].size(), 6u);
  EXPECT_NE(e.out.find("mAP"), std::string::npos);
}

TEST_F(CliFlow, FlagsOverrideConfigAndContextFreeRuns) {
  const auto a = cli(dir_, "classify --config " + fx("config.json") + " --instance-thresh 0.99 --out " + at(dir_, "strict.jsonl"));
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = cli(dir_, "classify --config " + fx("config.json") + " --context-free --out " + at(dir_, "free.jsonl"));
  ASSERT_EQ(b.code, 0) << b.err;
  const auto loose = cli(dir_, "classify --config " + fx("config.json") + " --out " + at(dir_, "loose.jsonl"));
  ASSERT_EQ(loose.code, 0);
  const Manifest m = read_manifest(fx("manifest.json"));
  const RecordContext ctx{0, &m.classes};
  EXPECT_LT(read_records<ClassifiedDetection>(dir_ / "strict.jsonl", ctx).size(),
            read_records<ClassifiedDetection>(dir_ / "loose.jsonl", ctx).size());
}

TEST_F(CliFlow, ClassifyIsDeterministic) {
  ASSERT_EQ(cli(dir_, "classify --config " + fx("config.json") + " --out " + at(dir_, "a.jsonl")).code, 0);
  ASSERT_EQ(cli(dir_, "classify --config " + fx("config.json") + " --out " + at(dir_, "b.jsonl")).code, 0);
  EXPECT_EQ(read_file(dir_ / "a.jsonl"), read_file(dir_ / "b.jsonl"));
}

TEST_F(CliFlow, ZeroProposalsGiveEmptyFile) {
  write_file(dir_ / "none.jsonl", "");
  const auto r = cli(dir_, "classify --config " + fx("config.json") + " --proposals " + at(dir_, "none.jsonl") +
                               " --out " + at(dir_, "dets.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir_ / "dets.jsonl"));
  EXPECT_EQ(read_file(dir_ / "dets.jsonl"), "");
}

TEST_F(CliFlow, SelectSeedsThenBuildDb) {
  const auto s = cli(dir_, "select-seeds --pool " + fx("pool.jsonl") + " --manifest " + fx("manifest.json") +
                               " --budget 3 --strategy centroid --seed 2 --out " + at(dir_, "ids.txt"));
  ASSERT_EQ(s.code, 0) << s.err;
  const std::string ids = read_file(dir_ / "ids.txt");
  const auto again = cli(dir_, "select-seeds --pool " + fx("pool.jsonl") + " --budget 3 --strategy centroid --seed 2");
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_FALSE(ids.empty());
  const auto b = cli(dir_, "build-db --manifest " + fx("manifest.json") + " --images " + fx("bank/images.jsonl") +
                               " --instances " + fx("bank/instances.jsonl") + " --out " + at(dir_, "bank2"));
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("class"), std::string::npos);
  EXPECT_TRUE(same_content(MemoryBank::load(dir_ / "bank2"), MemoryBank::load(fx("bank"))));
}

TEST_F(CliFlow, AblateWritesCsv) {
  const auto r = cli(dir_, "ablate --config " + fx("config.json") + " --axis k --values 1,50");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "axis,value,mAP,mAR");
  EXPECT_NE(r.out.find("k,1,"), std::string::npos);
  EXPECT_NE(r.out.find("k,50,"), std::string::npos);
  const auto s = cli(dir_, "ablate --config " + fx("config.json") + " --axis strategy --values random,cluster");
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("strategy,cluster,"), std::string::npos);
}

TEST_F(CliFlow, DataErrorsExitTwo) {
  write_file(dir_ / "bad.jsonl", "{\"image_id\": \"q\", \"embedding\": [1, 2]}\n");
  const auto r = cli(dir_, "classify --config " + fx("config.json") + " --queries " + at(dir_, "bad.jsonl") + " --out " +
                               at(dir_, "x.jsonl"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 1"), std::string::npos);
  const auto w = cli(dir_, "classify --config " + fx("config.json") + " --w1 0.9 --w2 0.9 --out " + at(dir_, "x.jsonl"));
  EXPECT_EQ(w.code, 2);
}

TEST(Cli, UsageErrorsExitOne) {
  TempDir dir;
  EXPECT_EQ(cli(dir, "").code, 1);
  EXPECT_EQ(cli(dir, "frobnicate").code, 1);
  EXPECT_EQ(cli(dir, "classify --k notanumber").code, 1);
  const auto r = cli(dir, "classify --out " + at(dir, "d.jsonl"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--bank"), std::string::npos);
  EXPECT_EQ(cli(dir, "gen-fixtures --domain nowhere --out " + at(dir, "fx")).code, 1);
  EXPECT_EQ(cli(dir, "--help").code, 0);
}

TEST(Cli, MissingFileExitsTwo) {
  TempDir dir;
  const auto r = cli(dir, "eval --manifest " + at(dir, "nope.json") + " --detections x --groundtruth y");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

}  // namespace
}  // namespace racdet
