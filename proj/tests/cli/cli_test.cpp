#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "tempdir.hpp"

namespace slapseg::cli {
namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "slapseg");
  std::ostringstream out, err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Cli, EveryFlagIsDocumented) {
  const HelpAudit a = audit_help();
  EXPECT_GT(a.options.size(), 40u);
  EXPECT_TRUE(a.undocumented.empty()) << ::testing::PrintToString(a.undocumented);
  for (const std::string& entry : a.options) {
    const std::string sub = entry.substr(0, entry.find(' '));
    const std::string names = entry.substr(entry.find(' ') + 1);
    const Result r = call({sub, "--help"});
    EXPECT_EQ(r.code, kExitOk);
    const std::string flag = names.substr(names.rfind(',') + 1);
    EXPECT_NE(r.out.find(flag), std::string::npos) << entry;
  }
}

TEST(Cli, UsageErrorsExitWithTwo) {
  testing::TempDir dir("cli-usage");
  const std::string o = dir.path().string();
  EXPECT_EQ(call({}).code, kExitUsage);
  EXPECT_EQ(call({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(call({"gen", "--adults", "1", "--juveniles", "1", "--per-subject", "1", "-o", o}).code, kExitUsage);
  EXPECT_EQ(call({"gen", "--adults", "1", "--juveniles", "1", "--per-subject", "1", "--seed", "1", "--bogus", "-o", o})
                .code,
            kExitUsage);
  EXPECT_EQ(call({"train", "-o", o}).code, kExitUsage);
  EXPECT_EQ(call({"eval-match", "--models", "baseline", "-o", o}).code, kExitUsage);
  const Result missing = call({"baseline", "-o", o});
  EXPECT_EQ(missing.code, kExitUsage);
  EXPECT_NE(missing.err.find("manifest not found"), std::string::npos);
  EXPECT_EQ(call({"compare", "--models", "baseline", "--cohort", "elderly", "-o", o}).code, kExitUsage);
  EXPECT_EQ(call({"export", "-o", o}).code, kExitUsage);
}

TEST(Cli, OutputDirectoryFallsBackToTheEnvironment) {
  testing::TempDir dir("cli-env");
  ::unsetenv("SLAPSEG_DATA_DIR");
  EXPECT_EQ(call({"split"}).code, kExitUsage);
  ::setenv("SLAPSEG_DATA_DIR", dir.path().c_str(), 1);
  const Result r = call({"gen", "--adults", "1", "--juveniles", "1", "--per-subject", "1", "--seed", "3"});
  ::unsetenv("SLAPSEG_DATA_DIR");
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "manifest.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "gen_config.json"));
}

TEST(Cli, PipelineIsReproducible) {
  testing::TempDir dir("cli-pipe");
  const std::string o = dir.path().string();
  ASSERT_EQ(call({"gen", "--adults", "3", "--juveniles", "3", "--per-subject", "4", "--seed", "7", "-o", o}).code,
            kExitOk);
  const std::string manifest = slurp(dir.path() / "manifest.json");
  ASSERT_EQ(call({"split", "--folds", "3", "--seed", "1", "-o", o}).code, kExitOk);
  EXPECT_EQ(slurp(dir.path() / "manifest.json"), manifest);

  const Result train = call({"train", "--seed", "2", "--epochs", "1", "--rois", "16", "--fold", "0", "--cohort",
                             "adult", "--name", "tiny", "-o", o});
  ASSERT_EQ(train.code, kExitOk) << train.err;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "tiny.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "tiny_loss.csv"));

  const std::string ckpt = (dir.path() / "tiny.ckpt").string();
  const Result seg = call({"segment", "--model", ckpt, "--fold", "0", "--score-threshold", "0", "-o", o});
  ASSERT_EQ(seg.code, kExitOk) << seg.err;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "segment_tiny.json"));
  ASSERT_EQ(call({"baseline", "--fold", "0", "-o", o}).code, kExitOk);

  const std::string a = (dir.path() / "a").string(), b = (dir.path() / "b").string();
  for (const std::string& out : {a, b}) {
    const Result r = call({"compare", "--models", "baseline,ground-truth," + ckpt, "--fold", "0", "--seed", "5",
                           "--manifest", o + "/manifest.json", "--splits", o + "/splits.json", "-o", out});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  for (const char* f : {"report.json", "mae_table.csv", "tpr_table.csv", "baseline_adult_bottom_hist.csv",
                        "ground-truth_juvenile_roc.csv"}) {
    const std::string x = slurp(std::filesystem::path(a) / "compare" / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(std::filesystem::path(b) / "compare" / f)) << f;
  }
  EXPECT_EQ(slurp(std::filesystem::path(a) / "compare_config.json").size(),
            slurp(std::filesystem::path(b) / "compare_config.json").size());
}

}  // namespace
}  // namespace slapseg::cli
