#include "test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result vip_cli(const std::string& args, const fs::path& dir) {
  const auto log = dir / "stdout.txt";
  const std::string cmd = std::string(VIP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  Result r;
  r.out.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

}  // namespace

TEST(Cli, SynthIsByteDeterministic) {
  const auto dir = vip::testing::temp_dir("cli_synth");
  const std::string args = "synth --count 6 --frames 12 --seed 4 --out ";
  ASSERT_EQ(vip_cli(args + (dir / "a").string(), dir).code, 0);
  ASSERT_EQ(vip_cli(args + (dir / "b").string(), dir).code, 0);
  auto a = tree(dir / "a");
  auto b = tree(dir / "b");
  EXPECT_GT(a.size(), 6u);
  EXPECT_TRUE(a.contains("oracle.json"));
  // config.json records the output path.
  const auto ca = nlohmann::json::parse(a.at("config.json"));
  const auto cb = nlohmann::json::parse(b.at("config.json"));
  EXPECT_EQ(ca["fingerprint"], cb["fingerprint"]);
  EXPECT_EQ(ca["options"], cb["options"]);
  a.erase("config.json");
  b.erase("config.json");
  EXPECT_EQ(a, b);
}

TEST(Cli, SpatialBaselineIsPerfect) {
  const auto dir = vip::testing::temp_dir("cli_baseline");
  ASSERT_EQ(vip_cli("synth --count 20 --frames 12 --profile spatial --seed 2 --out " + (dir / "c").string(), dir).code, 0);
  const auto r = vip_cli("baseline --cue centrality --corpus " + (dir / "c").string() + " --out " + (dir / "r").string(), dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("fingerprint: "), std::string::npos);
  std::ifstream in(dir / "r" / "report.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["rank1"].get<double>(), 1.0);
  EXPECT_EQ(j["count"], 20);
  EXPECT_TRUE(fs::exists(dir / "r" / "config.json"));
}

TEST(Cli, GradcheckPasses) {
  const auto dir = vip::testing::temp_dir("cli_grad");
  const auto r = vip_cli("gradcheck --out " + (dir / "g").string(), dir);
  EXPECT_EQ(r.code, 0) << r.out;
  std::ifstream in(dir / "g" / "gradcheck.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_LT(j["max_rel_error"].get<double>(), 1e-4);
}

TEST(Cli, UsageErrorsExitOne) {
  const auto dir = vip::testing::temp_dir("cli_usage");
  EXPECT_EQ(vip_cli("synth --bogus-flag", dir).code, 1);
  EXPECT_EQ(vip_cli("eval --checkpoint " + (dir / "missing").string() + " --corpus " + (dir / "none").string(), dir).code,
            1);
}

TEST(Cli, FingerprintIgnoresOutputPath) {
  const auto dir = vip::testing::temp_dir("cli_fp");
  const auto a = vip_cli("synth --count 2 --frames 12 --seed 3 --out " + (dir / "a").string(), dir);
  const auto b = vip_cli("synth --count 2 --frames 12 --seed 3 --out " + (dir / "b").string(), dir);
  const auto c = vip_cli("synth --count 2 --frames 12 --seed 5 --out " + (dir / "c").string(), dir);
  auto fp = [](const std::string& s) {
    const auto at = s.find("fingerprint: ");
    return at == std::string::npos ? std::string() : s.substr(at + 13, s.find('\n', at) - at - 13);
  };
  EXPECT_FALSE(fp(a.out).empty());
  EXPECT_EQ(fp(a.out), fp(b.out));
  EXPECT_NE(fp(a.out), fp(c.out));
}
