#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "config.hpp"

namespace fs = std::filesystem;
using hamshape::config::json;

namespace {

const fs::path kConfigs = HAMSHAPE_CONFIG_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hamshape_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(HAMSHAPE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path write_config(const fs::path& dir, const json& cfg) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << cfg.dump(2);
  return p;
}

json small_disk() {
  json cfg = read_json(kConfigs / "disk.json");
  cfg["domain"]["nx"] = 33;
  cfg["domain"]["ny"] = 33;
  return cfg;
}

}  // namespace

TEST(Config, UnknownKeysAreRejected) {
  json cfg = small_disk();
  cfg["solver"]["tolerance"] = 1;
  EXPECT_THROW(hamshape::config::parse_config(cfg, "."), hamshape::InvalidInput);
}

TEST(Config, ParsesTheShippedConfigurations) {
  for (const char* name : {"disk.json", "annulus.json", "disk_tracking.json", "annulus_tracking.json"})
    EXPECT_NO_THROW(hamshape::config::load_config(kConfigs / name)) << name;
}

TEST(Cli, TraceDisk) {
  const fs::path out = scratch("trace_disk");
  ASSERT_EQ(run("trace " + (kConfigs / "disk.json").string() + " -o " + out.string(), out / "log"), 0);
  const json census = read_json(out / "census.json");
  ASSERT_EQ(census["components"].size(), 1u);
  EXPECT_NEAR(census["components"][0]["period"].get<double>(), M_PI, 1e-9);
  EXPECT_TRUE(fs::exists(out / "trace_0.csv"));
  EXPECT_FALSE(fs::exists(out / "trace_1.csv"));
}

TEST(Cli, TraceAnnulus) {
  const fs::path out = scratch("trace_annulus");
  ASSERT_EQ(run("trace " + (kConfigs / "annulus.json").string() + " -o " + out.string(), out / "log"), 0);
  const json census = read_json(out / "census.json");
  EXPECT_EQ(census["components"].size(), 2u);
  EXPECT_EQ(census["holes"].get<int>(), 1);
  EXPECT_TRUE(fs::exists(out / "trace_1.csv"));
}

TEST(Cli, InvalidInputExitsWithTwo) {
  const fs::path out = scratch("invalid");
  EXPECT_EQ(run("trace " + (kConfigs / "inadmissible.json").string() + " -o " + out.string(), out / "log"), 2);
  EXPECT_NE(slurp(out / "log").find("inadmissible"), std::string::npos);

  json cfg = small_disk();
  cfg["bogus"] = 1;
  EXPECT_EQ(run("solve " + write_config(out, cfg).string() + " -o " + out.string(), out / "log2"), 2);
  EXPECT_EQ(run("frobnicate", out / "log3"), 2);
}

TEST(Cli, GradcheckPassesAndCatchesMutation) {
  const fs::path out = scratch("gradcheck");
  const fs::path cfg = write_config(out, small_disk());
  ASSERT_EQ(run("gradcheck " + cfg.string() + " -o " + out.string(), out / "log"), 0);
  EXPECT_TRUE(read_json(out / "gradcheck.json")["pass"].get<bool>());
  ASSERT_EQ(run("gradcheck " + cfg.string() + " --mutate dS-sign -o " + out.string(), out / "log"), 0);
  EXPECT_FALSE(read_json(out / "gradcheck.json")["pass"].get<bool>());
  ASSERT_EQ(run("gradcheck " + cfg.string() + " --zero-direction -o " + out.string(), out / "log"), 0);
  for (const auto& c : read_json(out / "gradcheck.json")["checks"]) EXPECT_TRUE(c["degenerate"].get<bool>());
}

TEST(Cli, ResidualWithoutProbes) {
  const fs::path out = scratch("residual");
  json cfg = small_disk();
  cfg["probes"]["count"] = 0;
  ASSERT_EQ(run("residual " + write_config(out, cfg).string() + " -o " + out.string(), out / "log"), 0);
  const json rep = read_json(out / "residual.json");
  EXPECT_TRUE(rep["probes"].empty());
  EXPECT_FALSE(rep["qualification_failure"].get<bool>());
}

TEST(Cli, OptimizeIsDeterministicAndResumable) {
  const fs::path a = scratch("opt_a"), b = scratch("opt_b"), c = scratch("opt_c");
  json cfg = read_json(kConfigs / "disk_tracking.json");
  cfg["domain"]["nx"] = 33;
  cfg["domain"]["ny"] = 33;
  cfg["optimize"]["max_iter"] = 8;
  const fs::path p = write_config(a, cfg);
  ASSERT_EQ(run("optimize -q " + p.string() + " -o " + a.string(), a / "log"), 0);
  ASSERT_EQ(run("optimize -q " + p.string() + " -o " + b.string(), b / "log"), 0);
  EXPECT_EQ(slurp(a / "history.jsonl"), slurp(b / "history.jsonl"));
  EXPECT_EQ(slurp(a / "final_u.csv"), slurp(b / "final_u.csv"));

  const json sa = read_json(a / "summary.json");
  json resume = read_json(a / "final_config.json");
  resume["optimize"]["max_iter"] = 0;
  const fs::path rp = a / "resume.json";
  std::ofstream(rp) << resume.dump(2);
  ASSERT_EQ(run("optimize -q " + rp.string() + " -o " + c.string(), c / "log"), 0);
  const json sc = read_json(c / "summary.json");
  EXPECT_NEAR(sc["J"].get<double>(), sa["J"].get<double>(), 1e-10);
  EXPECT_NEAR(sc["S"].get<double>(), sa["S"].get<double>(), 1e-10);
  EXPECT_EQ(sc["iterations"].get<int>(), 0);
  std::ifstream hist(c / "history.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(hist, line)) ++lines;
  EXPECT_GE(lines, 1);
}
