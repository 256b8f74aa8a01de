#include "commands.hpp"
#include "config.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using efbm::cli::run;

namespace {

struct Sandbox {
  fs::path dir;
  explicit Sandbox(const std::string& name) : dir(fs::temp_directory_path() / ("efbm_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }

  fs::path config(const nlohmann::json& j) const {
    auto base = nlohmann::json{{"grid_n", 32},          {"nested_grid_n", 16},      {"paths", 12000},
                               {"centering_paths", 1000}, {"nested_paths", 60},      {"inner_paths", 50},
                               {"dphi_paths", 4},         {"clark_ocone_paths", 500}, {"bootstrap_resamples", 10},
                               {"kde_grid_points", 256}};
    if (j.is_object()) base.update(j);
    const auto p = dir / "config.json";
    std::ofstream(p) << base.dump();
    return p;
  }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "efbm");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Cli, KernelVerifyPassesAndEmitsJson) {
  Sandbox box("kv");
  const auto r = call({"kernel-verify", "--config", box.config({}).string(), "--out", box.dir.string(), "--json"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("command"), "kernel-verify");
  EXPECT_TRUE(j.at("failures").empty());
  EXPECT_TRUE(j.at("provenance").contains("config_hash"));
  EXPECT_TRUE(fs::exists(box.dir / "kernel_verify.json"));
}

TEST(Cli, CorruptedNormalizationFails) {
  Sandbox box("fault");
  const auto r = call({"kernel-verify", "--config", box.config({{"fault_ch_scale", 1.01}}).string(), "--out",
                       box.dir.string(), "--json"});
  EXPECT_NE(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  const auto& failures = j.at("failures");
  EXPECT_NE(std::find(failures.begin(), failures.end(), "calibration"), failures.end());
}

TEST(Cli, SimulateIsByteIdentical) {
  Sandbox a("det_a");
  Sandbox b("det_b");
  const auto cfg = a.config({{"paths", 3000}});
  ASSERT_EQ(call({"simulate", "--config", cfg.string(), "--out", a.dir.string()}).code, 0);
  ASSERT_EQ(call({"simulate", "--config", cfg.string(), "--out", b.dir.string()}).code, 0);
  const auto sa = slurp(a.dir / "samples.csv");
  EXPECT_FALSE(sa.empty());
  EXPECT_EQ(sa, slurp(b.dir / "samples.csv"));
  EXPECT_EQ(slurp(a.dir / "simulate.json"), slurp(b.dir / "simulate.json"));
}

TEST(Cli, ZeroPathsGivesHeaderOnly) {
  Sandbox box("zero");
  ASSERT_EQ(call({"simulate", "--config", box.config({}).string(), "--paths", "0", "--out", box.dir.string()}).code, 0);
  std::istringstream in(slurp(box.dir / "samples.csv"));
  std::string line, last;
  std::size_t data = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind('#', 0) == 0) continue;
    if (line == "path_id,F,lnF,X") header = true;
    else ++data;
  }
  EXPECT_TRUE(header);
  EXPECT_EQ(data, 0u);
}

TEST(Cli, OnlySelectsSingleReport) {
  Sandbox box("only");
  const auto r = call({"bounds", "--config", box.config({}).string(), "--out", box.dir.string(), "--only", "jkvm1b",
                       "--json"});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.at("reports").size(), 1u);
  EXPECT_EQ(j.at("reports")[0].at("bound_id"), "jkvm1b");
  EXPECT_EQ(call({"bounds", "--config", box.config({}).string(), "--out", box.dir.string(), "--only", "nope"}).code, 2);
}

TEST(Cli, NoSimulateRequiresCache) {
  Sandbox box("nosim");
  const auto cfg = box.config({}).string();
  const auto r = call({"density", "--config", cfg, "--out", box.dir.string(), "--no-simulate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no sample cache"), std::string::npos);
  ASSERT_EQ(call({"simulate", "--config", cfg, "--out", box.dir.string()}).code, 0);
  const auto d = call({"density", "--config", cfg, "--out", box.dir.string(), "--no-simulate"});
  EXPECT_EQ(d.code, 0) << d.out << d.err;
  EXPECT_NE(d.err.find("reusing sample cache"), std::string::npos);
}

TEST(Cli, ConfigErrors) {
  Sandbox box("cfg");
  EXPECT_EQ(call({"simulate", "--config", box.config({{"bogus_key", 1}}).string()}).code, 2);
  EXPECT_EQ(call({"simulate", "--config", box.config({{"hurst_H", 0.4}}).string()}).code, 2);
  EXPECT_EQ(call({"simulate", "--config", (box.dir / "missing.json").string()}).code, 2);
  EXPECT_EQ(call({"simulate", "--seed", "notanumber"}).code, 2);
  EXPECT_EQ(call({}).code, 2);
}

TEST(Cli, BudgetExceededReturnsThree) {
  Sandbox box("budget");
  const auto r = call({"bounds", "--config", box.config({{"dphi_budget_inner_evals", 16 * 50 * 2}}).string(), "--out",
                       box.dir.string(), "--only", "dphi"});
  EXPECT_EQ(r.code, 3) << r.out << r.err;
}

TEST(Cli, ConfigHashIgnoresOutputDirectory) {
  efbm::cli::ExperimentConfig a;
  auto b = a;
  b.out_dir = "elsewhere";
  EXPECT_EQ(efbm::cli::config_hash(a), efbm::cli::config_hash(b));
  b.seed += 1;
  EXPECT_NE(efbm::cli::config_hash(a), efbm::cli::config_hash(b));
}

TEST(Cli, ReportAggregates) {
  Sandbox box("report");
  const auto cfg = box.config({}).string();
  EXPECT_EQ(call({"report", "--config", cfg, "--out", box.dir.string()}).code, 2);
  ASSERT_EQ(call({"kernel-verify", "--config", cfg, "--out", box.dir.string()}).code, 0);
  ASSERT_EQ(call({"malliavin", "--config", cfg, "--out", box.dir.string()}).code, 0);
  const auto r = call({"report", "--config", cfg, "--out", box.dir.string(), "--json"});
  EXPECT_EQ(r.code, 0);
  EXPECT_GE(nlohmann::json::parse(r.out).at("sources").size(), 2u);
  EXPECT_TRUE(fs::exists(box.dir / "malliavin_summary.csv"));
}
