#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "bichain/cli.hpp"
#include "bichain/rational.hpp"
#include "oracles.hpp"

using namespace bichain;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
  std::map<std::string, std::string> kv;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "bichain");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r{run_cli(static_cast<int>(argv.size()), argv.data(), out, err), out.str(), err.str(), {}};
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) r.kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return r;
}

std::string model(const std::string& name) { return std::string(BICHAIN_MODELS_DIR) + "/" + name; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bichain_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ValidateSir) {
  auto r = run({"validate", model("sir.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("simple: no"), std::string::npos);
  EXPECT_NE(r.out.find("closed: yes"), std::string::npos);
  EXPECT_NE(r.out.find("acyclic: yes"), std::string::npos);
}

TEST_F(Cli, ValidateCovidMachineOutput) {
  auto r = run({"--machine-output", "validate", model("covid_single_age.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.kv["closed"], "no");
  EXPECT_EQ(r.kv["acyclic"], "yes");
  EXPECT_EQ(r.kv["sir_shape"], "no");
}

TEST_F(Cli, MalformedModelExitsWithTwo) {
  auto r = run({"validate", write("bad.json", "{\"compartments\": [\"A\",")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("byte"), std::string::npos);
  EXPECT_EQ(run({"validate", path("missing.json")}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, EoeGeometric) {
  std::string m = write("geo.json", oracle::sir_json(0, 1, 0, "1/2", "1/2"));
  for (const char* engine : {"auto", "sir", "general"}) {
    auto r = run({"--machine-output", "eoe", m, "--engine", engine});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.kv["eoe"], "2") << engine;
  }
  auto d = run({"--machine-output", "eoe", m, "--backend", "double"});
  EXPECT_EQ(d.kv["eoe"], "2");
  EXPECT_EQ(d.kv["engine"], "sir");
}

TEST_F(Cli, EoeAbsorbingAndPerState) {
  std::string m = write("done.json", oracle::sir_json(3, 0, 2, "1/2", "1/2"));
  EXPECT_EQ(run({"--machine-output", "eoe", m}).kv["eoe"], "0");
  std::string small = write("small.json", oracle::sir_json(1, 1, 0, "1/2", "1/2"));
  auto r = run({"--machine-output", "eoe", small, "--engine", "general", "--per-state"});
  EXPECT_EQ(r.kv["state[0,1,1]"], "2");
}

TEST_F(Cli, EoeEnginesAgree) {
  std::string m = write("sir.json", oracle::sir_json(5, 2, 0, "3/4", "1/2"));
  auto a = run({"--machine-output", "eoe", m, "--engine", "sir"});
  auto b = run({"--machine-output", "eoe", m, "--engine", "general"});
  EXPECT_EQ(a.kv["eoe"], b.kv["eoe"]);
  EXPECT_EQ(run({"eoe", model("covid_single_age.json"), "--engine", "sir"}).code, 2);
}

TEST_F(Cli, ResourceCapExitsWithThree) {
  std::string m = write("sir.json", oracle::sir_json(6, 2, 0, "3/4", "1/2"));
  auto r = run({"eoe", m, "--engine", "general", "--state-cap", "3"});
  EXPECT_EQ(r.code, 3);
}

TEST_F(Cli, CyclicModelRejected) {
  std::string m = write("cyc.json", R"({"compartments":["A","B"],"initial":{"A":1},
    "transfers":[{"from":"A","to":"B","offset":"1"},{"from":"B","to":"A","offset":"1"}]})");
  EXPECT_EQ(run({"eoe", m}).code, 2);
}

TEST_F(Cli, ProbQueries) {
  std::string m = write("sir.json", oracle::sir_json(2, 1, 0, "1/2", "2/3"));
  EXPECT_EQ(run({"--machine-output", "prob", m, "--target", "true"}).kv["value"], "1");
  EXPECT_EQ(run({"--machine-output", "prob", m, "--target", "S + I + R != N0"}).kv["value"], "0");
  auto os = run({"--machine-output", "prob", m, "--property", "OS"});
  auto manual = run({"--machine-output", "prob", m, "--safe", "S >= S_init", "--target", "I = S_init + I_init"});
  EXPECT_EQ(os.kv["value"], manual.kv["value"]);
  EXPECT_EQ(run({"prob", m, "--target", "Q = 0"}).code, 2);
}

TEST_F(Cli, SimulateDeterministic) {
  std::string m = write("det.json", oracle::sir_json(0, 1, 0, "1/2", "0"));
  auto r = run({"--machine-output", "simulate", m, "--runs", "1", "--seed", "3", "--trace"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.kv["trace.0"], "S=0 I=1 R=0");
  EXPECT_EQ(r.kv["trace.1"], "S=0 I=0 R=1");
  auto stats = run({"--machine-output", "simulate", m, "--runs", "10", "--seed", "3"});
  EXPECT_EQ(stats.kv["mean"], "1");
  EXPECT_EQ(stats.kv["std_error"], "0");

  std::string g = write("geo.json", oracle::sir_json(0, 1, 0, "1/2", "1/2"));
  auto a = run({"--machine-output", "simulate", g, "--runs", "20000", "--seed", "8"});
  EXPECT_EQ(a.out, run({"--machine-output", "simulate", g, "--runs", "20000", "--seed", "8"}).out);
  EXPECT_NEAR(std::stod(a.kv["mean"]), 2.0, 3 * std::stod(a.kv["std_error"]));
  double mass = 0;
  for (const auto& [k, v] : a.kv) {
    if (k.rfind("final[", 0) == 0) mass += std::stod(v.substr(v.find(' ') + 1));
  }
  EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST_F(Cli, ExportFilesAreStable) {
  auto a = run({"export", model("sir.json"), "--out-model", path("a.prism"), "--out-props", path("a.props")});
  auto b = run({"export", model("sir.json"), "--out-model", path("b.prism"), "--out-props", path("b.props")});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(slurp(path("a.prism")), slurp(path("b.prism")));
  EXPECT_EQ(slurp(path("a.props")), slurp(path("b.props")));
  EXPECT_EQ(slurp(path("a.prism")), slurp(std::string(BICHAIN_GOLDEN_DIR) + "/sir.prism"));
  EXPECT_EQ(run({"export", model("covid_single_age.json"), "--out-model", path("c.prism")}).code, 0);
  EXPECT_EQ(run({"export", model("sir.json"), "--properties", "Peak"}).code, 2);
  auto only = run({"export", model("sir.json"), "--out-model", path("d.prism"), "--properties", "EoE"});
  EXPECT_NE(only.out.find("// EoE\nR{\"time_step\"}=? [ F (I = 0) ]\n"), std::string::npos);
  EXPECT_EQ(only.out.find("// OS"), std::string::npos);
}

TEST_F(Cli, ExportWithoutTableSynthesizesOne) {
  std::string m = write("bare.json", R"({"compartments":["A","B"],"initial":{"A":2},
    "transfers":[{"from":"A","to":"B","offset":"1"}]})");
  auto r = run({"export", m, "--out-model", path("bare.prism"), "--error-exponent", "8"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(path("bare.prism")).find("dtmc"), std::string::npos);
}

TEST_F(Cli, ApproxExp) {
  auto a = run({"--machine-output", "approx-exp", "1", "1", "10"});
  ASSERT_EQ(a.code, 0);
  EXPECT_LE(oracle::mpfr_abs_error(parse_rational(a.kv["value"]), 1, 1), std::ldexp(1.0, -10));
  auto b = run({"--machine-output", "approx-exp", "1", "2", "20"});
  EXPECT_LE(oracle::mpfr_abs_error(parse_rational(b.kv["value"]), 1, 2), std::ldexp(1.0, -20));
  EXPECT_EQ(run({"approx-exp", "1", "1", "0"}).code, 2);
  EXPECT_EQ(run({"approx-exp", "0", "1", "5"}).code, 2);
}
