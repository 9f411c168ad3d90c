#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "eqk/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

// Runs the CLI with stderr folded into the captured output.
Run run(const std::string& args) {
  Run r;
  const std::string cmd = std::string(EQK_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("eqk_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "net.csv") << "tail,head,t_free,capacity,rho,mu_power,model\n"
                                       "o,d,1,1,1,1,bpr\n"
                                       "o,d,2,1,1,1,bpr\n";
    std::ofstream(dir_ / "od.csv") << "origin,destination,demand\no,d,10\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string in(const std::string& name) const { return (dir_ / name).string(); }
  std::string inputs() const { return "--edges " + in("net.csv") + " --trips " + in("od.csv"); }

  fs::path dir_;
};

TEST_F(Cli, SolveWritesOutputs) {
  const auto r = run("solve " + inputs() + " --gamma 1 --epsilon 1e-6 --method dual-universal --out-flows " +
                     in("flows.csv") + " --out-cert " + in("cert.json") + " --out-manifest " + in("manifest.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto cert = nlohmann::json::parse(slurp(dir_ / "cert.json"));
  EXPECT_EQ(cert["method"], "dual-universal");
  EXPECT_LE(cert["gap"].get<double>(), 1e-6);
  for (const char* key : {"gamma", "epsilon", "iterations", "primal_value", "dual_value", "trace"}) {
    EXPECT_TRUE(cert.contains(key)) << key;
  }
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "manifest.json"));
  EXPECT_EQ(manifest["config"]["gamma"].get<double>(), 1.0);
  EXPECT_EQ(manifest["config"]["method"], "dual-universal");
  EXPECT_EQ(manifest["inputs"]["edges"], in("net.csv"));
}

TEST_F(Cli, FlowsRoundTrip) {
  ASSERT_EQ(run("solve " + inputs() + " --method dual-fgm --out-flows " + in("flows.csv")).code, 0);
  const auto text = slurp(dir_ / "flows.csv");
  std::istringstream is(text);
  const auto records = eqk::read_flows(is);
  ASSERT_EQ(records.size(), 2u);
  std::ostringstream again;
  again << "edge_index,tail,head,flow,time\n";
  for (const auto& rec : records) {
    again << rec.edge_index << ',' << rec.tail << ',' << rec.head << ',' << eqk::format_double(rec.flow) << ','
          << eqk::format_double(rec.time) << '\n';
  }
  EXPECT_EQ(again.str(), text);
}

TEST_F(Cli, ZeroGammaRefusedForFastGradient) {
  const auto r = run("solve " + inputs() + " --gamma 0 --method dual-fgm");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("dual-smd"), std::string::npos) << r.output;
}

TEST_F(Cli, GammaAutoIsEchoed) {
  const auto r = run("solve " + inputs() + " --gamma auto --target-accuracy 0.1 --method dual-universal --out-manifest " +
                     in("manifest.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "manifest.json"));
  EXPECT_NEAR(manifest["config"]["gamma"].get<double>(), 0.1 / (2 * 10 * std::log(2.0)), 1e-17);
}

TEST_F(Cli, PathMethods) {
  EXPECT_EQ(run("solve " + inputs() + " --method path-fgm --out-flows " + in("a.csv")).code, 0);
  EXPECT_EQ(run("solve " + inputs() + " --method path-penalty --lambda 5e-6 --epsilon 1e-4").code, 0);
  EXPECT_EQ(run("solve " + inputs() + " --method path-fgm --strongly-convex").code, 0);
}

TEST_F(Cli, NonConvergenceExitCode) {
  EXPECT_EQ(run("solve " + inputs() + " --method dual-fgm --epsilon 1e-12 --max-iters 3").code, 2);
}

TEST_F(Cli, InputErrors) {
  EXPECT_EQ(run("solve --edges " + in("missing.csv") + " --trips " + in("od.csv")).code, 1);
  std::ofstream(dir_ / "bad.csv") << "tail,head,t_free,capacity,rho,mu_power,model\no,d,1,0,1,1,bpr\n";
  const auto r = run("solve --edges " + in("bad.csv") + " --trips " + in("od.csv"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("capacity"), std::string::npos);
  EXPECT_EQ(run("solve " + inputs() + " --method nope").code, 1);
}

TEST_F(Cli, VerifyOnly) {
  const auto r = run("verify --only gradient-check");
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream lines(r.output);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["check"], "gradient-check");
    EXPECT_TRUE(j["pass"].get<bool>());
    ++count;
  }
  EXPECT_GT(count, 0);
}

TEST_F(Cli, VerifySamplerIsReproducible) {
  const auto a = run("verify --seed 7 --only sampler");
  const auto b = run("verify --seed 7 --only sampler");
  ASSERT_EQ(a.code, 0) << a.output;
  EXPECT_EQ(a.output, b.output);
}

TEST_F(Cli, VerifyDefaultRunPasses) {
  const auto r = run("verify");
  EXPECT_EQ(r.code, 0) << r.output;
}

TEST_F(Cli, PsiChainFreeFlow) {
  const auto r = run("psi --instance chain --free-flow --gamma 1 --compare-layered");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("gamma_psi -15\n"), std::string::npos) << r.output;
  const auto pos = r.output.find("layered_max_discrepancy ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LE(std::stod(r.output.substr(pos + 24)), 1e-10);
}

TEST_F(Cli, PsiParallelMatchesEnumeration) {
  std::ofstream(dir_ / "t.csv") << "edge_index,time\n0,1\n1,2\n";
  const auto r = run("psi " + inputs() + " --t-file " + in("t.csv") + " --gamma 1");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto pos = r.output.find("gamma_psi ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NEAR(std::stod(r.output.substr(pos + 10)), 10 * std::log(std::exp(-1.0) + std::exp(-2.0)), 1e-12);
}

}  // namespace
