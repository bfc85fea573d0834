#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <string>
#include <sys/wait.h>

namespace {

struct Result {
  int status;
  std::string out;
};

Result run_cli(const std::string& args) {
  const std::string cmd = std::string(ERW_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) out += buf.data();
  const int raw = pclose(pipe);
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, out};
}

}  // namespace

TEST(Cli, Version) {
  const auto r = run_cli("--version");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out.rfind("erw ", 0), 0u);
}

TEST(Cli, ClassifyExitCodes) {
  EXPECT_EQ(run_cli("classify --env-inline finite:5/6,5/6,5/6").status, 0);
  const auto r = run_cli("classify --env-inline transient-example");
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find("verdict=undetermined"), std::string::npos);
  EXPECT_EQ(run_cli("classify --env-inline finite:1.5").status, 1);
}

TEST(Cli, ParamsCsv) {
  const auto r = run_cli("params --env-inline placebo --n-grid 4,8");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out.rfind("n,mu,rho,nu,theta,eps_used\n4,", 0), 0u);
}

TEST(Cli, BlpExact) {
  const auto r = run_cli("blp --env-inline finite:3/4 --n 1 --eps 1e-6");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out.rfind("m,mass\n0,0.25\n1,0.375\n", 0), 0u);
}

TEST(Cli, WalkSummary) {
  const auto r = run_cli("walk --env-inline placebo --reps 3 --horizon 100");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("reps = 3"), std::string::npos);
}
