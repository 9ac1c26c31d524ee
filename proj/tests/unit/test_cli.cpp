#include "envlab/cli.hpp"
#include "envlab/json_io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace envlab;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("envlab_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  struct Result {
    int code;
    std::string out;
    std::string err;
  };

  Result run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
  }

  std::string bell() {
    return write("bell.json", R"({"dims":[2,2],"label":"psi1","amplitudes":[0.7071067811865476,0,0,0.7071067811865476]})");
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SchmidtBell) {
  const Result r = run({"schmidt", bell()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json j = parse_json(r.out);
  EXPECT_EQ(j["rank"], 2);
  EXPECT_NEAR(j["coefficients"][0].get<double>(), std::sqrt(0.5), 1e-15);
}

TEST_F(CliTest, ValidationErrorsExitTwo) {
  const Result bad = run({"schmidt", write("u.json", R"({"dims":[2,2],"amplitudes":[0.5,0,0,0.5]})")});
  EXPECT_EQ(bad.code, kExitValidation);
  EXPECT_NE(bad.err.find("norm"), std::string::npos) << bad.err;
  const Result broken = run({"schmidt", write("b.json", "{\"dims\": [2,2],\n  \"amplitudes\": [1 0]}")});
  EXPECT_EQ(broken.code, kExitValidation);
  EXPECT_NE(broken.err.find(":2:"), std::string::npos) << broken.err;
  EXPECT_EQ(run({"schmidt", (dir_ / "missing.json").string()}).code, kExitValidation);
  EXPECT_EQ(run({"frobnicate"}).code, kExitValidation);
  EXPECT_EQ(run({"derive", bell(), "--epsilon", "0"}).code, kExitValidation);
  EXPECT_EQ(run({"--ruleset", "nonsense", "protocol", bell()}).code, kExitValidation);
}

TEST_F(CliTest, HelpExitsZero) {
  const Result r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE((r.out + r.err).find("nosignal"), std::string::npos);
}

TEST_F(CliTest, EnvariantSwap) {
  const std::string u = write("swap.json", R"({"side":"E","matrix":[[0,1],[1,0]]})");
  const Result r = run({"envariant", bell(), u});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(parse_json(r.out)["envariant"], true);
  const std::string prod = write("prod.json", R"({"dims":[2,2],"amplitudes":[1,0,0,0]})");
  EXPECT_EQ(parse_json(run({"envariant", prod, u}).out)["envariant"], false);
}

TEST_F(CliTest, ProtocolRulesetsAndStrict) {
  for (const std::string rs : {"barnum", "zurek"}) {
    const Result r = run({"--ruleset", rs, "protocol", bell()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const Json j = parse_json(r.out);
    EXPECT_EQ(j["certificate"]["status"], "determined");
    EXPECT_EQ(j["certificate"]["assignment"]["pE(1|psi1)"]["den"], 2);
  }
  const Result ab = run({"--ruleset", "barnum-without-PCP", "protocol", bell()});
  EXPECT_EQ(ab.code, kExitOk);
  EXPECT_EQ(parse_json(ab.out)["certificate"]["status"], "underdetermined");
  EXPECT_EQ(run({"--strict", "--ruleset", "barnum-without-PCP", "protocol", bell()}).code, kExitNotDetermined);
  EXPECT_EQ(run({"--strict", "protocol", bell()}).code, kExitOk);
}

TEST_F(CliTest, CustomRuleset) {
  const std::string rs = write("rs.json", R"({"name":"mine","rules":["ENV_E_TO_S","NORM"]})");
  const Result r = run({"--ruleset", "custom:" + rs, "protocol", bell()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(parse_json(r.out)["trace"]["ruleset"]["name"], "mine");
}

TEST_F(CliTest, DeriveExactAndApproximate) {
  const std::string third = write("third.json",
      R"({"dims":[2,2],"exact":{"num":[1,0,0,2],"den":3}})");
  const Result r = run({"derive", third});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Json j = parse_json(r.out);
  EXPECT_EQ(j["exactness"], "exact");
  EXPECT_EQ(j["assignment"]["pS(0|psi)"]["num"], 2);
  EXPECT_EQ(j["assignment"]["pS(0|psi)"]["den"], 3);

  const double a = std::sqrt(1.0 / std::acos(-1.0));
  const double b = std::sqrt(1.0 - a * a);
  const std::string irr = write("irr.json", "{\"dims\":[2,2],\"amplitudes\":[" + std::to_string(a) + ",0,0," +
                                                std::to_string(b) + "]}");
  const Result q = run({"--tol-norm", "1e-5", "derive", irr, "--epsilon", "1e-3"});
  ASSERT_EQ(q.code, kExitOk) << q.err;
  const Json jq = parse_json(q.out);
  EXPECT_EQ(jq["exactness"], "approximate");
  EXPECT_LE(jq["born_check"]["max_abs_dev"].get<double>(), 1e-3 + 1e-9);
}

TEST_F(CliTest, OutputIsReproducible) {
  const std::string s = write("s.json", R"({"dims":[2,3],"amplitudes":[0.6,0,0,0,0.8,0]})");
  const Result a = run({"--seed", "7", "nosignal", s, "--restarts", "3", "--iters", "20"});
  const Result b = run({"--seed", "7", "nosignal", s, "--restarts", "3", "--iters", "20"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_LT(parse_json(a.out)["best_distance"].get<double>(), 1e-6);

  ::setenv("ENVLAB_SEED", "7", 1);
  const Result c = run({"nosignal", s, "--restarts", "3", "--iters", "20"});
  ::unsetenv("ENVLAB_SEED");
  EXPECT_EQ(c.out, a.out);

  const std::string out = (dir_ / "report.json").string();
  const Result d = run({"--seed", "7", "--out", out, "nosignal", s, "--restarts", "3", "--iters", "20"});
  EXPECT_EQ(d.code, kExitOk);
  EXPECT_TRUE(d.out.empty());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), a.out);

  const Result z = run({"nosignal", s, "--restarts", "0"});
  EXPECT_EQ(parse_json(z.out)["best_distance"].get<double>(), 0.0);
}

#ifdef ENVLAB_CLI_PATH
TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = ENVLAB_CLI_PATH;
  if (!fs::exists(bin)) GTEST_SKIP() << "envlab binary not built";
  const std::string sink = " >/dev/null 2>&1";
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " schmidt " + bell() + sink).c_str())), 0);
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " schmidt /nonexistent.json" + sink).c_str())), 2);
  EXPECT_EQ(WEXITSTATUS(std::system(
                (bin + " --strict --ruleset zurek-without-PEDANTIC protocol " + bell() + sink).c_str())),
            3);
}
#endif
