#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ipf/scenario.hpp"

using namespace ipf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code;
    std::string out;
};

Run tool(const std::string& args) {
    const std::string cmd = std::string(IPF_TOOL_PATH) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int status = pclose(p);
    return {WEXITSTATUS(status), out};
}

fs::path temp_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("ipf_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    return d;
}

std::string config(const std::string& name) { return std::string(IPF_CONFIG_DIR) + "/" + name; }

}  // namespace

TEST(Config, ParsesExampleFileLikeBuiltIn) {
    const auto file = load_scenario(config("example3_positive.json"));
    const auto built = example3_scenario(true);
    EXPECT_EQ(file.A, built.A);
    EXPECT_EQ(*file.run.x0, *built.run.x0);
    EXPECT_EQ(file.run.segment_budget, built.run.segment_budget);
    EXPECT_FALSE(file.stochastic());
}

TEST(Config, FieldErrorsNameTheField) {
    const auto j = nlohmann::json::parse(R"({"system": {"n": 2, "A": [[1, 2], [3]]}})");
    try {
        parse_scenario(j);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("system.A"), std::string::npos);
    }
    const auto bad_det = nlohmann::json::parse(R"({"system": {"n": 1, "A": 1}, "run": {"detector": "x"}})");
    EXPECT_THROW(parse_scenario(bad_det), ConfigError);
}

TEST(Config, StochasticScenarioNeedsSeed) {
    const auto j = nlohmann::json::parse(R"({"system": {"n": 1, "A": -1, "sigma": 0.1}, "run": {"paths": 100}})");
    const auto sc = parse_scenario(j);
    EXPECT_THROW(validate_scenario(sc), ConfigError);
    EXPECT_THROW(cmd_run(sc, temp_dir("noseed")), ConfigError);
}

TEST(Commands, DeterministicRunReproducesExampleThree) {
    const auto dir = temp_dir("det");
    cmd_run(load_scenario(config("example3_positive.json")), dir);
    const auto rep = cmd_example3(true);
    std::ifstream in(dir / "segments.jsonl");
    std::string line;
    std::size_t k = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(nlohmann::json::parse(line), rep.data["segments"][k]) << k;
        ++k;
    }
    EXPECT_EQ(k, 2u);
    fs::remove_all(dir);
}

TEST(Commands, RepeatedRunsAreByteIdentical) {
    auto sc = load_scenario(config("stochastic_ou.json"));
    sc.run.paths = 300;
    sc.output.ensemble_csv = true;
    const auto a = temp_dir("a"), b = temp_dir("b");
    cmd_run(sc, a);
    sc.run.workers = 2;
    cmd_run(sc, b);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path();
        ++files;
    }
    EXPECT_GE(files, 5u);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Commands, Examples) {
    EXPECT_EQ(cmd_example1().exit_code, kExitOk);
    const auto e2 = cmd_example2(2.0);
    EXPECT_EQ(e2.exit_code, kExitOk);
    EXPECT_NEAR(e2.data["tau1"].get<double>(), std::numbers::pi / 6.0, 1e-9);
    EXPECT_THROW(cmd_example2(0.0), ConfigError);
    EXPECT_EQ(cmd_example3(true).exit_code, kExitOk);
    EXPECT_EQ(cmd_example3(false).exit_code, kExitOk);
}

TEST(Commands, ReportFlagsGoldenFailures) {
    Report r;
    r.checks.push_back(golden("x", 1.0, 2.0, 0.1));
    r.finish();
    EXPECT_EQ(r.exit_code, kExitGolden);
}

TEST(Commands, InvariantTable) {
    const auto one = cmd_invariants(0.0, 1);
    EXPECT_EQ(one.exit_code, kExitOk);
    EXPECT_EQ(one.data["rows"].size(), 1u);
    EXPECT_NEAR(one.data["rows"][0]["a_o"].get<double>(), 1.2564312, 1e-6);
    EXPECT_EQ(one.text.substr(0, one.text.find('\n')), "gamma,a_o,a,residual,converged,a_o_joint");
}

TEST(Tool, JsonOutputIsOneDocument) {
    for (const char* cmd : {"example1", "example2", "example3", "invariants --rows 3"}) {
        const auto r = tool(std::string("--json ") + cmd);
        EXPECT_EQ(r.code, 0) << cmd;
        EXPECT_TRUE(nlohmann::json::accept(r.out)) << cmd;
    }
}

TEST(Tool, ExitCodes) {
    EXPECT_EQ(tool("example2 --beta -1").code, kExitConfig);
    EXPECT_EQ(tool("run").code, kExitConfig);
    EXPECT_EQ(tool("bogus").code, kExitConfig);
    const auto dir = temp_dir("tool");
    fs::create_directories(dir);
    const auto cfg = dir / "noseed.json";
    std::ofstream(cfg) << R"({"system": {"n": 2, "A": [[-1, 0], [0, -2]], "sigma": 0.1}, "run": {"paths": 50}})";
    EXPECT_EQ(tool("--config " + cfg.string() + " --out-dir " + (dir / "o").string() + " run").code, kExitConfig);
    EXPECT_EQ(tool("--config " + cfg.string() + " --seed 5 --out-dir " + (dir / "o").string() + " run").code, kExitOk);
    const auto zero = dir / "zero.json";
    std::ofstream(zero) << R"({"system": {"n": 2, "A": 0}})";
    EXPECT_EQ(tool("--config " + zero.string() + " --out-dir " + (dir / "z").string() + " run").code, kExitNumerical);
    fs::remove_all(dir);
}

TEST(Tool, NetworkFromSegmentLog) {
    const auto dir = temp_dir("net");
    ASSERT_EQ(tool("--config " + config("example3_positive.json") + " --out-dir " + dir.string() + " run").code, 0);
    const auto r = tool("--json network --input " + (dir / "segments.jsonl").string());
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["node_count"].get<int>(), 1);
    fs::remove_all(dir);
}
