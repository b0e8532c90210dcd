#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(SATQFL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("satqfl_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    const auto p = dir / "config.json";
    std::ofstream(p) << body;
    return p;
}

const char* kMesh = R"({
  "topology": {"kind": "full_mesh", "primaries": 1},
  "n_satellites": 4, "duration_hours": 1, "sample_time_s": 30,
  "timing": {"round_duration_s": 360},
  "training": {"rounds": 2},
  "dataset": {"synthetic_rows": 120}
})";

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        if (std::string(SATQFL_CLI_PATH).empty()) {
            GTEST_SKIP() << "command-line tool not built";
        }
    }
};

}  // namespace

TEST_F(Cli, UsageErrorsExitWithTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("train"), 2);
    EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
    const auto dir = scratch("bad_config");
    EXPECT_EQ(run("train --config " + (dir / "missing.json").string()), 2);
    const auto bad = write_config(dir, R"({"n_satellites": 4, "bogus": true})");
    EXPECT_EQ(run("train --config " + bad.string()), 2);
    const auto broken = write_config(dir, "{not json");
    EXPECT_EQ(run("simulate-access --config " + broken.string()), 2);
    const auto ok = write_config(dir, kMesh);
    EXPECT_EQ(run("train --config " + ok.string() + " --mode sideways --out " + dir.string()), 2);
    EXPECT_EQ(run("train --config " + ok.string() + " --security rot13 --out " + dir.string()), 2);
}

TEST_F(Cli, RuntimeErrorsExitWithThree) {
    const auto dir = scratch("runtime");
    // More satellites than training rows leaves a shard empty.
    const auto cfg = write_config(dir, R"({
      "topology": {"kind": "full_mesh"}, "n_satellites": 40, "duration_hours": 1,
      "timing": {"round_duration_s": 360}, "training": {"rounds": 1},
      "dataset": {"synthetic_rows": 20}})");
    EXPECT_EQ(run("train --config " + cfg.string() + " --out " + (dir / "out").string()), 3);
    // Compare rejects reports of different lengths.
    const auto a = write_config(dir, kMesh);
    ASSERT_EQ(run("train --config " + a.string() + " --out " + (dir / "a").string()), 0);
    auto doc = nlohmann::json::parse(kMesh);
    doc["training"]["rounds"] = 3;
    const auto b = write_config(dir, doc.dump());
    ASSERT_EQ(run("train --config " + b.string() + " --out " + (dir / "b").string()), 0);
    EXPECT_EQ(run("compare " + (dir / "a").string() + " " + (dir / "b").string()), 3);
}

TEST_F(Cli, TrainTwiceIsByteIdentical) {
    const auto dir = scratch("repro");
    const auto cfg = write_config(dir, kMesh);
    ASSERT_EQ(run("train --config " + cfg.string() + " --seed 9 --mode async --security otp --out " +
                  (dir / "one").string()),
              0);
    ASSERT_EQ(run("train --config " + cfg.string() + " --seed 9 --mode async --security otp --out " +
                  (dir / "two").string()),
              0);
    for (const auto* f : {"trace.jsonl", "summary.csv", "accuracy.csv", "loss.csv", "comm_time.csv", "report.json"}) {
        EXPECT_EQ(slurp(dir / "one" / f), slurp(dir / "two" / f)) << f;
    }
    const auto report = nlohmann::json::parse(slurp(dir / "one" / "report.json"));
    EXPECT_EQ(report["config"]["seed"], 9);
}

TEST_F(Cli, CompareAndSimulateAccess) {
    const auto dir = scratch("compare");
    const auto cfg = write_config(dir, kMesh);
    ASSERT_EQ(run("train --config " + cfg.string() + " --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run("train --config " + cfg.string() + " --security aead --out " + (dir / "b").string()), 0);
    EXPECT_EQ(run("compare " + (dir / "a").string() + " " + (dir / "b" / "report.json").string() + " --out " +
                  (dir / "cmp").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "cmp" / "comparison.csv"));
    EXPECT_EQ(run("simulate-access --config " + cfg.string() + " --out " + (dir / "acc").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "acc" / "contact_plan.csv"));
    EXPECT_TRUE(fs::exists(dir / "acc" / "partitions.jsonl"));
}

TEST_F(Cli, ProtocolDemos) {
    const auto dir = scratch("demos");
    ASSERT_EQ(run("qkd-demo --qubits 256 --seed 3 --out " + dir.string()), 0);
    auto t = nlohmann::json::parse(slurp(dir / "qkd_transcript.jsonl"));
    EXPECT_FALSE(t["aborted"].get<bool>());
    EXPECT_TRUE(t["keys_match"].get<bool>());
    ASSERT_EQ(run("qkd-demo --qubits 1024 --eve --seed 3 --out " + dir.string()), 0);
    t = nlohmann::json::parse(slurp(dir / "qkd_transcript.jsonl"));
    EXPECT_TRUE(t["aborted"].get<bool>());
    EXPECT_EQ(run("qkd-demo --qubits 4"), 2);
    ASSERT_EQ(run("teleport-demo --theta 1.2 --phi -0.3 --out " + dir.string()), 0);
    t = nlohmann::json::parse(slurp(dir / "teleport_transcript.jsonl"));
    EXPECT_NEAR(t["fidelity"].get<double>(), 1.0, 1e-9);
    EXPECT_DOUBLE_EQ(t["recovered"]["theta"].get<double>(), 1.2);
}
