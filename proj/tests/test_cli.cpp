#include "memloss/io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef MEMLOSS_CLI
#error "MEMLOSS_CLI must point at the memloss executable"
#endif

using namespace memloss;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("memloss_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    // Runs the CLI inside the scratch directory; stdout goes to `stdout_file`.
    int run(const std::string& args, const std::string& env = "", const std::string& stdout_file = "stdout.json") {
        const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + MEMLOSS_CLI + "' " + args + " > " +
                                stdout_file + " 2> stderr.txt";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    json stdout_json(const std::string& name = "stdout.json") { return json::parse(read_text(dir_ / name)); }
    std::string text(const std::string& name) { return read_text(dir_ / name); }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, MemlossExample) {
    ASSERT_EQ(run("memloss --family lsv --gamma 0.5 --n-max 200 --grid 32768 --expect-slope -2 --tol 0.4"), 0)
        << text("stderr.txt");
    const auto s = stdout_json();
    EXPECT_TRUE(s["pass"].get<bool>());
    const double slope = s["analysis"]["fit"]["slope"];
    EXPECT_GE(slope, -2.4);
    EXPECT_LE(slope, -1.6);
    const auto csv = read_csv(dir_ / "memloss.csv");
    EXPECT_EQ(csv.header_line(), "n,tv");
    EXPECT_EQ(csv.rows.size(), 201u);
}

TEST_F(Cli, FailedGateExitsOne) {
    EXPECT_EQ(run("memloss --family lsv --gamma 0.5 --n-max 50 --grid 1024 --expect-slope 3 --tol 0.1"), 1);
    EXPECT_FALSE(stdout_json()["pass"].get<bool>());
}

TEST_F(Cli, MalformedConfigExitsTwo) {
    std::ofstream(dir_ / "bad.json") << "{\"kind\": \"iid\", ";
    EXPECT_EQ(run("tails --config bad.json"), 2);
    EXPECT_NE(text("stderr.txt").find("bad.json"), std::string::npos);
    std::ofstream(dir_ / "unknown.json") << R"({"kind": "periodic", "family": "lsv", "cycle": [0.5], "extra": 1})";
    EXPECT_EQ(run("tails --config unknown.json"), 2);
    EXPECT_EQ(run("tails --family nosuchmap"), 2);
    EXPECT_EQ(run("nosuchcommand"), 2);
}

TEST_F(Cli, PikovskyTails) {
    ASSERT_EQ(run("tails --family pikovsky --gamma 2.0 --base lebesgue --n-max 2000 --expect-slope -1 --tol 0.15"), 0)
        << text("stderr.txt");
    const auto csv = read_csv(dir_ / "tails.csv");
    EXPECT_EQ(csv.header_line(), "n,value,stderr");
    EXPECT_EQ(csv.column("value")[1], 1.0);
    EXPECT_EQ(csv.rows[1][2], "");
    EXPECT_NEAR(stdout_json()["analysis"]["fit"]["slope"].get<double>(), -1.0, 0.15);
}

TEST_F(Cli, SummarizeMatchesRunTime) {
    ASSERT_EQ(run("memloss --family lsv --gamma 0.5 --n-max 100 --grid 4096 --out m.csv"), 0);
    const auto at_run = stdout_json()["analysis"];
    ASSERT_EQ(run("summarize m.csv", "", "summary.json"), 0);
    auto later = stdout_json("summary.json").at(0);
    later.erase("csv");
    EXPECT_EQ(later.dump(), at_run.dump());
}

TEST_F(Cli, SummarizeRejectsEmptyAndForeign) {
    std::ofstream(dir_ / "empty.csv") << "";
    EXPECT_EQ(run("summarize empty.csv"), 2);
    EXPECT_NE(text("stderr.txt").find("FormatError"), std::string::npos);
    std::ofstream(dir_ / "foreign.csv") << "a,b\n1,2\n";
    EXPECT_EQ(run("summarize foreign.csv"), 2);
}

TEST_F(Cli, DeterministicAcrossThreadCounts) {
    const std::string args = "tails --family lsv --gamma 0.5 --n-max 100 --samples 20000 --seed 7 --out t.csv";
    ASSERT_EQ(run(args, "MEMLOSS_THREADS=1"), 0);
    const auto one = text("t.csv");
    ASSERT_EQ(run(args, "MEMLOSS_THREADS=4"), 0);
    EXPECT_EQ(text("t.csv"), one);
    const std::string c = "coupling --n-max 100 --samples 20000 --seed 3 --out c.csv";
    ASSERT_EQ(run(c, "MEMLOSS_THREADS=1"), 0);
    const auto c1 = text("c.csv");
    ASSERT_EQ(run(c, "MEMLOSS_THREADS=3"), 0);
    EXPECT_EQ(text("c.csv"), c1);
}

TEST_F(Cli, CouplingSeedsAgree) {
    std::ofstream(dir_ / "model.json") << R"({"theta": 0.25, "tails": "synthetic:power:2", "beta": 2, "beta_prime": 2})";
    ASSERT_EQ(run("coupling --config model.json --n-max 300 --samples 100000 --seed 1 --out a.csv --max-z 4 "
                  "--expect-plateau"),
              0)
        << text("stderr.txt");
    const double s1 = stdout_json()["analysis"]["fit_mc"]["slope"];
    ASSERT_EQ(run("coupling --config model.json --n-max 300 --samples 100000 --seed 2 --out b.csv --max-z 4"), 0);
    const double s2 = stdout_json()["analysis"]["fit_mc"]["slope"];
    EXPECT_NEAR(s1, s2, 0.1);
    EXPECT_NE(text("a.csv"), text("b.csv"));
}

TEST_F(Cli, OtherSubcommands) {
    ASSERT_EQ(run("mixing --family lsv --gamma 0.5 --n-max 100 --grid 4096 --expect-min 0.05"), 0) << text("stderr.txt");
    EXPECT_EQ(read_csv(dir_ / "mixing.csv").header_line(), "n,mass");
    ASSERT_EQ(run("frequency --family lsv --gamma 0.5 0.8 --threshold 0.6 --b 0.5 --n-max 1000"), 0);
    const auto f = stdout_json();
    EXPECT_NEAR(f["frequency"]["a"].get<double>(), 0.5, 0.5 / f["frequency"]["N"].get<double>());
    ASSERT_EQ(run("evolve --family pikovsky --gamma 1.5 --density uniform --steps 5 --grid 4096"), 0);
    EXPECT_NEAR(stdout_json()["analysis"]["mass"].get<double>(), 1.0, 1e-12);
    const auto e = text("evolve.csv");
    EXPECT_EQ(e.find('\r'), std::string::npos);
    EXPECT_EQ(e.substr(0, 10), "x,density\n");
}
