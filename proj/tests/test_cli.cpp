#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = INKFLOW_CLI_PATH;
const fs::path kScenarios = INKFLOW_SCENARIO_DIR;

int run(const std::string& args) {
    const std::string cmd = "\"" + kCli.string() + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("inkflow_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("estimate"), 1);
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, ConfigErrors) {
    const auto dir = scratch("config");
    EXPECT_EQ(run("simulate --set protocol.t_sym_s=-1 --out " + q(dir)), 2);
    {
        std::ofstream(dir / "bad.json") << "{\"geometry\": {\"diameter_mm\": \"wide\"}}";
    }
    EXPECT_EQ(run("simulate --scenario " + q(dir / "bad.json") + " --out " + q(dir)), 2);
    {
        std::ofstream(dir / "garbage.json") << "{not json";
    }
    EXPECT_EQ(run("simulate --scenario " + q(dir / "garbage.json") + " --out " + q(dir)), 3);
}

TEST(Cli, IoErrors) {
    const auto dir = scratch("io");
    EXPECT_EQ(run("estimate --trace " + q(dir / "missing.csv") + " --out " + q(dir / "e.csv")), 3);
    EXPECT_EQ(run("simulate --scenario " + q(dir / "missing.json")), 3);
}

TEST(Cli, NumericalErrors) {
    const auto dir = scratch("numerical");
    {
        std::ofstream os(dir / "sensor.csv");
        os << "t,ch415,ch445,ch480,ch515,ch555,ch590,ch630,ch680\n0,1,1,1,1,0,1,1,1\n";
    }
    EXPECT_EQ(run("estimate --trace " + q(dir / "sensor.csv") + " --out " + q(dir / "e.csv")), 4);
}

TEST(Cli, FullWorkflow) {
    const auto dir = scratch("workflow");
    const auto scen = q(kScenarios / "eval_tsym_2.json");
    ASSERT_EQ(run("simulate --scenario " + scen + " --set payload_bits=12 --out " + q(dir / "sim")), 0);
    for (const char* f : {"sensor.csv", "intensity.csv", "bits.txt", "manifest.json"})
        EXPECT_TRUE(fs::exists(dir / "sim" / f)) << f;

    ASSERT_EQ(run("simulate-calibration --scenario " + scen + " --pulses 3 --out " + q(dir / "cal")), 0);
    ASSERT_EQ(run("calibrate --cyan " + q(dir / "cal/cyan.csv") + " --magenta " + q(dir / "cal/magenta.csv") +
                  " --yellow " + q(dir / "cal/yellow.csv") + " --windows " + q(dir / "cal/windows.json") +
                  " --out " + q(dir / "calibration.json")),
              0);
    ASSERT_EQ(run("estimate --trace " + q(dir / "sim/sensor.csv") + " --calibration " + q(dir / "calibration.json") +
                  " --out " + q(dir / "estimate.csv")),
              0);
    ASSERT_EQ(run("detect --scenario " + scen + " --trace " + q(dir / "estimate.csv") + " --tx " +
                  q(dir / "sim/bits.txt") + " --tau 0.3 --out " + q(dir / "detection.json")),
              0);
    EXPECT_TRUE(fs::exists(dir / "detection.json"));
    ASSERT_EQ(run("fit-cir --trace " + q(dir / "sim/intensity.csv") + " --ink cyan --injection-time 0 --window-end 2 "
                  "--scenario " + scen + " --out " + q(dir / "fit.json")),
              0);
    EXPECT_TRUE(fs::exists(dir / "fit.json"));
}

TEST(Cli, OutputDirectoryFromEnvironment) {
    const auto dir = scratch("env");
    const std::string cmd = "INKFLOW_OUTPUT_DIR=" + q(dir) + " \"" + kCli.string() +
                            "\" simulate --set payload_bits=4 > /dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(dir / "sensor.csv"));
}

TEST(Cli, BerSweepWritesTables) {
    const auto dir = scratch("sweep");
    ASSERT_EQ(run("ber-sweep --scenario " + q(kScenarios / "eval_tsym_2.json") +
                  " --set payload_bits=10 --taus 0:1:5 --out " + q(dir)),
              0);
    std::ifstream is(dir / "ber_sweep.csv");
    int lines = 0;
    for (std::string l; std::getline(is, l);) ++lines;
    EXPECT_EQ(lines, 6);
    EXPECT_TRUE(fs::exists(dir / "ber_summary.csv"));
    EXPECT_EQ(run("ber-sweep --scenario " + q(kScenarios / "eval_tsym_2.json") + " --taus 0:1:0 --out " + q(dir)), 2);
}
