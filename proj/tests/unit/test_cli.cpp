#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bundleflow/commands.hpp"

using namespace bundleflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("bundleflow_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

int run(const std::string& cmd, const std::string& config, const fs::path& out, const std::string& family = "") {
    std::ostringstream err;
    return run_command({cmd, config, out.string(), family}, err);
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

}  // namespace

TEST_CASE("einstein writes json and is deterministic") {
    const auto a = scratch("ein_a"), b = scratch("ein_b");
    CHECK(run("einstein", R"({"params":{"n":[2,3]}})", a) == kExitOk);
    CHECK(run("einstein", R"({"params":{"n":[2,3]}})", b) == kExitOk);
    CHECK(slurp(a / "einstein.json") == slurp(b / "einstein.json"));
}

TEST_CASE("classify writes seven fixed-point rows") {
    const auto d = scratch("classify");
    CHECK(run("classify", "", d) == kExitOk);
    std::istringstream csv(slurp(d / "fixedpoints.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 7);
}

TEST_CASE("flow writes trajectory, metric and asymptotics") {
    const auto d = scratch("flow");
    CHECK(run("flow", R"({"params":{"n":[1,1]},"initial":{"y":[0.2,0.2]}})", d) == kExitOk);
    CHECK(slurp(d / "trajectory.csv").rfind("u,Y1,Y2,region,E\n", 0) == 0);
    CHECK(slurp(d / "metric.csv").rfind("tau,psi,b1,b2\n", 0) == 0);
    CHECK(slurp(d / "asymptotics.json").find("reached_fixed_point:eta") != std::string::npos);
}

TEST_CASE("flow from a shooting start") {
    const auto d = scratch("shoot");
    const auto cfg = R"({"params":{"n":[1,1]},"initial":{"shoot":{"from":"xi","side":"omega1"}}})";
    CHECK(run("flow", cfg, d) == kExitOk);
    CHECK(slurp(d / "asymptotics.json").find("reached_fixed_point:eta") != std::string::npos);
}

TEST_CASE("reconstruct reads a trajectory csv") {
    const auto d = scratch("recon_flow"), r = scratch("recon");
    REQUIRE(run("flow", R"({"u_end":20})", d) == kExitOk);
    const std::string cfg = R"({"trajectory":")" + (d / "trajectory.csv").string() + R"("})";
    CHECK(run("reconstruct", cfg, r) == kExitOk);
    CHECK(slurp(r / "metric.csv") == slurp(d / "metric.csv"));
}

TEST_CASE("config errors exit 1 and write nothing") {
    const auto d = scratch("bad");
    CHECK(run("flow", R"({"unknown":1})", d) == kExitConfig);
    CHECK(run("flow", "{not json", d) == kExitConfig);
    CHECK(run("einstein", R"({"params":{"n":[0,1]}})", d) == kExitConfig);
    CHECK(run("einstein", R"({"kind":"flow"})", d) == kExitConfig);
    CHECK(run("flow", R"({"initial":{"y":[-1,0.2]}})", d) == kExitConfig);
    CHECK(run("verify", "", d, "no-such-family") == kExitConfig);
    CHECK(!fs::exists(d));
}

TEST_CASE("integrator failure exits 3 with a partial trajectory") {
    const auto d = scratch("partial");
    CHECK(run("flow", R"({"integrator":{"max_steps":10}})", d) == kExitIntegrator);
    const auto body = slurp(d / "trajectory.csv");
    CHECK(body.find("# integrator failure") != std::string::npos);
    CHECK(!fs::exists(d / "metric.csv"));
}

TEST_CASE("verify family subset passes and is byte-identical") {
    const auto a = scratch("verify_a"), b = scratch("verify_b");
    CHECK(run("verify", "", a, "eta-bounds") == kExitOk);
    CHECK(run("verify", "", b, "eta-bounds") == kExitOk);
    CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
    CHECK(slurp(a / "report.txt") == slurp(b / "report.txt"));
}

#ifdef BUNDLEFLOW_CLI_PATH
TEST_CASE("executable exit codes") {
    const std::string exe = BUNDLEFLOW_CLI_PATH;
    const auto d = scratch("exe");
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    CHECK(status(exe + " einstein --out " + d.string()) == 0);
    CHECK(fs::exists(d / "einstein.json"));
    CHECK(status(exe + " einstein --config /nonexistent.json --out " + d.string()) == 1);
    CHECK(status(exe + " nonsense") == 1);
    CHECK(status(exe) == 1);
}
#endif
