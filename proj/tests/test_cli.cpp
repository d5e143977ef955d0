#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kBin = CQA_BIN;
const std::string kData = CQA_DATA_DIR;

struct RunResult {
    int exit_code = -1;
    std::string out;
};

// Runs the CLI through the shell, capturing stdout+stderr.
RunResult run(const std::string& args) {
    static int counter = 0;
    fs::path log = fs::temp_directory_path() / ("cqa_cli_" + std::to_string(++counter) + ".log");
    std::string cmd = kBin + " " + args + " > " + log.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    fs::remove(log);
    return r;
}

fs::path tmp_json(const std::string& stem) {
    return fs::temp_directory_path() / (stem + ".json");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("validate reports the realized constraint count") {
    RunResult r = run("validate " + kData + "/example72.json --truncate 6");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("ok:") != std::string::npos);
    CHECK(r.out.find("n=2") != std::string::npos);
}

TEST_CASE("analyze writes a full report with the expected verdicts") {
    fs::path out = tmp_json("cli_analyze_circle");
    RunResult r = run("analyze " + kData + "/circle.json --point opt --json " + out.string());
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("feasible: yes") != std::string::npos);
    json j = json::parse(slurp(out));
    CHECK(j["tool"] == "cqa");
    CHECK(j["rcrcqPlus"]["overall"] == "yes");
    CHECK(j["abadie"]["verdict"] == "holds-numerically");
    CHECK(j["multipliers"]["lambda"]["1"].get<double>() == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(j["closedness"]["justification"].get<std::string>().find("closed") !=
          std::string::npos);
    fs::remove(out);
}

TEST_CASE("exit codes distinguish infeasible, io, and usage errors") {
    // infeasible evaluation point
    CHECK(run("analyze " + kData + "/affine.json --point 3,3").exit_code == 3);
    // missing input file
    CHECK(run("analyze " + kData + "/nope.json --point 0,0").exit_code == 2);
    // corrupt document
    fs::path bad = tmp_json("cli_corrupt");
    std::ofstream(bad) << "{not json";
    CHECK(run("validate " + bad.string()).exit_code == 2);
    fs::remove(bad);
    // unknown point name
    CHECK(run("analyze " + kData + "/circle.json --point nowhere").exit_code == 1);
    // zero direction
    CHECK(run("tangent " + kData + "/circle.json --point opt --direction 0,0").exit_code == 1);
    // unknown flag
    CHECK(run("analyze " + kData + "/circle.json --point opt --frobnicate").exit_code == 1);
}

TEST_CASE("reports replay byte for byte under a fixed seed") {
    fs::path a = tmp_json("cli_replay_a");
    fs::path b = tmp_json("cli_replay_b");
    std::string args = "analyze " + kData + "/example72.json --point 0,0 --truncate 6 --seed 7";
    REQUIRE(run(args + " --json " + a.string()).exit_code == 0);
    REQUIRE(run(args + " --json " + b.string()).exit_code == 0);
    std::string ja = slurp(a), jb = slurp(b);
    CHECK(!ja.empty());
    CHECK(ja == jb);
    json j = json::parse(ja);
    CHECK(j["parameters"]["seed"] == 7);
    CHECK(j["abadie"]["verdict"] == "fails");
    fs::remove(a);
    fs::remove(b);
}

TEST_CASE("seed falls back to the environment variable") {
    fs::path out = tmp_json("cli_env_seed");
    std::string cmd = "CQA_SEED=11 " + kBin + " analyze " + kData +
                      "/circle.json --point opt --json " + out.string() + " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    json j = json::parse(slurp(out));
    CHECK(j["parameters"]["seed"] == 11);
    fs::remove(out);
}

TEST_CASE("tangent prints certificate, condition, and oracle lines") {
    RunResult r = run("tangent " + kData + "/example72.json --point 0,0 --direction 1,1 "
                      "--truncate 6 --oracle");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("tangency: not-tangent") != std::string::npos);
    CHECK(r.out.find("oracle: reject") != std::string::npos);

    fs::path out = tmp_json("cli_tangent_axis");
    r = run("tangent " + kData + "/example72.json --point 0,0 --direction 1,0 --truncate 6 "
            "--json " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("tangency: tangent") != std::string::npos);
    json j = json::parse(slurp(out));
    CHECK(j["certificate"]["verdict"] == "tangent");
    CHECK(j["h1"]["verdict"] == "unverified");
    fs::remove(out);
}

TEST_CASE("kkt prints the multiplier summary") {
    RunResult r = run("kkt " + kData + "/affine.json --point origin");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("kkt: yes") != std::string::npos);
    CHECK(r.out.find("\"3\":0.0") != std::string::npos);
}
