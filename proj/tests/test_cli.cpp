// SPDX-License-Identifier: Apache-2.0
//
// Black-box tests for the rfsolve binary. The binary path arrives via the
// RFSOLVE_CLI environment variable (set by the test harness).

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("RFSOLVE_CLI");
    REQUIRE_MESSAGE(env != nullptr, "RFSOLVE_CLI must point at the rfsolve binary");
    return env;
}

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    fs::path log = fs::temp_directory_path() / "rfsolve-tests" / "cli-log.txt";
    fs::create_directories(log.parent_path());
    std::string cmd = cli_path() + " " + args + " > " + log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(bool(is));
    return std::string((std::istreambuf_iterator<char>(is)), {});
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / "rfsolve-tests" / name;
    std::error_code ec;
    fs::remove_all(d, ec);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("--help exits 0") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("sample --help").exit_code == 0);
}

TEST_CASE("missing subcommand exits 2 with error: prefix on stderr") {
    RunResult r = run_cli("");
    CHECK(r.exit_code == 2);
    CHECK(r.output.rfind("error:", 0) == 0);
}

TEST_CASE("unknown flag exits 2") {
    CHECK(run_cli("sample --no-such-flag 1").exit_code == 2);
}

TEST_CASE("unknown field name exits 2") {
    RunResult r = run_cli("sample --field bogus --out " + fresh_dir("cli-badfield").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("mlp field without --model exits 2") {
    CHECK(run_cli("sample --field mlp").exit_code == 2);
}

TEST_CASE("converge on a non-analytic field exits 2") {
    CHECK(run_cli("converge --field attention").exit_code == 2);
}

TEST_CASE("unknown config key reports the line number and exits 2") {
    fs::path dir = fresh_dir("cli-config-bad");
    fs::path cfg = dir / "bad.cfg";
    std::ofstream(cfg) << "field = linear-state\nwibble = 3\n";
    RunResult r = run_cli("sample --config " + cfg.string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("line 2") != std::string::npos);
    CHECK(r.output.find("wibble") != std::string::npos);
}

TEST_CASE("config file and equivalent flags produce byte-identical outputs") {
    fs::path d_flags = fresh_dir("cli-eq-flags");
    fs::path d_cfg = fresh_dir("cli-eq-cfg");
    REQUIRE(run_cli("sample --field linear-state --a 0.7 --dim 2 --n 10 --order 2 --seed 4 --out " +
                    d_flags.string())
                .exit_code == 0);
    fs::path cfg = d_cfg / "run.cfg";
    std::ofstream(cfg) << "command = sample\nfield = linear-state\na = 0.7\ndim = 2\n"
                       << "n = 10\norder = 2\nseed = 4\nout = " << d_cfg.string() << "\n";
    REQUIRE(run_cli("--config " + cfg.string()).exit_code == 0);
    CHECK(slurp(d_flags / "sample-linear-state-2-10.csv") ==
          slurp(d_cfg / "sample-linear-state-2-10.csv"));
    CHECK(slurp(d_flags / "sample-linear-state-2-10.rft") ==
          slurp(d_cfg / "sample-linear-state-2-10.rft"));
}

TEST_CASE("explicit flags override config-file values") {
    fs::path d_ref = fresh_dir("cli-ovr-ref");
    fs::path d_ovr = fresh_dir("cli-ovr-out");
    REQUIRE(run_cli("sample --field linear-state --a 0.3 --n 10 --seed 1 --out " +
                    d_ref.string())
                .exit_code == 0);
    fs::path cfg = d_ovr / "run.cfg";
    std::ofstream(cfg) << "a = 9.9\nseed = 77\n";  // both overridden below
    REQUIRE(run_cli("sample --config " + cfg.string() +
                    " --field linear-state --a 0.3 --n 10 --seed 1 --out " + d_ovr.string())
                .exit_code == 0);
    CHECK(slurp(d_ref / "sample-linear-state-2-10.rft") ==
          slurp(d_ovr / "sample-linear-state-2-10.rft"));
}

TEST_CASE("same seed twice is byte-identical, different seed differs") {
    fs::path a = fresh_dir("cli-rep-a"), b = fresh_dir("cli-rep-b"), c = fresh_dir("cli-rep-c");
    for (const fs::path& d : {a, b})
        REQUIRE(run_cli("invert --field rotation --omega 1.1 --n 8 --seed 3 --out " + d.string())
                    .exit_code == 0);
    REQUIRE(run_cli("invert --field rotation --omega 1.1 --n 8 --seed 4 --out " + c.string())
                .exit_code == 0);
    CHECK(slurp(a / "invert-rotation-2-8.rft") == slurp(b / "invert-rotation-2-8.rft"));
    CHECK(slurp(a / "invert-rotation-2-8.rft") != slurp(c / "invert-rotation-2-8.rft"));
}

TEST_CASE("RFSOLVE_OUT is used when --out is absent") {
    fs::path d = fresh_dir("cli-envout");
    std::string cmd = "RFSOLVE_OUT=" + d.string() + " " + cli_path() +
                      " sample --field constant --a 1.0 --n 5 --seed 0 > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(d / "sample-constant-2-5.csv"));
}

TEST_CASE("roundtrip on a constant field reports zero mse") {
    fs::path d = fresh_dir("cli-rt");
    RunResult r = run_cli("roundtrip --field constant --a 2.0 --n 10 --seed 0 --out " + d.string());
    CHECK(r.exit_code == 0);
    auto pos = r.output.find("roundtrip mse ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(r.output.substr(pos + 14)) <= 1e-28);
    CHECK(fs::exists(d / "roundtrip-constant-2-10.csv"));
}

TEST_CASE("train then sample from the saved model") {
    fs::path d = fresh_dir("cli-train");
    RunResult t = run_cli("train --dist mixture --train-steps 80 --batch 16 --seed 2 --out " +
                          d.string());
    REQUIRE(t.exit_code == 0);
    fs::path model = d / "mlp-mixture-2";
    REQUIRE(fs::exists(model / "manifest.txt"));
    RunResult s = run_cli("sample --field mlp --model " + model.string() +
                          " --n 10 --order 2 --seed 5 --out " + d.string());
    CHECK(s.exit_code == 0);
    CHECK(fs::exists(d / "sample-mlp-2-10.rft"));
}

TEST_CASE("study subcommands emit csv files with metadata headers") {
    fs::path d = fresh_dir("cli-studies");
    REQUIRE(run_cli("fig2 --field linear-state --n 10 --orders 1,2 --seed 1 --out " + d.string())
                .exit_code == 0);
    REQUIRE(run_cli("converge --field linear-state --order 2 --steps 10,20,40,80 --out " +
                    d.string())
                .exit_code == 0);
    REQUIRE(run_cli("nfe-ablation --field linear-state --total-nfe 60 --out " + d.string())
                .exit_code == 0);
    REQUIRE(run_cli("edit-study --n 6 --order 2 --seed 1 --out " + d.string()).exit_code == 0);
    for (const char* name : {"fig2-linear-state-2-10.csv", "converge-linear-state-2-25.csv",
                             "nfe-ablation-linear-state-60.csv", "edit-study-attention-2-6.csv"}) {
        CAPTURE(name);
        REQUIRE(fs::exists(d / name));
        CHECK(slurp(d / name).rfind("# ", 0) == 0);
    }
}
