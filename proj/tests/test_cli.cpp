#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

using nlohmann::json;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const std::string tag = std::to_string(counter++);
    const std::string out_path = "cli_stdout_" + tag + ".txt";
    const std::string err_path = "cli_stderr_" + tag + ".txt";
    const std::string cmd =
        std::string(EVGP_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
    const int rc = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return r;
}

// minimal RFC-4180 row parser (quoted fields may contain commas)
std::vector<std::string> parse_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) rows.push_back(parse_csv_row(line));
    return rows;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("analyze reports beta and chi_1") {
    const CliResult r = run_cli(
        "analyze --widths 784,100,100,10 --weights gaussian --format json");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["report"]["beta"].get<double>() == doctest::Approx(0.02));
    CHECK(j["report"]["chi1_all_unit"].get<bool>());
    CHECK(j["config"]["weights"] == "gaussian");
    CHECK(j["version"].is_string());

    const CliResult flat = run_cli("analyze --widths 5,2 --format json");
    REQUIRE(flat.exit_code == 0);
    const json jf = json::parse(flat.out);
    CHECK(jf["report"]["beta"].get<double>() == 0.0);
    for (const auto& c : jf["report"]["chi1"]) CHECK(c.get<double>() == 1.0);
}

TEST_CASE("malformed widths exit with the config code") {
    CHECK(run_cli("analyze --widths 5,0,2").exit_code == 2);
    CHECK(run_cli("analyze --widths 5,x,2").exit_code == 2);
    CHECK(run_cli("analyze").exit_code == 2);
}

TEST_CASE("moments: exact, oracle and mc agree on the 21 anchor") {
    const CliResult ex = run_cli(
        "moments --widths 1,2,1 --weights gaussian --k 2 --method exact --seed 1 --format json");
    REQUIRE(ex.exit_code == 0);
    const json je = json::parse(ex.out);
    CHECK(je["records"][0]["result"]["log_value"].get<double>() ==
          doctest::Approx(std::log(21.0)).epsilon(1e-12));

    const CliResult orc = run_cli(
        "moments --widths 1,2,1 --weights gaussian --k 2 --method oracle --seed 1 --format json");
    REQUIRE(orc.exit_code == 0);
    const json jo = json::parse(orc.out);
    CHECK(jo["records"][0]["result"]["value"].get<std::string>() == "21/1");
    CHECK(jo["records"][0]["result"]["exact"].get<bool>());

    const CliResult mc = run_cli(
        "moments --widths 1,2,1 --weights gaussian --k 2 --method mc --samples 100000 "
        "--seed 7 --workers 2 --format json");
    REQUIRE(mc.exit_code == 0);
    const json jm = json::parse(mc.out);
    const double est = jm["records"][0]["result"]["estimate"].get<double>();
    const double se = jm["records"][0]["result"]["std_error"].get<double>();
    CHECK(std::abs(est - 21.0) <= 5.0 * se);

    const CliResult all = run_cli(
        "moments --widths 1,2,1 --weights gaussian --k 2 --method all --samples 20000 "
        "--seed 7 --format json");
    REQUIRE(all.exit_code == 0);
    CHECK(json::parse(all.out)["records"].size() == 3);
}

TEST_CASE("moments guards and unsupported orders") {
    CHECK(run_cli("moments --widths 1,2,1 --k 3 --method exact --seed 1").exit_code == 2);
    CHECK(run_cli("moments --widths 2,40,40,2 --k 2 --method oracle --seed 1").exit_code == 3);
}

TEST_CASE("mixed moments through the cli match the anchors") {
    const CliResult r = run_cli(
        "moments --widths 2,1 --weights gaussian --method oracle --mixed \"1,1,1;2,1,1\" "
        "--seed 1 --format json");
    REQUIRE(r.exit_code == 0);
    CHECK(json::parse(r.out)["records"][0]["result"]["value"].get<std::string>() == "1/2");

    // transfer-matrix route for the same class of quantity
    const CliResult ex = run_cli(
        "moments --widths 2,2,1 --weights gaussian --method exact --mixed \"1,1,1;2,1,1\" "
        "--seed 1 --format json");
    REQUIRE(ex.exit_code == 0);
    CHECK(json::parse(ex.out)["records"][0]["result"]["log_value"].get<double>() ==
          doctest::Approx(std::log(7.0 / 4.0)).epsilon(1e-12));
}

TEST_CASE("architecture can come from a json file") {
    {
        std::ofstream f("arch_in.json");
        f << R"({"widths": [1, 2, 1]})";
    }
    const CliResult r = run_cli(
        "moments --arch-json arch_in.json --k 2 --method oracle --seed 1 --format json");
    REQUIRE(r.exit_code == 0);
    CHECK(json::parse(r.out)["records"][0]["result"]["value"].get<std::string>() == "21/1");
    CHECK(run_cli("moments --arch-json missing.json --k 2 --seed 1").exit_code == 2);
    std::remove("arch_in.json");
}

TEST_CASE("verify passes clean and catches an injected dp bug") {
    const CliResult clean =
        run_cli("verify --trials 3 --max-width 3 --max-depth 3 --samples 5000 --seed 99");
    REQUIRE(clean.exit_code == 0);
    const json jc = json::parse(clean.out);
    CHECK(jc["passed"].get<bool>());
    CHECK(jc["failures"].empty());

    const CliResult bug = run_cli(
        "verify --trials 3 --max-width 3 --max-depth 3 --samples 5000 --seed 99 "
        "--inject-dp-bug");
    CHECK(bug.exit_code == 1);
    const json jb = json::parse(bug.out);
    REQUIRE_FALSE(jb["failures"].empty());
    CHECK(jb["failures"][0].contains("arch"));

    CHECK(run_cli("verify --trials 0 --seed 1").exit_code == 2);
    CHECK(run_cli("verify --max-width 9 --seed 1").exit_code == 2);

    // failure artifacts are machine-readable
    const CliResult art = run_cli(
        "verify --trials 3 --max-width 3 --max-depth 3 --samples 5000 --seed 99 "
        "--inject-dp-bug --artifacts verify_artifacts.json");
    CHECK(art.exit_code == 1);
    std::ifstream af("verify_artifacts.json");
    REQUIRE(af.good());
    json ja;
    af >> ja;
    CHECK_FALSE(ja["failures"].empty());
    CHECK(ja["failures"][0].contains("expected"));
    std::remove("verify_artifacts.json");
}

TEST_CASE("sweep emits the pinned CSV schema with the bracket satisfied") {
    const CliResult r = run_cli(
        "sweep --family constant --width-min 4 --width-max 4 --depth-min 2 --depth-max 20");
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 20);  // header + 19 depths
    CHECK(rows[0] == std::vector<std::string>{"d", "widths", "beta", "exact_fourth",
                                              "lower_bound", "upper_bound"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const int d = std::stoi(rows[i][0]);
        CHECK(std::stod(rows[i][2]) == doctest::Approx((d - 1) / 4.0).epsilon(1e-9));
        const double exact = std::stod(rows[i][3]);
        CHECK(std::stod(rows[i][4]) <= exact * (1 + 1e-9));
        CHECK(exact <= std::stod(rows[i][5]) * (1 + 1e-9));
    }
}

TEST_CASE("sweep on the width-1 gaussian chain gives 6^d") {
    const CliResult r = run_cli(
        "sweep --family constant --width-min 1 --width-max 1 --depth-min 1 --depth-max 12 "
        "--weights gaussian");
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 13);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const int d = std::stoi(rows[i][0]);
        const double exact = std::stod(rows[i][3]);
        CHECK(std::log(exact) == doctest::Approx(d * std::log(6.0)).epsilon(1e-9));
    }
}

TEST_CASE("advise proposes the equal split and rejects infeasible budgets") {
    const CliResult r = run_cli(
        "advise --budget-kind neurons --budget 40 --depth 5 --format json");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["advice"]["hidden"] == json::array({10, 10, 10, 10}));
    CHECK(run_cli("advise --budget-kind neurons --budget 2 --depth 5").exit_code == 2);
}

TEST_CASE("outputs are byte-identical across worker counts") {
    const std::string mc1 =
        "moments --widths 2,3,2 --k 2 --method mc --samples 30000 --seed 123 --format json";
    const CliResult a = run_cli(mc1 + " --workers 1");
    const CliResult b = run_cli(mc1 + " --workers 8");
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(a.out == b.out);

    const std::string sweep =
        "sweep --family constant --width-min 2 --width-max 3 --depth-min 2 --depth-max 4 "
        "--samples 5000 --seed 5";
    const CliResult c = run_cli(sweep + " --workers 1");
    const CliResult d = run_cli(sweep + " --workers 8");
    CHECK(c.out == d.out);

    const std::string verify =
        "verify --trials 2 --max-width 3 --max-depth 3 --samples 4000 --seed 12";
    const CliResult e = run_cli(verify + " --workers 1");
    const CliResult f = run_cli(verify + " --workers 8");
    CHECK(e.out == f.out);
}

TEST_CASE("per-layer spec json, custom input point, net dump") {
    {
        std::ofstream f("spec_mix.json");
        f << R"({"layers": [
            {"weights": {"kind": "uniform"}, "bias": {"kind": "gaussian", "scale": 0.2}},
            {"weights": {"kind": "signed_bernoulli"}, "bias": {"kind": "zero"}}]})";
    }
    const CliResult r = run_cli(
        "analyze --widths 3,4,2 --spec-json spec_mix.json --format json");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["report"]["chi1_all_unit"].get<bool>());
    CHECK_FALSE(j["report"]["warnings"].empty());  // zero bias warning

    // depth mismatch is a config error
    CHECK(run_cli("analyze --widths 3,4,4,2 --spec-json spec_mix.json").exit_code == 2);
    std::remove("spec_mix.json");

    const CliResult mi = run_cli(
        "moments --widths 2,3,2 --k 1 --method mc --samples 5000 --seed 8 "
        "--input 0.5,-1.25 --format json");
    REQUIRE(mi.exit_code == 0);
    CHECK(run_cli("moments --widths 2,3,2 --k 1 --method mc --samples 5000 --seed 8 "
                  "--input 1,2,3").exit_code == 2);

    const CliResult nd = run_cli(
        "moments --widths 2,3,2 --k 1 --method exact --seed 5 --dump-net net_dump.json "
        "--format json");
    REQUIRE(nd.exit_code == 0);
    std::ifstream dumped("net_dump.json");
    json jn;
    dumped >> jn;
    CHECK(jn["widths"] == json::array({2, 3, 2}));
    CHECK(jn["weights"].size() == 2);
    CHECK(jn["weights"][0].size() == 2);     // rows = n_0
    CHECK(jn["weights"][0][0].size() == 3);  // cols = n_1
    std::remove("net_dump.json");
}

TEST_CASE("mc dump streams one row per sample") {
    const std::string dump_path = "dump_test.csv";
    const CliResult r = run_cli("moments --widths 2,2 --k 1 --method mc --samples 50 "
                                "--seed 3 --dump " + dump_path + " --format json");
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_csv(slurp(dump_path));
    CHECK(rows.size() == 51);  // header + 50 samples
    CHECK(rows[0][0] == "sample_index");
    std::remove(dump_path.c_str());
}

}  // TEST_SUITE
