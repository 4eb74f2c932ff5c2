#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "declab/error.hpp"
#include "declab/experiments.hpp"

using namespace declab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
};

Outcome cli(const std::string& args) {
    const std::string cmd = std::string(DECLAB_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, got);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("declab_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("documented single-value examples") {
    const auto e = cli("energy --n 2 --k 2 --curve moment --N 3");
    CHECK(e.code == 0);
    CHECK(e.out == "15\n");
    const auto c = cli("numerology --critical --n 3 --d 1");
    CHECK(c.code == 0);
    CHECK(c.out == "6\n");
}

TEST_CASE("usage errors exit 2 and write nothing") {
    const auto dir = scratch("malformed");
    CHECK(cli("energy --N 8..100 --out " + dir.string()).code == 2);
    CHECK_FALSE(fs::exists(dir));
    CHECK(cli("energy --N 16..8 --out " + dir.string()).code == 2);
    CHECK(cli("decouple --delta-min 3e-10 --out " + dir.string()).code == 2);
    CHECK_FALSE(fs::exists(dir));
    CHECK(cli("energy --no-such-flag 1").code == 2);
    CHECK(cli("").code == 2);
    CHECK(cli("energy --format xml").code == 2);
    CHECK(cli("numerology --critical --n 3 --d 2").code == 2);
    CHECK(cli("witness --N 1..8").code == 2);
}

TEST_CASE("numeric failures exit 3") {
    CHECK(cli("energy --method brute --N 64").code == 3);
}

TEST_CASE("config files with flag overrides") {
    const auto dir = scratch("config");
    fs::create_directories(dir);
    const auto path = dir / "energy.json";
    std::ofstream(path) << R"({"kind": "energy-growth", "n": 2, "k": 2, "N": 5})";
    CHECK(cli("energy --config " + path.string()).out == "45\n");
    CHECK(cli("energy --config " + path.string() + " --N 3").out == "15\n");
    CHECK(cli("decouple --config " + path.string()).code == 2);
    std::ofstream(dir / "bad.json") << R"({"kind": "energy-growth", "colour": 1})";
    CHECK(cli("energy --config " + (dir / "bad.json").string()).code == 2);
    std::ofstream(dir / "broken.json") << "{";
    CHECK(cli("energy --config " + (dir / "broken.json").string()).code == 2);
}

TEST_CASE("sweep outputs and a verdict recomputed from the CSV") {
    const auto dir = scratch("energy");
    const auto r = cli("energy --N 8..128 --out " + dir.string());
    CHECK(r.code == 0);
    const std::string csv = slurp(dir / "energy-growth.csv");
    CHECK(csv.rfind("# schema=declab.energy-growth/1\nN,k,n,B_k\n", 0) == 0);
    const auto rows = csv_rows(csv);
    REQUIRE(rows.size() == 6);

    // Independent least squares on the log-log rows.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = 5;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double x = std::log(std::stod(rows[i][0])), y = std::log(std::stod(rows[i][3]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const auto report = nlohmann::json::parse(slurp(dir / "energy-growth.json"));
    CHECK(report["fit"]["slope"].get<double>() == doctest::Approx(slope).epsilon(1e-9));
    const auto lo = report["bracket"][0].get<double>(), hi = report["bracket"][1].get<double>();
    CHECK(report["verdict"]["pass"].get<bool>() == (slope >= lo && slope <= hi));
    CHECK(report["config"]["N"].size() == 5);

    CHECK(cli("energy --N 8..128 --slope-max 3.1").code == 1);
}

TEST_CASE("rows do not depend on workers or jobs") {
    for (const std::string& args : {std::string("energy --N 8..64 --k 2"), std::string("strichartz --N 4..64"),
                                    std::string("geometry --n 3..4 --trials 20 --seed 7")}) {
        const auto a = cli(args + " --format csv --workers 1");
        const auto b = cli(args + " --format csv --workers 3 --jobs 2");
        CHECK(a.code == 0);
        CHECK(a.out == b.out);
        CHECK(a.out.rfind("# schema=declab.", 0) == 0);
    }
    CHECK(cli("geometry --trials 10 --seed 7 --format csv").out != cli("geometry --trials 10 --seed 8 --format csv").out);
}

TEST_CASE("numerology table and queries") {
    const auto t = cli("numerology --n 2..5 --format csv");
    CHECK(t.code == 0);
    const auto rows = csv_rows(t.out);
    bool saw_zero_gamma = false;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const long long n = std::stoll(rows[i][0]);
        if (rows[i][1] == std::to_string(4 * n - 2)) {
            CHECK(rows[i][11] == "0");
            saw_zero_gamma = true;
        }
        if (rows[i][2] == "0") CHECK(rows[i][3] == rows[i][4]);
    }
    CHECK(saw_zero_gamma);
    CHECK(cli("numerology --gamma --n 2 --p 10").out == "1/6\n");
    CHECK(cli("numerology --kappa --n 2 --p 6").out == "1/2\n");
    CHECK(cli("numerology --threshold --n 4 --alpha 1/2").out == "14\n");
    const auto b = cli("numerology --bootstrap --n 3 --p 5 --alpha 1/10 --s0 40 --eps 0");
    CHECK(b.out == "contradiction\n");
    CHECK(b.code == 0);
}

TEST_CASE("config validation in the library") {
    CHECK(parse_dyadic_delta("2e-10") == std::ldexp(1.0, -10));
    CHECK(parse_dyadic_delta("2^-3") == 0.125);
    CHECK(parse_dyadic_delta("0.0625") == 0.0625);
    CHECK_THROWS_AS(parse_dyadic_delta("3e-10"), ConfigError);
    CHECK_THROWS_AS(parse_dyadic_delta("1"), ConfigError);

    auto c = config_from_json({{"kind", "decoupling-sweep"}, {"delta-max", "2e-5"}, {"delta-min", "2e-8"}});
    CHECK(c.deltas.size() == 4);
    CHECK(c.signature == std::vector<double>{1.0});
    CHECK(c.p == std::vector<std::string>{"6"});
    c = config_from_json({{"kind", "strichartz-sweep"}});
    CHECK(c.signature == std::vector<double>{1.0, -1.0});
    CHECK(c.data == "subspace");
    CHECK(c.Ns == std::vector<std::size_t>{8, 16, 32, 64, 128});
    CHECK(config_from_json({{"kind", "strichartz-sweep"}, {"signature", {1, 1}}}).data == "diagonal");
    CHECK_THROWS_AS(config_from_json({{"kind", "strichartz-sweep"}, {"signature", {1, 1}}, {"data", "subspace"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"n", 2}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"kind", "thermal"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"kind", "decoupling-sweep"}, {"signature", {1, 1}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"kind", "decoupling-sweep"}, {"m", 3}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"kind", "energy-growth"}, {"curve", "cubic"}}), ConfigError);

    const auto round = config_from_json(config_to_json(config_from_json({{"kind", "energy-growth"}, {"N", "4..64"}, {"k", 2}})));
    CHECK(round.Ns.size() == 5);
    CHECK(round.k == 2);
}

TEST_CASE("reports render in every format") {
    auto c = config_from_json({{"kind", "energy-growth"}, {"N", "1..16"}, {"k", 2}});
    const auto r = run(c);
    CHECK(r.pass);
    REQUIRE(r.fit.has_value());
    CHECK(r.fit->slope == doctest::Approx(2.0).epsilon(0.15));
    CHECK(to_markdown(r).find("| N | k | n | B_k |") != std::string::npos);
    CHECK(to_json(r)["rows"].size() == 5);
    CHECK(to_csv(r).find("16,2,2,") != std::string::npos);
}
