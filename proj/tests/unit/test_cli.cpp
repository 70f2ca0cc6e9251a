#include "doctest.h"
#include "support.hpp"

#include "sentinel/bounds.hpp"
#include "sentinel/io.hpp"
#include "sentinel/sim.hpp"

#include "json.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace sentinel;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("sentinel_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

Result cli(const std::string& args, const std::string& stdin_file = "") {
    const auto out = scratch() / "stdout.txt";
    const auto err = scratch() / "stderr.txt";
    std::string cmd = std::string("'") + SENTINEL_CLI + "' " + args + " >'" + out.string() + "' 2>'" +
                      err.string() + "'";
    if (!stdin_file.empty()) cmd += " <'" + stdin_file + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = io::read_file(out);
    r.err = io::read_file(err);
    return r;
}

std::string data(const char* name) { return "'" + (testsupport::data_dir() / name).string() + "'"; }

// Stream of the fixture model with a constant attack starting at t_a.
fs::path fixture_stream(const char* name, std::size_t length, std::size_t onset, double sigma2) {
    const auto model = build_model(testsupport::fixture_H(), sigma2);
    const Projector p(model);
    const auto attacks = nlohmann::json::parse(io::read_file(testsupport::data_dir() / "attacks.json"));
    const auto raw = attacks.at("constant").get<std::vector<double>>();
    const Vector a = p.P() * Eigen::Map<const Vector>(raw.data(), 23);
    sim::Rng rng(5);
    Vector theta = Vector::Constant(13, 0.01);
    std::vector<Vector> rows;
    for (std::size_t t = 1; t <= length; ++t) {
        rows.push_back(sim::generate_observation(model, theta, t >= onset ? &a : nullptr, rng));
    }
    const auto path = scratch() / name;
    write(path, io::write_stream_csv(rows));
    return path;
}

}  // namespace

TEST_CASE("cli: model report for the bundled fixture") {
    const auto summary = scratch() / "model.json";
    const auto r = cli("model --case " + data("ieee14.case") + " --summary '" + summary.string() + "'");
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(io::read_file(summary));
    CHECK(j["M"] == 23);
    CHECK(j["N"] == 13);
    CHECK(j["rank"] == 13);
    CHECK(j["diagnostics"]["annihilation"].get<double>() <= 1e-9);
    const Matrix H = io::parse_matrix_csv(r.out);
    CHECK(H == testsupport::fixture_H());
    CHECK(r.err.find("M = 23") != std::string::npos);
}

TEST_CASE("cli: malformed and rank-deficient cases") {
    const auto bad = scratch() / "bad.case";
    write(bad, "gridcase v1\nbus 1 0\nbus 2 oops\n");
    auto r = cli("model --case '" + bad.string() + "'");
    CHECK(r.code == 2);
    CHECK(r.err.find("line 3") != std::string::npos);

    const auto deficient = scratch() / "deficient.case";
    write(deficient,
          "gridcase v1\nbus 1 0\nbus 2 0\nbus 3 0\nbranch 1 2 1\nbranch 2 3 1\nref 1\n"
          "flowmeter 1 +\nflowmeter 1 +\nflowmeter 1 -\n");
    r = cli("model --case '" + deficient.string() + "'");
    CHECK(r.code == 3);
    CHECK(r.err.find("rank") != std::string::npos);

    r = cli("model --case '/nonexistent/x.case'");
    CHECK(r.code == 3);
    r = cli("model --no-such-flag");
    CHECK(r.code == 2);
    r = cli("");
    CHECK(r.code == 2);
}

TEST_CASE("cli: detect exit codes") {
    const std::string common = "--case " + data("ieee14.case") + " --sigma2 0.005 --rho-l 0.025 --rho-u 100";
    SUBCASE("clean stream is censored") {
        const auto s = fixture_stream("clean.csv", 100, sim::kNever, 0.005);
        const auto r = cli("detect " + common + " --threshold 1e6 --stream '" + s.string() + "'");
        CHECK(r.code == 10);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["censored"] == true);
        CHECK(j["t_alarm"].is_null());
    }
    SUBCASE("attack is caught right after onset") {
        const auto s = fixture_stream("attacked.csv", 200, 150, 0.005);
        const auto r = cli("detect " + common + " --threshold 3000 --stream '" + s.string() + "'");
        CHECK(r.code == 0);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["t_alarm"].get<int>() >= 150);
        CHECK(j["t_alarm"].get<int>() <= 152);
        CHECK(j["overshoot"].get<double>() >= 0.0);
    }
    SUBCASE("stdin is the default stream") {
        const auto s = fixture_stream("stdin.csv", 20, 1, 0.005);
        const auto r = cli("detect " + common + " --threshold 1000", s.string());
        CHECK(r.code == 0);
    }
    SUBCASE("stream width must match the model") {
        const auto s = scratch() / "narrow.csv";
        write(s, "1,0,0,0\n");
        const auto r = cli("detect " + common + " --threshold 1 --stream '" + s.string() + "'");
        CHECK(r.code == 4);
    }
    SUBCASE("exhaustive detector refuses large models") {
        const auto s = fixture_stream("big.csv", 3, 1, 0.005);
        const auto r = cli("detect " + common + " --threshold 1 --detector gcusum --stream '" + s.string() + "'");
        CHECK(r.code == 3);
        CHECK(r.err.find("TooLarge") != std::string::npos);
    }
}

TEST_CASE("cli: relaxed detector alarms no later than the exhaustive one") {
    const auto model = build_model(testsupport::ring3_H(), 1.0);
    const Projector p(model);
    Vector a = Vector::Zero(6);
    a[0] = 0.9;
    a[1] = -0.9;
    a = p.P() * a;
    sim::Rng rng(8);
    std::vector<Vector> rows;
    for (int t = 0; t < 500; ++t) rows.push_back(sim::generate_observation(model, Vector::Zero(2), &a, rng));
    const auto s = scratch() / "ring.csv";
    write(s, io::write_stream_csv(rows));
    const std::string common = "--case " + data("ring3.case") + " --sigma2 1 --rho-l 0.5 --rho-u 1 --threshold 12 --stream '" + s.string() + "'";
    const auto rg = cli("detect " + common);
    const auto g = cli("detect " + common + " --detector gcusum");
    REQUIRE(rg.code == 0);
    REQUIRE(g.code == 0);
    const auto jr = nlohmann::json::parse(rg.out);
    const auto jg = nlohmann::json::parse(g.out);
    CHECK(jr["t_alarm"].get<int>() <= jg["t_alarm"].get<int>());
    CHECK(jg["per_step"].size() == jg["t_alarm"].get<std::size_t>());
}

TEST_CASE("cli: bounds delegate to the library") {
    const auto r = cli("bounds --case " + data("ieee14.case") + " --sigma2 0.005 --rho-l 0.025 --rho-u 100 --gamma 100");
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    const auto model = build_model(testsupport::fixture_H(), 0.005);
    const Projector p(model);
    CHECK(j["h_floor"].get<double>() == threshold_floor(model, p, AttackBounds(0.025, 100), 100.0));
    CHECK(j["vacuous"] == true);
    CHECK(j["delay_ceiling"].is_null());

    const auto bad = cli("bounds --case " + data("ieee14.case") + " --sigma2 0.005 --rho-l 2 --rho-u 1 --gamma 10");
    CHECK(bad.code == 3);
}

TEST_CASE("cli: simulate is byte-identical across invocations") {
    const std::string args = "simulate --scenario " + data("ring3_noattack.json") + " --runs 50";
    const auto a = cli(args);
    const auto b = cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.rfind("run,stop_time,statistic,overshoot,censored\n", 0) == 0);
    const auto c = cli(args + " --seed 99");
    CHECK(c.out != a.out);

    const auto summary = scratch() / "sim.json";
    const auto d = cli(args + " --summary '" + summary.string() + "'");
    REQUIRE(d.code == 0);
    const auto j = nlohmann::json::parse(io::read_file(summary));
    CHECK(j["quantity"] == "arl");
    CHECK(j["stats"]["runs"] == 50);
}

TEST_CASE("cli: curves have monotone columns") {
    const auto r = cli("curves --scenario " + data("ieee14_constant.json") + " --runs 30 --h-grid 200,400,800,1600");
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "h,arl,arl_stderr,arl_censored,edd,edd_stderr,edd_censored,overshoot_ratio");
    double prev_arl = 0.0, prev_edd = 0.0;
    int rows = 0;
    while (std::getline(in, line)) {
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
        REQUIRE(cells.size() == 8);
        CHECK(cells[1] >= prev_arl);
        CHECK(cells[4] >= prev_edd);
        prev_arl = cells[1];
        prev_edd = cells[4];
        ++rows;
    }
    CHECK(rows == 4);
    const auto bad = cli("curves --scenario " + data("ieee14_constant.json") + " --h-grid 5,1");
    CHECK(bad.code == 3);
}
