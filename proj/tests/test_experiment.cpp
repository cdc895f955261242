#include "mmwint/errors.hpp"
#include "mmwint/experiment.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace mmwint;
using namespace mmwint::experiment;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

std::string field_of(const std::string& config_text) {
    try {
        parse_config(config_text).validate();
    } catch (const ValidationError& e) {
        return e.field();
    }
    return "";
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mmwint_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MMWINT_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

} // namespace

TEST_SUITE("experiment") {

TEST_CASE("unit conversions") {
    NetworkSpec n;
    const NetworkParams p = n.to_params();
    CHECK(p.q_int == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.q_srv == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.sigma_sense == doctest::Approx(1e-6).epsilon(1e-15));
    CHECK(p.phi == doctest::Approx(std::numbers::pi / 12).epsilon(1e-15));
    CHECK(10 * std::log10(p.serving_power() / p.noise_pow) == doctest::Approx(20.0).epsilon(1e-12));
    n.q_int_dbm = 20;
    CHECK(n.to_params().q_int == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("config round trip") {
    ExperimentConfig c;
    CHECK(parse_config(emit_config(c)) == c);

    c.label = "custom";
    c.net.lambda_ap = 3e-3;
    c.net.rho_blk = 2e-4;
    c.net.sigma_sense_dbw = -65.5;
    c.net.q_int_dbm = 27;
    c.net.q_srv_dbm = 33;
    c.net.alpha = 3.1;
    c.net.m_shape = 2.5;
    c.net.beamwidth_deg = 10;
    c.net.len_rx_m = 0.3;
    c.net.dist_srv_m = 7;
    c.net.snr_db = 12;
    c.net.mod_c = 0.5;
    c.net.eps_cont = 1e-4;
    c.net.beam_geom_mode = BeamGeometry::as_printed;
    c.net.contention_rule = ContentionRule::as_printed;
    c.net.allow_zero_blockage = true;
    c.sim.disc_radius_m = 900;
    c.sim.n_realizations = 4321;
    c.sim.seed = 0xfeedfacecafebeefULL;
    c.sim.blockage_mode = sim::BlockageMode::geometric;
    c.sim.serving_suppression = true;
    c.sim.workers = 3;
    c.numerics.rel_tol = 1e-6;
    c.numerics.ber_abs_tol = 1e-12;
    c.numerics.max_subdivisions = 500;
    c.numerics.tail_transform = specfun::TailTransform::exp_substitution;
    c.sweep.variable = SweepVariable::rho_blk;
    c.sweep.values = {1e-4, 2.5e-4, 1e-3};
    c.outputs.path = "out/run.jsonl";
    c.outputs.format = OutputFormat::json_lines;
    const ExperimentConfig back = parse_config(emit_config(c));
    CHECK(back == c);
    CHECK(emit_config(back) == emit_config(c));
}

TEST_CASE("partial configs fall back to defaults") {
    const auto c = parse_config(R"({"network": {"lambda_ap_per_m2": 0.05}})");
    ExperimentConfig expected;
    expected.net.lambda_ap = 0.05;
    CHECK(c == expected);
}

TEST_CASE("validation names the offending field") {
    CHECK(field_of(R"({"network": {"lambda_ap_per_m2": -1}})") == "network.lambda_ap_per_m2");
    CHECK(field_of(R"({"network": {"alpha": 2.0}})") == "network.alpha");
    CHECK(field_of(R"({"network": {"beamwidth_deg": 200}})") == "network.beamwidth_deg");
    CHECK(field_of(R"({"network": {"rho_blk_per_m2": 0}})") == "network.rho_blk_per_m2");
    CHECK(field_of(R"({"network": {"lamda_ap_per_m2": 0.1}})") == "network.lamda_ap_per_m2");
    CHECK(field_of(R"({"network": {"alpha": "big"}})") == "network.alpha");
    CHECK(field_of(R"({"network": {"contention_rule": "guess"}})") == "network.contention_rule");
    CHECK(field_of(R"({"simulation": {"n_realizations": 0}})") == "simulation.n_realizations");
    CHECK(field_of(R"({"simulation": {"disc_radius_m": 2}})") == "simulation.disc_radius_m");
    CHECK(field_of(R"({"simulation": {"blockage_mode": "walls"}})") == "simulation.blockage_mode");
    CHECK(field_of(R"({"numerics": {"rel_tol": 0}})") == "numerics.rel_tol");
    CHECK(field_of(R"({"numerics": {"max_subdivisions": 0}})") == "numerics.max_subdivisions");
    CHECK(field_of(R"({"sweep": {"values": [5, 0]}})") == "sweep.values");
    CHECK(field_of(R"({"sweep": {"values": []}})") == "sweep.values");
    CHECK(field_of(R"({"sweep": {"variable": "lambda_ap", "values": [-1, 1]}})") == "sweep.values");
    CHECK(field_of(R"({"sweep": {"variable": "speed"}})") == "sweep.variable");
    CHECK(field_of(R"({"outputs": {"format": "xml"}})") == "outputs.format");
    CHECK(field_of(R"({"colour": 1})") == "colour");
    CHECK(field_of("{not json") == "config");
    CHECK(field_of("[1, 2]") == "config");
    CHECK(field_of("{}").empty());
}

TEST_CASE("sweep variables map onto parameters") {
    ExperimentConfig c;
    c.sweep.variable = SweepVariable::sigma_sense;
    c.sweep.values = {-70, -50};
    CHECK(c.params_at(-70).sigma_sense == doctest::Approx(1e-7));
    CHECK(c.snr_at(-70) == c.net.snr_db);
    c.sweep.variable = SweepVariable::lambda_ap;
    CHECK(c.params_at(0.25).lambda_ap == 0.25);
    CHECK(c.sim_at(0.25).net.lambda_ap == 0.25);
    c.sweep.variable = SweepVariable::snr;
    CHECK(c.snr_at(7.0) == 7.0);
    CHECK(sweep_unit(SweepVariable::sigma_sense) == "dBW");
}

TEST_CASE("CSV and JSON-lines output") {
    const std::string header = "sweep_value,ber_analytic,ber_mc,ci_half_width,n_realizations,lambda_active\n";
    CHECK(format_csv({}) == header);
    CHECK(format_json_lines({}).empty());

    BerCurvePoint row;
    row.sweep_value = 10;
    row.ber_analytic = 0.00232;
    row.lambda_active = 3.6e-4;
    const std::string one = format_csv({row});
    CHECK(one == header + "10,0.00232,,,0,0.00036\n");

    row.ber_mc = 0.0025;
    row.ci_half_width = 1e-4;
    row.n_realizations = 20000;
    const auto rows = parse_csv(format_csv({row, row}));
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].size() == 6);
    CHECK(std::stod(rows[1][2]) == 0.0025);

    const auto lines = format_json_lines({row});
    const auto j = nlohmann::json::parse(lines);
    CHECK(j["ber_mc"].get<double>() == 0.0025);
    CHECK(j["n_realizations"].get<int>() == 20000);
    BerCurvePoint bare;
    CHECK(nlohmann::json::parse(format_json_lines({bare}))["ber_mc"].is_null());
}

TEST_CASE("comparison tolerance") {
    CHECK_FALSE(exceeds_tolerance(5e-4, 5e-3, 0.0));     // below the floor
    CHECK_FALSE(exceeds_tolerance(1e-2, 1.1e-2, 1e-4));  // within 15%
    CHECK(exceeds_tolerance(1e-2, 1.2e-2, 1e-4));
    CHECK_FALSE(exceeds_tolerance(1e-2, 1.2e-2, 2e-3));  // within 2 CI half-widths
}

TEST_CASE("presets") {
    for (const char* name : {"fig3", "fig4", "fig5"}) {
        const auto series = preset(name);
        CHECK(series.size() == 3);
        for (const auto& c : series) CHECK_NOTHROW(c.validate());
    }
    CHECK_THROWS_AS(preset("fig9"), ValidationError);

    // the curves order as the interference they imply
    const auto fig3 = preset("fig3");
    std::vector<double> at20;
    for (auto c : fig3) {
        c.sweep.values = {20};
        at20.push_back(*run_analytic_curve(c).rows[0].ber_analytic);
    }
    CHECK(at20[0] <= at20[1]);
    CHECK(at20[1] <= at20[2]);
}

TEST_CASE("analytic curve") {
    ExperimentConfig c;
    c.sweep.values = {-40, 0, 10, 20};
    const auto r = run_analytic_curve(c);
    REQUIRE(r.rows.size() == 4);
    CHECK(*r.rows[0].ber_analytic == doctest::Approx(0.5).epsilon(0.01));
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(*r.rows[i].ber_analytic < *r.rows[i - 1].ber_analytic);
    CHECK_FALSE(r.rows[0].ber_mc.has_value());
    CHECK(r.rows[0].n_realizations == 0);
    CHECK_FALSE(r.any_flagged());
}

TEST_CASE("empty network: both engines agree exactly") {
    ExperimentConfig c;
    c.net.lambda_ap = 0.0;
    c.sim.n_realizations = 1000;
    c.sim.disc_radius_m = 50;
    c.sweep.values = {0, 10, 20};
    const auto r = run_compare(c);
    for (const auto& row : r.rows) {
        CHECK(std::fabs(*row.ber_analytic - *row.ber_mc) <= 1e-9 * *row.ber_analytic);
        CHECK(*row.ci_half_width == 0.0);
        CHECK_FALSE(row.flagged);
    }
}

TEST_CASE("runs are reproducible") {
    ExperimentConfig c;
    c.sim.n_realizations = 1000;
    c.sim.disc_radius_m = 300;
    c.sweep.values = {0, 10};
    const auto a = format_csv(run_simulated_curve(c).rows);
    CHECK(a == format_csv(run_simulated_curve(c).rows));
    c.sim.workers = 2;
    CHECK(a == format_csv(run_simulated_curve(c).rows));
    c.sim.seed = 99;
    CHECK(a != format_csv(run_simulated_curve(c).rows));
}

TEST_CASE("frozen fig3 comparison") {
    const fs::path golden = fs::path(MMWINT_SOURCE_DIR) / "tests" / "golden";
    for (auto c : preset("fig3")) {
        c.sim.n_realizations = 1000;
        c.sim.disc_radius_m = 300;
        const auto got = parse_csv(format_csv(run_compare(c).rows));
        const auto want = parse_csv(read_text(golden / ("fig3_" + c.label + ".csv")));
        INFO("series " << c.label);
        REQUIRE(got.size() == want.size());
        CHECK(got[0] == want[0]);
        for (std::size_t i = 1; i < got.size(); ++i) {
            REQUIRE(got[i].size() == want[i].size());
            for (std::size_t k = 0; k < got[i].size(); ++k) {
                const double g = std::stod(got[i][k]), w = std::stod(want[i][k]);
                CHECK(std::fabs(g - w) <= 1e-9 * std::fabs(w));
            }
        }
    }
}

TEST_CASE("output files and metadata") {
    const fs::path dir = scratch_dir("emit");
    ExperimentConfig c;
    c.label = "base";
    c.sweep.values = {10};
    const auto r = run_analytic_curve(c);
    const std::string path = (dir / "curve.csv").string();
    emit_output(r, c, "analytic", path, OutputFormat::csv);
    CHECK(read_text(path) == format_csv(r.rows));
    const auto meta = nlohmann::json::parse(read_text(path + ".meta.json"));
    CHECK(meta["command"] == "analytic");
    CHECK(meta["seed"] == 1);
    CHECK(meta["sweep_unit"] == "dB");
    CHECK(meta["config"]["network"]["lambda_ap_per_m2"] == 0.01);
    CHECK_FALSE(meta["config"]["simulation"].contains("workers"));
    CHECK(meta["flagged_rows"].empty());

    CHECK_THROWS_AS(emit_output(r, c, "analytic", (dir / "missing" / "x.csv").string(), OutputFormat::csv), IoError);

    CHECK(series_path("out/fig.csv", "a", true) == "out/fig_a.csv");
    CHECK(series_path("out/fig.csv", "a", false) == "out/fig.csv");
    CHECK(series_path("out.d/fig", "a", true) == "out.d/fig_a");
    fs::remove_all(dir);
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch_dir("cli");
    const std::string d = dir.string();

    CHECK(run_cli("analytic --out " + d + "/a.csv") == 0);
    CHECK(fs::exists(dir / "a.csv"));
    CHECK(fs::exists(dir / "a.csv.meta.json"));
    CHECK(read_text(dir / "a.csv").rfind("sweep_value,ber_analytic,ber_mc,ci_half_width,n_realizations,lambda_active\n", 0) == 0);

    CHECK(run_cli("analytic --preset fig4 --format json-lines --out " + d + "/f4.jsonl") == 0);
    CHECK(fs::exists(dir / "f4_lambda_ap_0.001.jsonl"));

    CHECK(run_cli("simulate --realizations 1000 --disc-radius 200 --seed 4 --out " + d + "/s.csv") == 0);

    // invalid input
    write_text(dir / "typo.json", R"({"network": {"lamda": 1}})");
    CHECK(run_cli("analytic --config " + d + "/typo.json") == 1);
    write_text(dir / "neg.json", R"({"network": {"lambda_ap_per_m2": -1}})");
    CHECK(run_cli("analytic --config " + d + "/neg.json") == 1);
    CHECK(run_cli("analytic --config " + d + "/absent.json") == 1);
    CHECK(run_cli("analytic --preset fig7") == 1);
    CHECK(run_cli("analytic --format xml") == 1);
    CHECK(run_cli("simulate --realizations 10") == 1);
    CHECK(run_cli("analytic --out " + d + "/no/such/dir/x.csv") == 1);
    CHECK(run_cli("frobnicate") == 1);

    // quadrature budget too small for the requested tolerance
    write_text(dir / "tight.json",
               R"({"numerics": {"abs_tol": 1e-300, "rel_tol": 1e-300, "max_subdivisions": 1}, "sweep": {"values": [10]}})");
    CHECK(run_cli("analytic --config " + d + "/tight.json") == 2);

    // the literal contention rule leaves nearly every AP active in the analytic
    // model, which the simulator does not reproduce
    write_text(dir / "flag.json", R"({"network": {"contention_rule": "as_printed"},
                                      "simulation": {"n_realizations": 1000, "disc_radius_m": 300},
                                      "sweep": {"values": [0, 10]}})");
    CHECK(run_cli("compare --config " + d + "/flag.json --out " + d + "/flag.csv") == 3);
    const auto meta = nlohmann::json::parse(read_text(dir / "flag.csv.meta.json"));
    CHECK_FALSE(meta["flagged_rows"].empty());

    CHECK(run_cli("--version") == 0);
    fs::remove_all(dir);
}

} // TEST_SUITE
