// mmwint: BER curves for carrier-sense mmWave networks, analytic and simulated.
//
//   mmwint analytic --preset fig3 --out fig3.csv
//   mmwint compare --config run.json --seed 7 --workers 4
//
// Exit codes: 0 ok, 1 invalid input or I/O failure, 2 numerical failure,
// 3 a comparison row exceeded the tolerance.

#include "mmwint/errors.hpp"
#include "mmwint/experiment.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace ex = mmwint::experiment;

namespace {

enum ExitCode { kOk = 0, kInvalid = 1, kNumeric = 2, kFlagged = 3 };

struct Options {
    std::string config_path;
    std::string preset;
    std::string out;
    std::string format;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> realizations;
    std::optional<int> workers;
    std::optional<double> disc_radius;
};

void add_common(CLI::App* cmd, Options& o) {
    auto* cfg = cmd->add_option("--config", o.config_path, "JSON experiment config");
    cmd->add_option("--preset", o.preset, "built-in parameter set")
        ->check(CLI::IsMember({"fig3", "fig4", "fig5"}))
        ->excludes(cfg);
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--out", o.out, "output path (default: config outputs.path, stdout for single series)");
    cmd->add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json-lines"}));
    cmd->add_option("--realizations", o.realizations, "Monte-Carlo realizations per sweep point");
    cmd->add_option("--workers", o.workers, "worker threads");
    cmd->add_option("--disc-radius", o.disc_radius, "simulation window radius in meters (0: automatic)");
}

std::vector<ex::ExperimentConfig> build_configs(const Options& o) {
    std::vector<ex::ExperimentConfig> configs;
    if (!o.preset.empty()) {
        configs = ex::preset(o.preset);
        for (auto& c : configs) c.outputs.path = o.preset;
    } else if (!o.config_path.empty()) {
        configs.push_back(ex::load_config(o.config_path));
    } else {
        configs.emplace_back();
    }
    for (auto& c : configs) {
        if (o.seed) c.sim.seed = *o.seed;
        if (o.realizations) c.sim.n_realizations = *o.realizations;
        if (o.workers) c.sim.workers = *o.workers;
        if (o.disc_radius) c.sim.disc_radius_m = *o.disc_radius;
        if (!o.format.empty()) c.outputs.format = ex::output_format_from_string(o.format);
        if (!o.out.empty()) c.outputs.path = o.out;
        c.validate();
    }
    return configs;
}

// Presets name their output after themselves; give them the format's extension.
std::string base_path(const ex::ExperimentConfig& c, const Options& o) {
    std::string path = c.outputs.path;
    if (!o.preset.empty() && o.out.empty())
        path += c.outputs.format == ex::OutputFormat::csv ? ".csv" : ".jsonl";
    return path;
}

int execute(const std::string& command, const Options& o) {
    const auto configs = build_configs(o);
    const bool multi = configs.size() > 1;
    bool flagged = false;
    for (const auto& c : configs) {
        ex::RunResult result;
        if (command == "analytic") {
            result = ex::run_analytic_curve(c);
        } else if (command == "simulate") {
            result = ex::run_simulated_curve(c);
        } else {
            result = ex::run_compare(c);
        }
        flagged = flagged || result.any_flagged();
        if (c.outputs.path.empty()) {
            std::cout << (c.outputs.format == ex::OutputFormat::csv ? ex::format_csv(result.rows)
                                                                     : ex::format_json_lines(result.rows));
        } else {
            const std::string path = ex::series_path(base_path(c, o), c.label, multi);
            ex::emit_output(result, c, command, path, c.outputs.format);
            std::size_t n_flagged = 0;
            for (const auto& r : result.rows) n_flagged += r.flagged ? 1 : 0;
            std::cerr << "wrote " << path << " (" << result.rows.size() << " rows";
            if (command == "compare") std::cerr << ", " << n_flagged << " flagged";
            std::cerr << ")\n";
        }
    }
    return flagged ? kFlagged : kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"BER of carrier-sense mmWave networks: analytic model and Monte-Carlo simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ex::kVersion));
    Options opts;
    std::string command;
    for (const char* name : {"analytic", "simulate", "compare"}) {
        const std::string help = std::string(name) == "analytic"   ? "evaluate the closed-form BER curve"
                                 : std::string(name) == "simulate" ? "estimate the BER curve by simulation"
                                                                   : "run both engines and flag disagreements";
        auto* cmd = app.add_subcommand(name, help);
        add_common(cmd, opts);
        cmd->callback([&command, name] { command = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        return execute(command, opts);
    } catch (const mmwint::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const ex::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const mmwint::InsufficientSamplesError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const mmwint::QuadratureError& e) {
        std::cerr << "numerical failure: " << e.what() << " (best estimate " << e.best_estimate() << ", error bound "
                  << e.error_bound() << ")\n";
        return kNumeric;
    } catch (const mmwint::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumeric;
    } catch (const mmwint::DomainError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumeric;
    }
}
