#pragma once

#include "mmwint/analytic.hpp"
#include "mmwint/params.hpp"
#include "mmwint/simulator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Experiment configuration in user-facing units, sweeps over one parameter, and
// the analytic / Monte-Carlo / comparison runners behind the command-line tool.
namespace mmwint::experiment {

extern const std::string_view kVersion;

// Network parameters as written in a config file. Powers in dBm, the sensing
// threshold in dB relative to 1 W, beamwidth in degrees, noise through the SNR.
struct NetworkSpec {
    double lambda_ap = 1e-2;      // [1/m²]
    double rho_blk = 1e-3;        // [1/m²]
    double sigma_sense_dbw = -60; // [dBW]
    double q_int_dbm = 30;
    double q_srv_dbm = 30;
    double alpha = 2.5;
    double m_shape = 3;
    double beamwidth_deg = 15;
    double len_rx_m = 0.15;
    double dist_srv_m = 5;
    double snr_db = 20; // used unless the sweep variable is the SNR
    double mod_c = 1;
    double eps_cont = 1e-3;
    BeamGeometry beam_geom_mode = BeamGeometry::half_angle;
    ContentionRule contention_rule = ContentionRule::threshold_inversion;
    bool allow_zero_blockage = false;

    NetworkParams to_params() const;
    bool operator==(const NetworkSpec&) const = default;
};

struct SimSpec {
    double disc_radius_m = 0; // 0 selects the default window
    std::int64_t n_realizations = 20000;
    std::uint64_t seed = 1;
    sim::BlockageMode blockage_mode = sim::BlockageMode::bernoulli;
    bool serving_suppression = false;
    int workers = 1;

    bool operator==(const SimSpec&) const = default;
};

// Quadrature tolerances: `inner` for the distance integrals, `ber` for the
// outer BER integral.
struct NumericsSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double ber_abs_tol = 1e-13;
    double ber_rel_tol = 1e-11;
    int max_subdivisions = 2000;
    specfun::TailTransform tail_transform = specfun::TailTransform::rational_substitution;

    analytic::Numerics to_numerics() const;
    bool operator==(const NumericsSpec&) const = default;
};

enum class SweepVariable { snr, sigma_sense, lambda_ap, rho_blk };
enum class OutputFormat { csv, json_lines };

std::string_view to_string(SweepVariable v);
std::string_view to_string(OutputFormat f);
SweepVariable sweep_variable_from_string(std::string_view s);
OutputFormat output_format_from_string(std::string_view s);
// Unit of the sweep values, e.g. "dB" for the SNR.
std::string_view sweep_unit(SweepVariable v);

struct Sweep {
    SweepVariable variable = SweepVariable::snr;
    std::vector<double> values{0, 5, 10, 15, 20, 25, 30};

    bool operator==(const Sweep&) const = default;
};

struct Outputs {
    std::string path; // empty: standard output
    OutputFormat format = OutputFormat::csv;

    bool operator==(const Outputs&) const = default;
};

struct ExperimentConfig {
    std::string label; // series name; used in output file names for multi-series runs
    NetworkSpec net;
    SimSpec sim;
    NumericsSpec numerics;
    Sweep sweep;
    Outputs outputs;

    // Throws ValidationError naming the offending field (dotted path).
    void validate() const;
    // Linear-unit parameters at one sweep value.
    NetworkParams params_at(double sweep_value) const;
    sim::SimParams sim_at(double sweep_value) const;
    // SNR in dB at one sweep value.
    double snr_at(double sweep_value) const;

    bool operator==(const ExperimentConfig&) const = default;
};

// Parses the JSON config format; unknown keys are rejected.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::string& path);
// Serializes to the same format; parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& c);

// Named parameter sets: `fig3` (σ sweep), `fig4` (λ sweep), `fig5` (ρ sweep),
// each a family of BER-vs-SNR series.
std::vector<ExperimentConfig> preset(std::string_view name);

struct BerCurvePoint {
    double sweep_value = 0.0;
    std::optional<double> ber_analytic;
    std::optional<double> ber_mc;
    std::optional<double> ci_half_width;
    std::int64_t n_realizations = 0;
    double lambda_active = 0.0;
    bool flagged = false;
};

struct RunResult {
    std::vector<BerCurvePoint> rows;
    bool any_flagged() const;
};

RunResult run_analytic_curve(const ExperimentConfig& c);
RunResult run_simulated_curve(const ExperimentConfig& c);
RunResult run_compare(const ExperimentConfig& c);

// Comparison tolerance: a row is flagged when the analytic BER is at least 1e-3
// and |ber_mc - ber_analytic| exceeds max(15% of ber_analytic, 2 × CI half-width).
bool exceeds_tolerance(double ber_analytic, double ber_mc, double ci_half_width);

std::string format_csv(const std::vector<BerCurvePoint>& rows);
std::string format_json_lines(const std::vector<BerCurvePoint>& rows);

// Metadata describing how a series was produced (JSON object text).
std::string metadata_json(const ExperimentConfig& c, std::string_view command, const RunResult& result);

// Writes rows to `path` in `format` and the metadata to `path`.meta.json.
// Errors carry the path in their message.
void emit_output(const RunResult& result, const ExperimentConfig& c, std::string_view command, const std::string& path,
                 OutputFormat format);

// Output file of one series: `path` itself for single-series runs, otherwise
// the label inserted before the extension.
std::string series_path(const std::string& path, const std::string& label, bool multi);

// I/O failure with the path in the message.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mmwint::experiment
