#include "mmwint/experiment.hpp"

#include "mmwint/analytic.hpp"
#include "mmwint/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#ifndef MMWINT_VERSION
#define MMWINT_VERSION "0.0.0"
#endif

namespace mmwint::experiment {

using nlohmann::json;

const std::string_view kVersion = MMWINT_VERSION;

namespace {

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Reads keys out of a JSON object, tracking which ones were consumed so that
// leftovers (typos, unsupported options) can be reported with their path.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ValidationError(path_.empty() ? "config" : path_, "expected a JSON object");
    }

    template <class T>
    void read(const char* key, T& out) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        seen_.emplace_back(key);
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) throw ValidationError(field(key), "expected a number");
                out = it->template get<double>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw ValidationError(field(key), "expected true or false");
                out = it->template get<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer()) throw ValidationError(field(key), "expected an integer");
                out = it->template get<T>();
            } else {
                if (!it->is_string()) throw ValidationError(field(key), "expected a string");
                out = it->template get<T>();
            }
        } catch (const json::exception& e) {
            throw ValidationError(field(key), e.what());
        }
    }

    const json* child(const char* key) {
        auto it = obj_.find(key);
        if (it == obj_.end()) return nullptr;
        seen_.emplace_back(key);
        return &*it;
    }

    std::string field(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                throw ValidationError(field(key), "unknown key");
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::vector<std::string> seen_;
};

template <class E, class F>
void read_enum(ObjectReader& r, const char* key, E& out, F&& from_string) {
    std::string text;
    r.read(key, text);
    if (text.empty()) return;
    try {
        out = from_string(text);
    } catch (const ValidationError& e) {
        throw ValidationError(r.field(key), e.what());
    }
}

NetworkSpec parse_network(const json& j) {
    NetworkSpec n;
    ObjectReader r(j, "network");
    r.read("lambda_ap_per_m2", n.lambda_ap);
    r.read("rho_blk_per_m2", n.rho_blk);
    r.read("sigma_sense_dbw", n.sigma_sense_dbw);
    r.read("q_int_dbm", n.q_int_dbm);
    r.read("q_srv_dbm", n.q_srv_dbm);
    r.read("alpha", n.alpha);
    r.read("m_shape", n.m_shape);
    r.read("beamwidth_deg", n.beamwidth_deg);
    r.read("len_rx_m", n.len_rx_m);
    r.read("dist_srv_m", n.dist_srv_m);
    r.read("snr_db", n.snr_db);
    r.read("mod_c", n.mod_c);
    r.read("eps_cont", n.eps_cont);
    read_enum(r, "beam_geom_mode", n.beam_geom_mode, beam_geometry_from_string);
    read_enum(r, "contention_rule", n.contention_rule, contention_rule_from_string);
    r.read("allow_zero_blockage", n.allow_zero_blockage);
    r.finish();
    return n;
}

SimSpec parse_sim(const json& j) {
    SimSpec s;
    ObjectReader r(j, "simulation");
    r.read("disc_radius_m", s.disc_radius_m);
    r.read("n_realizations", s.n_realizations);
    r.read("seed", s.seed);
    read_enum(r, "blockage_mode", s.blockage_mode, sim::blockage_mode_from_string);
    r.read("serving_suppression", s.serving_suppression);
    r.read("workers", s.workers);
    r.finish();
    return s;
}

specfun::TailTransform tail_transform_from_string(std::string_view s) {
    if (s == "rational") return specfun::TailTransform::rational_substitution;
    if (s == "exp") return specfun::TailTransform::exp_substitution;
    throw ValidationError("tail_transform", "expected rational or exp, got '" + std::string(s) + "'");
}

std::string_view to_string(specfun::TailTransform t) {
    return t == specfun::TailTransform::rational_substitution ? "rational" : "exp";
}

NumericsSpec parse_numerics(const json& j) {
    NumericsSpec n;
    ObjectReader r(j, "numerics");
    r.read("abs_tol", n.abs_tol);
    r.read("rel_tol", n.rel_tol);
    r.read("ber_abs_tol", n.ber_abs_tol);
    r.read("ber_rel_tol", n.ber_rel_tol);
    r.read("max_subdivisions", n.max_subdivisions);
    read_enum(r, "tail_transform", n.tail_transform, tail_transform_from_string);
    r.finish();
    return n;
}

json numerics_json(const NumericsSpec& n) {
    return json{
        {"abs_tol", n.abs_tol},
        {"rel_tol", n.rel_tol},
        {"ber_abs_tol", n.ber_abs_tol},
        {"ber_rel_tol", n.ber_rel_tol},
        {"max_subdivisions", n.max_subdivisions},
        {"tail_transform", to_string(n.tail_transform)},
    };
}

Sweep parse_sweep(const json& j) {
    Sweep s;
    ObjectReader r(j, "sweep");
    read_enum(r, "variable", s.variable, sweep_variable_from_string);
    if (const json* values = r.child("values")) {
        if (!values->is_array()) throw ValidationError("sweep.values", "expected an array of numbers");
        s.values.clear();
        for (const auto& v : *values) {
            if (!v.is_number()) throw ValidationError("sweep.values", "expected an array of numbers");
            s.values.push_back(v.get<double>());
        }
    }
    r.finish();
    return s;
}

Outputs parse_outputs(const json& j) {
    Outputs o;
    ObjectReader r(j, "outputs");
    r.read("path", o.path);
    read_enum(r, "format", o.format, output_format_from_string);
    r.finish();
    return o;
}

json network_json(const NetworkSpec& n) {
    return json{
        {"lambda_ap_per_m2", n.lambda_ap},
        {"rho_blk_per_m2", n.rho_blk},
        {"sigma_sense_dbw", n.sigma_sense_dbw},
        {"q_int_dbm", n.q_int_dbm},
        {"q_srv_dbm", n.q_srv_dbm},
        {"alpha", n.alpha},
        {"m_shape", n.m_shape},
        {"beamwidth_deg", n.beamwidth_deg},
        {"len_rx_m", n.len_rx_m},
        {"dist_srv_m", n.dist_srv_m},
        {"snr_db", n.snr_db},
        {"mod_c", n.mod_c},
        {"eps_cont", n.eps_cont},
        {"beam_geom_mode", to_string(n.beam_geom_mode)},
        {"contention_rule", to_string(n.contention_rule)},
        {"allow_zero_blockage", n.allow_zero_blockage},
    };
}

json sim_json(const SimSpec& s, bool with_workers) {
    json j{
        {"disc_radius_m", s.disc_radius_m},
        {"n_realizations", s.n_realizations},
        {"seed", s.seed},
        {"blockage_mode", sim::to_string(s.blockage_mode)},
        {"serving_suppression", s.serving_suppression},
    };
    if (with_workers) j["workers"] = s.workers;
    return j;
}

json config_json(const ExperimentConfig& c, bool with_workers) {
    json j;
    if (!c.label.empty()) j["label"] = c.label;
    j["network"] = network_json(c.net);
    j["simulation"] = sim_json(c.sim, with_workers);
    j["numerics"] = numerics_json(c.numerics);
    j["sweep"] = json{{"variable", to_string(c.sweep.variable)}, {"values", c.sweep.values}};
    j["outputs"] = json{{"path", c.outputs.path}, {"format", to_string(c.outputs.format)}};
    return j;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

ExperimentConfig series(std::string label, NetworkSpec net) {
    ExperimentConfig c;
    c.label = std::move(label);
    c.net = net;
    return c;
}

// Key of the interference field a sweep point needs: the simulation parameters
// with the noise removed and the window resolved. Points sharing it can reuse
// one set of interference samples.
sim::SimParams field_key(sim::SimParams s) {
    s.disc_radius = s.window();
    s.net.noise_pow = 0.0;
    s.workers = 1;
    return s;
}

RunResult run(const ExperimentConfig& c, bool analytic, bool simulate) {
    c.validate();
    const analytic::Numerics num = c.numerics.to_numerics();
    RunResult out;
    std::optional<sim::SimParams> cached_key;
    std::vector<sim::InterferenceSample> samples;
    for (const double v : c.sweep.values) {
        BerCurvePoint row;
        row.sweep_value = v;
        const NetworkParams p = c.params_at(v);
        const double snr = c.snr_at(v);
        row.lambda_active = analytic::active_density(p, num.inner).lambda_active;
        if (analytic) row.ber_analytic = analytic::ber_average(p, snr, num).ber;
        if (simulate) {
            const sim::SimParams sp = c.sim_at(v);
            const sim::SimParams key = field_key(sp);
            if (!cached_key || !(*cached_key == key)) {
                samples = sim::simulate_interference(sp);
                cached_key = key;
            }
            const auto est = sim::estimate_ber_from_samples(samples, p, snr);
            row.ber_mc = est.ber;
            row.ci_half_width = est.ci_half_width;
            row.n_realizations = est.n;
        }
        if (analytic && simulate) row.flagged = exceeds_tolerance(*row.ber_analytic, *row.ber_mc, *row.ci_half_width);
        out.rows.push_back(row);
    }
    return out;
}

// Config key behind a NetworkParams field, or the sweep when it drives that field.
std::string config_field(const std::string& field, SweepVariable swept) {
    static const std::pair<const char*, const char*> keys[] = {
        {"lambda_ap", "lambda_ap_per_m2"}, {"rho_blk", "rho_blk_per_m2"}, {"sigma_sense", "sigma_sense_dbw"},
        {"q_int", "q_int_dbm"},           {"q_srv", "q_srv_dbm"},         {"phi", "beamwidth_deg"},
        {"len_rx", "len_rx_m"},           {"dist_srv", "dist_srv_m"},     {"noise_pow", "snr_db"},
    };
    if (field == to_string(swept) || (field == "noise_pow" && swept == SweepVariable::snr)) return "sweep.values";
    for (const auto& [name, key] : keys)
        if (field == name) return std::string("network.") + key;
    return "network." + field;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open for writing");
    f << text;
    f.close();
    if (!f) throw IoError(path + ": write failed");
}

} // namespace

std::string_view to_string(SweepVariable v) {
    switch (v) {
    case SweepVariable::snr: return "snr";
    case SweepVariable::sigma_sense: return "sigma_sense";
    case SweepVariable::lambda_ap: return "lambda_ap";
    case SweepVariable::rho_blk: return "rho_blk";
    }
    return "snr";
}

std::string_view to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "json-lines"; }

SweepVariable sweep_variable_from_string(std::string_view s) {
    if (s == "snr") return SweepVariable::snr;
    if (s == "sigma_sense") return SweepVariable::sigma_sense;
    if (s == "lambda_ap") return SweepVariable::lambda_ap;
    if (s == "rho_blk") return SweepVariable::rho_blk;
    throw ValidationError("sweep.variable", "expected snr, sigma_sense, lambda_ap or rho_blk, got '" + std::string(s) + "'");
}

OutputFormat output_format_from_string(std::string_view s) {
    if (s == "csv") return OutputFormat::csv;
    if (s == "json-lines") return OutputFormat::json_lines;
    throw ValidationError("outputs.format", "expected csv or json-lines, got '" + std::string(s) + "'");
}

std::string_view sweep_unit(SweepVariable v) {
    switch (v) {
    case SweepVariable::snr: return "dB";
    case SweepVariable::sigma_sense: return "dBW";
    case SweepVariable::lambda_ap:
    case SweepVariable::rho_blk: return "1/m^2";
    }
    return "";
}

NetworkParams NetworkSpec::to_params() const {
    NetworkParams p;
    p.lambda_ap = lambda_ap;
    p.rho_blk = rho_blk;
    p.sigma_sense = db_to_linear(sigma_sense_dbw);
    p.q_int = dbm_to_watts(q_int_dbm);
    p.q_srv = dbm_to_watts(q_srv_dbm);
    p.alpha = alpha;
    p.m_shape = m_shape;
    p.phi = beamwidth_deg * std::numbers::pi / 180.0;
    p.len_rx = len_rx_m;
    p.dist_srv = dist_srv_m;
    p.mod_c = mod_c;
    p.eps_cont = eps_cont;
    p.beam_geom_mode = beam_geom_mode;
    p.contention_rule = contention_rule;
    p.allow_zero_blockage = allow_zero_blockage;
    p.noise_pow = p.noise_for_snr(snr_db);
    return p;
}

analytic::Numerics NumericsSpec::to_numerics() const {
    analytic::Numerics n;
    n.inner = {abs_tol, rel_tol, max_subdivisions, tail_transform};
    n.outer = {ber_abs_tol, ber_rel_tol, max_subdivisions, tail_transform};
    return n;
}

double ExperimentConfig::snr_at(double v) const { return sweep.variable == SweepVariable::snr ? v : net.snr_db; }

NetworkParams ExperimentConfig::params_at(double v) const {
    NetworkSpec n = net;
    switch (sweep.variable) {
    case SweepVariable::snr: n.snr_db = v; break;
    case SweepVariable::sigma_sense: n.sigma_sense_dbw = v; break;
    case SweepVariable::lambda_ap: n.lambda_ap = v; break;
    case SweepVariable::rho_blk: n.rho_blk = v; break;
    }
    return n.to_params();
}

sim::SimParams ExperimentConfig::sim_at(double v) const {
    sim::SimParams s;
    s.net = params_at(v);
    s.disc_radius = sim.disc_radius_m;
    s.n_realizations = sim.n_realizations;
    s.seed = sim.seed;
    s.blockage_mode = sim.blockage_mode;
    s.serving_suppression = sim.serving_suppression;
    s.workers = sim.workers;
    return s;
}

void ExperimentConfig::validate() const {
    if (!std::isfinite(net.snr_db)) throw ValidationError("network.snr_db", "must be finite");
    for (const double d : {net.sigma_sense_dbw, net.q_int_dbm, net.q_srv_dbm, net.beamwidth_deg}) {
        if (!std::isfinite(d)) throw ValidationError("network", "dB and degree fields must be finite");
    }
    const std::pair<const char*, double> tols[] = {{"numerics.abs_tol", numerics.abs_tol},
                                                   {"numerics.rel_tol", numerics.rel_tol},
                                                   {"numerics.ber_abs_tol", numerics.ber_abs_tol},
                                                   {"numerics.ber_rel_tol", numerics.ber_rel_tol}};
    for (const auto& [field, tol] : tols) {
        if (!(tol > 0.0) || !std::isfinite(tol)) throw ValidationError(field, "must be positive");
    }
    if (numerics.max_subdivisions < 1) throw ValidationError("numerics.max_subdivisions", "must be at least 1");
    if (sweep.values.empty()) throw ValidationError("sweep.values", "must not be empty");
    for (std::size_t i = 0; i < sweep.values.size(); ++i) {
        if (!std::isfinite(sweep.values[i])) throw ValidationError("sweep.values", "must be finite");
        if (i > 0 && !(sweep.values[i] > sweep.values[i - 1]))
            throw ValidationError("sweep.values", "must be strictly increasing");
    }
    try {
        for (const double v : sweep.values) params_at(v).validate();
    } catch (const ValidationError& e) {
        throw ValidationError(config_field(e.field(), sweep.variable),
                              std::string(e.what()).substr(e.field().size() + 2));
    }
    try {
        sim_at(sweep.values.front()).validate();
    } catch (const ValidationError& e) {
        if (e.field() == "disc_radius" || e.field() == "n_realizations" || e.field() == "workers") {
            const std::string name = e.field() == "disc_radius" ? "disc_radius_m" : e.field();
            throw ValidationError("simulation." + name, std::string(e.what()).substr(e.field().size() + 2));
        }
        throw ValidationError(config_field(e.field(), sweep.variable),
                              std::string(e.what()).substr(e.field().size() + 2));
    }
}

ExperimentConfig parse_config(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("config", std::string("malformed JSON: ") + e.what());
    }
    ExperimentConfig c;
    ObjectReader r(j, "");
    r.read("label", c.label);
    if (const json* n = r.child("network")) c.net = parse_network(*n);
    if (const json* s = r.child("simulation")) c.sim = parse_sim(*s);
    if (const json* n = r.child("numerics")) c.numerics = parse_numerics(*n);
    if (const json* s = r.child("sweep")) c.sweep = parse_sweep(*s);
    if (const json* o = r.child("outputs")) c.outputs = parse_outputs(*o);
    r.finish();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path + ": cannot open config");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& c) { return config_json(c, true).dump(2) + "\n"; }

std::vector<ExperimentConfig> preset(std::string_view name) {
    std::vector<ExperimentConfig> out;
    NetworkSpec base;
    if (name == "fig3") {
        base.lambda_ap = 1e-1;
        base.rho_blk = 1e-3;
        for (const double s : {-70.0, -60.0, -50.0}) {
            NetworkSpec n = base;
            n.sigma_sense_dbw = s;
            out.push_back(series("sigma_sense_dbw_" + format_number(s), n));
        }
    } else if (name == "fig4") {
        base.rho_blk = 1e-3;
        base.sigma_sense_dbw = -60;
        for (const double l : {1e-3, 1e-2, 1e-1}) {
            NetworkSpec n = base;
            n.lambda_ap = l;
            out.push_back(series("lambda_ap_" + format_number(l), n));
        }
    } else if (name == "fig5") {
        base.lambda_ap = 1e-2;
        base.sigma_sense_dbw = -60;
        for (const double r : {1e-4, 1e-3, 1e-2}) {
            NetworkSpec n = base;
            n.rho_blk = r;
            out.push_back(series("rho_blk_" + format_number(r), n));
        }
    } else {
        throw ValidationError("preset", "expected fig3, fig4 or fig5, got '" + std::string(name) + "'");
    }
    return out;
}

bool RunResult::any_flagged() const {
    return std::any_of(rows.begin(), rows.end(), [](const BerCurvePoint& r) { return r.flagged; });
}

bool exceeds_tolerance(double ber_analytic, double ber_mc, double ci_half_width) {
    if (ber_analytic < 1e-3) return false;
    return std::abs(ber_mc - ber_analytic) > std::max(0.15 * ber_analytic, 2.0 * ci_half_width);
}

RunResult run_analytic_curve(const ExperimentConfig& c) { return run(c, true, false); }
RunResult run_simulated_curve(const ExperimentConfig& c) { return run(c, false, true); }
RunResult run_compare(const ExperimentConfig& c) { return run(c, true, true); }

std::string format_csv(const std::vector<BerCurvePoint>& rows) {
    std::string out = "sweep_value,ber_analytic,ber_mc,ci_half_width,n_realizations,lambda_active\n";
    const auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    for (const auto& r : rows) {
        out += format_number(r.sweep_value) + "," + opt(r.ber_analytic) + "," + opt(r.ber_mc) + "," +
               opt(r.ci_half_width) + "," + std::to_string(r.n_realizations) + "," + format_number(r.lambda_active) +
               "\n";
    }
    return out;
}

std::string format_json_lines(const std::vector<BerCurvePoint>& rows) {
    std::string out;
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    for (const auto& r : rows) {
        json j = json::object();
        j["sweep_value"] = r.sweep_value;
        j["ber_analytic"] = opt(r.ber_analytic);
        j["ber_mc"] = opt(r.ber_mc);
        j["ci_half_width"] = opt(r.ci_half_width);
        j["n_realizations"] = r.n_realizations;
        j["lambda_active"] = r.lambda_active;
        out += j.dump() + "\n";
    }
    return out;
}

std::string metadata_json(const ExperimentConfig& c, std::string_view command, const RunResult& result) {
    const NetworkParams p = c.params_at(c.sweep.values.front());
    json flagged = json::array();
    for (std::size_t i = 0; i < result.rows.size(); ++i)
        if (result.rows[i].flagged) flagged.push_back(i);
    json meta{
        {"tool", "mmwint"},
        {"version", kVersion},
        {"command", command},
        {"series", c.label},
        {"seed", c.sim.seed},
        {"kappa_sign", "plus"},
        {"beam_geom_mode", to_string(c.net.beam_geom_mode)},
        {"contention_rule", to_string(c.net.contention_rule)},
        {"blockage_mode", sim::to_string(c.sim.blockage_mode)},
        {"sweep_variable", to_string(c.sweep.variable)},
        {"sweep_unit", sweep_unit(c.sweep.variable)},
        {"conversions",
         {{"q_int_w", p.q_int},
          {"q_srv_w", p.q_srv},
          {"sigma_sense_w", p.sigma_sense},
          {"phi_rad", p.phi},
          {"noise_pow_w_at_first_point", p.noise_pow}}},
        {"config", config_json(c, false)},
        {"flagged_rows", flagged},
    };
    return meta.dump(2) + "\n";
}

std::string series_path(const std::string& path, const std::string& label, bool multi) {
    if (!multi || label.empty()) return path;
    const auto slash = path.find_last_of('/');
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + "_" + label;
    return path.substr(0, dot) + "_" + label + path.substr(dot);
}

void emit_output(const RunResult& result, const ExperimentConfig& c, std::string_view command, const std::string& path,
                 OutputFormat format) {
    write_file(path, format == OutputFormat::csv ? format_csv(result.rows) : format_json_lines(result.rows));
    write_file(path + ".meta.json", metadata_json(c, command, result));
}

} // namespace mmwint::experiment
