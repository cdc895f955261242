// Python bindings: special functions, the analytic chain, the Monte-Carlo
// estimators and the experiment runners. Long-running calls release the GIL.

#include "mmwint/analytic.hpp"
#include "mmwint/errors.hpp"
#include "mmwint/experiment.hpp"
#include "mmwint/simulator.hpp"
#include "mmwint/specfun.hpp"

#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mmwint;
namespace ex = mmwint::experiment;

namespace {

py::dict row_dict(const ex::BerCurvePoint& r) {
    py::dict d;
    d["sweep_value"] = r.sweep_value;
    d["ber_analytic"] = r.ber_analytic;
    d["ber_mc"] = r.ber_mc;
    d["ci_half_width"] = r.ci_half_width;
    d["n_realizations"] = r.n_realizations;
    d["lambda_active"] = r.lambda_active;
    d["flagged"] = r.flagged;
    return d;
}

py::list rows_list(const ex::RunResult& r) {
    py::list out;
    for (const auto& row : r.rows) out.append(row_dict(row));
    return out;
}

ex::ExperimentConfig config_from(const py::object& cfg) {
    if (cfg.is_none()) return {};
    if (py::isinstance<py::str>(cfg)) return ex::parse_config(cfg.cast<std::string>());
    // any JSON-serializable mapping
    const auto dumps = py::module_::import("json").attr("dumps");
    return ex::parse_config(dumps(cfg).cast<std::string>());
}

template <class Runner>
auto curve_runner(Runner run) {
    return [run](const py::object& cfg) {
        const ex::ExperimentConfig c = config_from(cfg);
        c.validate();
        ex::RunResult r;
        {
            py::gil_scoped_release release;
            r = run(c);
        }
        return rows_list(r);
    };
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Interference and BER of carrier-sense mmWave networks with blockage";
    m.attr("__version__") = std::string(ex::kVersion);

    // exceptions: validation maps onto ValueError, numerical failures onto ArithmeticError
    static py::exception<ValidationError> validation_error(m, "ValidationError", PyExc_ValueError);
    static py::exception<NumericError> numeric_error(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ValidationError& e) {
            PyErr_SetString(validation_error.ptr(), e.what());
        } catch (const NumericError& e) {
            PyErr_SetString(numeric_error.ptr(), e.what());
        } catch (const DomainError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const InsufficientSamplesError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const ex::IoError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        }
    });

    py::enum_<BeamGeometry>(m, "BeamGeometry")
        .value("half_angle", BeamGeometry::half_angle)
        .value("as_printed", BeamGeometry::as_printed);
    py::enum_<ContentionRule>(m, "ContentionRule")
        .value("threshold_inversion", ContentionRule::threshold_inversion)
        .value("as_printed", ContentionRule::as_printed);
    py::enum_<sim::BlockageMode>(m, "BlockageMode")
        .value("bernoulli", sim::BlockageMode::bernoulli)
        .value("geometric", sim::BlockageMode::geometric);

    py::class_<NetworkParams>(m, "NetworkParams", "Model parameters in linear SI units")
        .def(py::init<>())
        .def_readwrite("lambda_ap", &NetworkParams::lambda_ap)
        .def_readwrite("rho_blk", &NetworkParams::rho_blk)
        .def_readwrite("sigma_sense", &NetworkParams::sigma_sense)
        .def_readwrite("q_int", &NetworkParams::q_int)
        .def_readwrite("q_srv", &NetworkParams::q_srv)
        .def_readwrite("alpha", &NetworkParams::alpha)
        .def_readwrite("m_shape", &NetworkParams::m_shape)
        .def_readwrite("phi", &NetworkParams::phi)
        .def_readwrite("len_rx", &NetworkParams::len_rx)
        .def_readwrite("dist_srv", &NetworkParams::dist_srv)
        .def_readwrite("noise_pow", &NetworkParams::noise_pow)
        .def_readwrite("mod_c", &NetworkParams::mod_c)
        .def_readwrite("eps_cont", &NetworkParams::eps_cont)
        .def_readwrite("beam_geom_mode", &NetworkParams::beam_geom_mode)
        .def_readwrite("contention_rule", &NetworkParams::contention_rule)
        .def_readwrite("allow_zero_blockage", &NetworkParams::allow_zero_blockage)
        .def("validate", &NetworkParams::validate)
        .def("serving_power", &NetworkParams::serving_power)
        .def("with_snr", &NetworkParams::with_snr, py::arg("snr_db"))
        .def(py::self == py::self)
        .def("__repr__", [](const NetworkParams& p) {
            return "NetworkParams(lambda_ap=" + std::to_string(p.lambda_ap) + ", rho_blk=" + std::to_string(p.rho_blk) +
                   ", sigma_sense=" + std::to_string(p.sigma_sense) + ")";
        });

    // special functions
    m.def("log_gamma", &specfun::log_gamma, py::arg("x"));
    m.def("gamma_reg_upper", &specfun::gamma_reg_upper, py::arg("m"), py::arg("x"),
          "Regularized upper incomplete gamma Γ(m, m·x)/Γ(m)");
    m.def("gamma_reg_upper_inv", &specfun::gamma_reg_upper_inv, py::arg("m"), py::arg("p"));
    m.def("hyp1f1", &specfun::hyp1f1, py::arg("a"), py::arg("b"), py::arg("z"));
    m.def("q_function", &specfun::q_function, py::arg("x"));

    // analytic chain
    py::class_<analytic::MacDerived>(m, "MacDerived")
        .def_readonly("r_cont", &analytic::MacDerived::r_cont)
        .def_readonly("area_cont", &analytic::MacDerived::area_cont)
        .def_readonly("eta", &analytic::MacDerived::eta)
        .def_readonly("lambda_active", &analytic::MacDerived::lambda_active);

    m.def("not_blocked_prob", &analytic::not_blocked_prob, py::arg("params"), py::arg("ell"));
    m.def("contention_radius", &analytic::contention_radius, py::arg("params"));
    m.def("active_density", [](const NetworkParams& p) { return analytic::active_density(p); }, py::arg("params"));
    m.def(
        "laplace_interference",
        [](const NetworkParams& p, double s, std::optional<double> lambda_active) {
            const double la = lambda_active ? *lambda_active : analytic::active_density(p).lambda_active;
            return analytic::laplace_interference(p, la, s).value;
        },
        py::arg("params"), py::arg("s"), py::arg("lambda_active") = py::none(),
        "Laplace transform of the aggregate interference; lambda_active defaults to the model's value");
    m.def(
        "ber_average", [](const NetworkParams& p, double snr_db) { return analytic::ber_average(p, snr_db).ber; },
        py::arg("params"), py::arg("snr_db"), py::call_guard<py::gil_scoped_release>());

    // Monte-Carlo
    py::class_<sim::SimParams>(m, "SimParams")
        .def(py::init<>())
        .def_readwrite("net", &sim::SimParams::net)
        .def_readwrite("disc_radius", &sim::SimParams::disc_radius)
        .def_readwrite("n_realizations", &sim::SimParams::n_realizations)
        .def_readwrite("seed", &sim::SimParams::seed)
        .def_readwrite("blockage_mode", &sim::SimParams::blockage_mode)
        .def_readwrite("serving_suppression", &sim::SimParams::serving_suppression)
        .def_readwrite("workers", &sim::SimParams::workers)
        .def("validate", &sim::SimParams::validate)
        .def("window", &sim::SimParams::window);

    m.def(
        "simulate_interference",
        [](const sim::SimParams& s) {
            std::vector<sim::InterferenceSample> samples;
            {
                py::gil_scoped_release release;
                samples = sim::simulate_interference(s);
            }
            const auto n = static_cast<py::ssize_t>(samples.size());
            py::array_t<double> i_agg(n);
            py::array_t<int> n_active(n), n_aligned(n);
            auto a = i_agg.mutable_unchecked<1>();
            auto b = n_active.mutable_unchecked<1>();
            auto c = n_aligned.mutable_unchecked<1>();
            for (py::ssize_t i = 0; i < n; ++i) {
                a(i) = samples[i].i_agg;
                b(i) = samples[i].n_active;
                c(i) = samples[i].n_aligned;
            }
            py::dict out;
            out["i_agg"] = i_agg;
            out["n_active"] = n_active;
            out["n_aligned"] = n_aligned;
            return out;
        },
        py::arg("sim"), "Aggregate interference per realization as numpy arrays");
    m.def(
        "estimate_active_density",
        [](const sim::SimParams& s) {
            sim::DensityEstimate e;
            {
                py::gil_scoped_release release;
                e = sim::estimate_active_density(s);
            }
            return py::make_tuple(e.density, e.std_error);
        },
        py::arg("sim"), "(density, standard error)");
    m.def(
        "estimate_ber",
        [](const sim::SimParams& s, double snr_db) {
            sim::BerEstimate e;
            {
                py::gil_scoped_release release;
                e = sim::estimate_ber(s, snr_db);
            }
            return py::make_tuple(e.ber, e.ci_half_width);
        },
        py::arg("sim"), py::arg("snr_db"), "(ber, 95% CI half-width)");
    m.def("conditional_ber", &sim::conditional_ber, py::arg("params"), py::arg("noise_plus_interference"));

    // experiments: config is None (defaults), a JSON string or a dict
    m.def("analytic_curve", curve_runner(ex::run_analytic_curve), py::arg("config") = py::none());
    m.def("simulated_curve", curve_runner(ex::run_simulated_curve), py::arg("config") = py::none());
    m.def("compare_curve", curve_runner(ex::run_compare), py::arg("config") = py::none());
    m.def(
        "normalize_config", [](const py::object& cfg) { return ex::emit_config(config_from(cfg)); },
        py::arg("config") = py::none(), "Parse, fill in defaults and re-emit a config as JSON text");
    m.def(
        "preset",
        [](const std::string& name) {
            std::vector<std::string> out;
            for (const auto& c : ex::preset(name)) out.push_back(ex::emit_config(c));
            return out;
        },
        py::arg("name"), "Configs of a built-in parameter set as JSON text");
}
