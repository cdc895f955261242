import json
import math

import numpy as np
import pytest

import mmwint


def test_special_functions():
    assert mmwint.log_gamma(3.0) == pytest.approx(math.log(2.0), rel=1e-13)
    assert mmwint.hyp1f1(1.0, 1.0, 0.7) == pytest.approx(math.exp(0.7), rel=1e-13)
    assert mmwint.q_function(1.0) == pytest.approx(0.5 * math.erfc(1 / math.sqrt(2)), rel=1e-13)
    x = mmwint.gamma_reg_upper_inv(3.0, 0.05)
    assert mmwint.gamma_reg_upper(3.0, x) == pytest.approx(0.05, rel=1e-10)


def test_domain_errors_are_value_errors():
    with pytest.raises(ValueError):
        mmwint.log_gamma(-1.0)


def test_params_round_trip_and_validation():
    p = mmwint.NetworkParams()
    p.lambda_ap = 0.05
    assert p.lambda_ap == 0.05
    assert p.with_snr(10.0).noise_pow == pytest.approx(p.serving_power() / 10.0)
    p.lambda_ap = -1.0
    with pytest.raises(mmwint.ValidationError) as err:
        p.validate()
    assert isinstance(err.value, ValueError)


def test_analytic_chain():
    p = mmwint.NetworkParams()
    mac = mmwint.active_density(p)
    assert 0.0 < mac.lambda_active < p.lambda_ap
    assert 0.0 < mac.eta <= 1.0
    assert mmwint.laplace_interference(p, 0.0) == pytest.approx(1.0, abs=1e-12)
    values = [mmwint.laplace_interference(p, s) for s in (1e-2, 1.0, 1e2, 1e4)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert mmwint.not_blocked_prob(p, 0.0) == 1.0
    bers = [mmwint.ber_average(p, snr) for snr in (0.0, 10.0, 20.0)]
    assert bers[0] > bers[1] > bers[2] > 0.0


def test_simulation_arrays():
    s = mmwint.SimParams()
    s.n_realizations = 200
    s.disc_radius = 150.0
    s.seed = 11
    out = mmwint.simulate_interference(s)
    assert out["i_agg"].shape == (200,)
    assert out["i_agg"].dtype == np.float64
    assert np.all(out["i_agg"] >= 0.0)
    assert np.all(out["n_aligned"] <= out["n_active"])
    again = mmwint.simulate_interference(s)
    assert np.array_equal(out["i_agg"], again["i_agg"])


def test_monte_carlo_ber_without_interferers():
    s = mmwint.SimParams()
    s.net.lambda_ap = 0.0
    s.n_realizations = 1000
    s.disc_radius = 50.0
    ber, ci = mmwint.estimate_ber(s, 10.0)
    p = mmwint.NetworkParams()
    p.lambda_ap = 0.0
    assert ber == pytest.approx(mmwint.ber_average(p, 10.0), rel=1e-9)
    assert ci == pytest.approx(0.0, abs=1e-15)


def test_experiment_runners_accept_dicts_and_json():
    cfg = {"sweep": {"values": [0, 10]}}
    rows = mmwint.analytic_curve(cfg)
    assert [r["sweep_value"] for r in rows] == [0, 10]
    assert rows[0]["ber_mc"] is None
    assert rows[0]["ber_analytic"] > rows[1]["ber_analytic"]
    assert mmwint.analytic_curve(json.dumps(cfg)) == rows

    cfg = {"simulation": {"n_realizations": 1000, "disc_radius_m": 100}, "sweep": {"values": [5]}}
    (row,) = mmwint.compare_curve(cfg)
    assert row["n_realizations"] == 1000
    assert row["ber_mc"] > 0.0 and row["ci_half_width"] > 0.0


def test_config_errors():
    with pytest.raises(mmwint.ValidationError):
        mmwint.analytic_curve({"network": {"lambda_typo": 1}})
    with pytest.raises(ValueError):
        mmwint.analytic_curve({"network": {"lambda_ap_per_m2": -1}})


def test_presets_and_normalized_config():
    series = [json.loads(text) for text in mmwint.preset("fig3")]
    assert len(series) == 3
    assert json.loads(mmwint.normalize_config(json.dumps(series[0]))) == series[0]
    with pytest.raises(ValueError):
        mmwint.preset("fig9")
