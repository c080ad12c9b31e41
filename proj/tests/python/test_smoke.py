import json
import math

import numpy as np
import pytest

import subdiff


def test_mittag_leffler_closed_forms():
    assert subdiff.mittag_leffler(1.0, -1.3) == pytest.approx(math.exp(-1.3), rel=1e-12)
    assert subdiff.mittag_leffler(0.5, -0.5) == pytest.approx(math.exp(0.25) * math.erfc(0.5), abs=1e-12)


def test_inverse_moment_formula():
    for beta, t, n in [(0.5, 1.0, 1), (0.3, 2.0, 2), (0.7, 0.5, 1)]:
        expected = t ** (n * beta) * math.factorial(n) / math.gamma(n * beta + 1)
        assert subdiff.inverse_moment(beta, t, n) == pytest.approx(expected, rel=1e-12)


def test_sample_inverse_matches_mean():
    x = subdiff.sample_inverse(0.5, 1.0, 50000, seed=3)
    assert isinstance(x, np.ndarray) and x.shape == (50000,)
    assert np.all(x >= 0)
    se = x.std(ddof=1) / math.sqrt(x.size)
    assert abs(x.mean() - 1.0 / math.gamma(1.5)) < 4 * se
    assert np.array_equal(x, subdiff.sample_inverse(0.5, 1.0, 50000, seed=3))


def test_inverse_path_is_nondecreasing():
    tau, u, t, e = subdiff.simulate_inverse_path(0.6, 1.0, 100, d_tau=1e-3, seed=2)
    assert t.shape == e.shape == (101,)
    assert e[0] == 0.0
    assert np.all(np.diff(e) >= 0)
    assert np.all(np.diff(u) >= 0)
    assert u[-1] >= 1.0


def test_caputo_of_mittag_leffler_eigenfunction():
    beta, n = 0.5, 400
    dt = 1.0 / n
    t = np.arange(n + 1) * dt
    f = np.array([subdiff.mittag_leffler(beta, -(s**beta)) for s in t])
    d = subdiff.caputo_derivative(f, dt, beta, corrected=True)
    assert d.shape == f.shape
    assert np.max(np.abs(d[n // 2 :] + f[n // 2 :])) < 0.02


def test_char_function_value():
    assert subdiff.mode_characteristic_function(1.0, 0.5, 1.0, 1.0) == pytest.approx(
        math.exp(0.25) * math.erfc(0.5), abs=1e-12
    )


def test_run_experiment_report():
    assert "walsh-triple" in subdiff.experiments()
    r = subdiff.run_experiment("moments", "mc = 20000\n[check]\nt = [1.0]\nn = [1, 2]\n", seed=5)
    assert r["experiment"] == "moments"
    assert len(r["checks"]) == 2
    assert r["all_pass"]
    assert r["series"]["moments"]["header"][:3] == ["beta", "t", "n"]
    summary = json.loads(r["summary_json"])
    assert summary["config"]["seed"] == 5
    again = subdiff.run_experiment("moments", "mc = 20000\n[check]\nt = [1.0]\nn = [1, 2]\n", seed=5, workers=3)
    assert again["summary_json"] == r["summary_json"]


def test_config_errors_are_value_errors():
    with pytest.raises(ValueError):
        subdiff.run_experiment("moments", "mc = 0\n")
    with pytest.raises(ValueError):
        subdiff.run_experiment("moments", "bogus = 1\n")
    with pytest.raises(ValueError):
        subdiff.run_experiment("nope")
