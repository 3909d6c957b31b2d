import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dncahn.asymptotics import (DegenerateFit, SweepConfig, TruncatedForcing,
                                continuous_dependence_probe, delta_sweep, eps_sweep, fit_rate,
                                prepare_delta_data, prepare_eps_forcing, smooth_data)
from dncahn.grid import Grid1D
from dncahn.presets import ConstantForcing, WaveForcing, make_preset
from dncahn.stepper import NonConvergence


# --- smoothing ------------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.integers(4, 128), st.floats(1e-6, 10.0), st.integers(0, 2 ** 32 - 1))
def test_smooth_data_keeps_mean_and_range(N, alpha, seed):
    grid = Grid1D(1.0, N)
    f = np.random.default_rng(seed).normal(size=N)
    v = smooth_data(f, alpha, grid)
    assert abs(grid.mean(v) - grid.mean(f)) <= 1e-12 * max(1.0, np.abs(f).max())
    assert v.min() >= f.min() - 1e-12 and v.max() <= f.max() + 1e-12


def test_smooth_data_examples():
    grid = Grid1D(2.0, 256)
    np.testing.assert_allclose(smooth_data(np.full(256, 0.3), 0.7, grid), 0.3, rtol=1e-12)
    f = np.cos(np.pi * grid.x / grid.L)
    alpha = 0.05
    expected = f / (1 + alpha * (np.pi / grid.L) ** 2)
    assert np.max(np.abs(smooth_data(f, alpha, grid) - expected)) <= 10 * grid.h ** 2
    with pytest.raises(ValueError):
        smooth_data(f, 0.0, grid)


def test_smooth_data_converges_linearly_in_alpha():
    grid = Grid1D(1.0, 256)
    f = np.cos(np.pi * grid.x) + 0.3 * np.cos(2 * np.pi * grid.x)
    # small enough that alpha*(2 pi)^2 << 1
    alphas = [1e-3, 1e-4, 1e-5]
    errs = [grid.norm_l2(smooth_data(f, a, grid) - f) for a in alphas]
    slope, _ = fit_rate(list(zip(alphas, errs)))
    assert slope == pytest.approx(1.0, abs=0.02)


def test_prepare_delta_data():
    spec = make_preset("logwell-sign", forcing=WaveForcing(0.5, 1, 3.0))
    u0d, gd, info = prepare_delta_data(spec, 0.0)
    assert np.array_equal(u0d, spec.u0) and gd is spec.forcing and info == {"u0": 0.0, "g": 0.0}
    prev = (np.inf, np.inf)
    for d in (1e-2, 1e-3, 1e-4, 1e-5):
        u0d, gd, info = prepare_delta_data(spec, d)
        # discrete maximum principle keeps the data in [a0, b0]
        assert spec.a0 - 1e-12 <= u0d.min() and u0d.max() <= spec.b0 + 1e-12
        np.testing.assert_allclose(gd(spec.grid.x, 0.2),
                                   smooth_data(spec.g(0.2), np.sqrt(d), spec.grid))
        assert info["u0"] < prev[0] and info["g"] < prev[1]
        prev = (info["u0"], info["g"])
    with pytest.raises(ValueError):
        prepare_delta_data(spec, -1.0)


def test_prepare_delta_data_rate_in_alpha():
    spec = make_preset("logwell-sign", N=256)
    ds = [1e-4, 1e-6, 1e-8]
    errs = [prepare_delta_data(spec, d)[2]["u0"] for d in ds]
    slope, _ = fit_rate(list(zip(np.sqrt(ds), errs)))
    assert slope == pytest.approx(1.0, abs=0.05)


def test_prepare_eps_forcing():
    x = np.linspace(0, 1, 5)
    g = prepare_eps_forcing(ConstantForcing(20.0), 0.1)
    np.testing.assert_array_equal(g(x, 0.0), 10.0)
    np.testing.assert_array_equal(prepare_eps_forcing(ConstantForcing(-20.0), 0.1)(x, 0.3), -10.0)
    w = WaveForcing(3.0, 2, 1.0)
    np.testing.assert_array_equal(prepare_eps_forcing(w, 0.1)(x, 0.0), w(x, 0.0))
    assert isinstance(g, TruncatedForcing) and "truncated" in g.describe()
    with pytest.raises(ValueError):
        prepare_eps_forcing(w, 0.0)


def test_truncated_forcing_converges():
    spec = make_preset("quartic-power", forcing=WaveForcing(50.0, 1, 0.0))
    from dncahn.asymptotics import _forcing_l2h
    dists = [_forcing_l2h(spec, prepare_eps_forcing(spec.forcing, e), spec.forcing)
             for e in (0.1, 0.05, 0.025, 0.01)]
    # 1/eps = 100 exceeds the amplitude: no truncation left
    assert all(b < a for a, b in zip(dists, dists[1:])) and dists[-1] == 0.0


# --- rate fitting -----------------------------------------------------------------

def test_fit_rate_synthetic():
    p = np.logspace(-5, -1, 5)
    slope, res = fit_rate(list(zip(p, p ** 0.25)))
    assert slope == pytest.approx(0.25, abs=1e-12) and res <= 1e-12
    assert fit_rate(list(zip(p, 3 * p)))[0] == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(7)
    noisy = p ** 0.5 * (1 + 0.05 * rng.uniform(-1, 1, p.size))
    assert fit_rate(list(zip(p, noisy)))[0] == pytest.approx(0.5, abs=0.05)


def test_fit_rate_errors():
    with pytest.raises(DegenerateFit):
        fit_rate([(1, 1e-15), (0.1, 0.0), (0.01, 1e-14)])
    with pytest.raises(ValueError):
        fit_rate([(1, 1), (0.1, 0.5)])
    with pytest.raises(ValueError):
        fit_rate([(1, 1), (0.1, -0.5), (0.01, 0.1)])
    assert issubclass(DegenerateFit, ValueError)


# --- sweep configuration ------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    dict(parameter="tau"), dict(values=(1e-2, 1e-3)), dict(values=(1e-3, 1e-2, 1e-4)),
    dict(values=(1e-2, 1e-2, 1e-3)), dict(values=(1e-2, 0.0, -1.0)), dict(reference="best"),
])
def test_sweep_config_rejects(kw):
    base = make_preset("logwell-sign")
    args = dict(base=base, parameter="delta", values=(1e-2, 1e-3, 1e-4))
    args.update(kw)
    with pytest.raises(ValueError):
        SweepConfig(**args)


def test_sweep_config_needs_complementary_parameter():
    base = make_preset("quartic-power", eps=0.0)
    with pytest.raises(ValueError):
        SweepConfig(base, "delta", (1e-2, 1e-3, 1e-4))
    SweepConfig(base, "delta", (1e-2, 1e-3, 1e-4), reference="finest")
    with pytest.raises(ValueError):
        delta_sweep(SweepConfig(base, "delta", (1e-2, 1e-3, 1e-4), reference="finest"))
    with pytest.raises(ValueError):
        eps_sweep(SweepConfig(make_preset("quartic-power"), "delta", (1e-2, 1e-3, 1e-4)))


# --- sweeps on small problems ------------------------------------------------------

def test_delta_sweep_small():
    base = make_preset("logwell-sign", N=32, T=0.02)
    rep = delta_sweep(SweepConfig(base, "delta", (1e-1, 1e-2, 1e-3)))
    assert rep.n_points == 3 and rep.reference["delta"] == 0.0
    assert np.all(np.isfinite(rep.errors)) and rep.monotone()
    assert rep.bound_holds
    rhs = np.array([p.extra["rhs"] for p in rep.points])
    assert np.all(rep.errors <= rep.constant * rhs * (1 + 1e-12))
    assert rep.slope > 0


def test_eps_sweep_finest_reference():
    base = make_preset("quartic-power", N=32, T=0.02)
    rep = eps_sweep(SweepConfig(base, "eps", (1e-1, 3e-2, 1e-2, 1e-3), reference="finest"))
    assert rep.n_points == 3 and rep.reference["eps"] == 1e-3
    assert rep.monotone() and rep.monotone("V")
    assert rep.slopes["V"] > 0.45


def test_sweep_failure_is_tagged(monkeypatch):
    from dncahn import stepper
    monkeypatch.setattr(stepper, "NEWTON_MAXITER", 0)
    monkeypatch.setattr(stepper, "FIXED_POINT_MAXITER", 0)
    base = make_preset("quartic-power", N=16, T=0.002)
    with pytest.raises(NonConvergence, match="eps=0.0"):
        eps_sweep(SweepConfig(base, "eps", (1e-1, 1e-2, 1e-3)))


# --- continuous dependence -----------------------------------------------------------

def test_dependence_probe_homogeneity_and_zero():
    spec = make_preset("quartic-zero", N=32, T=0.01)
    rep = continuous_dependence_probe(spec, [0.0, 1e-2])
    assert rep.lhs[0] == 0.0 and rep.rhs[0] == 0.0
    u_prof = 0.5 * np.cos(2 * np.pi * spec.grid.x)
    single = continuous_dependence_probe(spec, [1e-2], u_profile=u_prof,
                                         g_profile=WaveForcing(1.0, 2, 0.0))
    double = continuous_dependence_probe(spec, [1e-2], u_profile=2 * u_prof,
                                         g_profile=WaveForcing(2.0, 2, 0.0))
    assert double.rhs[0] == pytest.approx(4 * single.rhs[0], rel=1e-12)
    assert single.rhs[0] == pytest.approx(rep.rhs[1], rel=1e-12)
    with pytest.raises(ValueError):
        continuous_dependence_probe(make_preset("quartic-zero", eps=0.0), [1e-2])
