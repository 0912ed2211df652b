import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypolab.certify import commutator_chain
from hypolab.errors import HypolabError
from hypolab.evolve import (
    DiffIneqInstance, PlaneWaveFlow, Trajectory, chain_functionals, diffineq_check,
    fit_rate, fit_system_constants, herau_check, nash_check, nash_theta, nonexpansive,
    octave_waves, propagate, read_csv,
)
from hypolab.experiments import gaussian_family, synthetic_instance
from hypolab.models import build_kfp, quadratic


@pytest.fixture(scope="module")
def quad():
    m = build_kfp(quadratic(1.0), 16, 16)
    return m, commutator_chain(m)


def test_eig_and_crank_nicolson_agree(quad):
    m, ch = quad
    rng = np.random.default_rng(0)
    h0 = m.remove_kernel(rng.standard_normal(m.basis.dim) * np.exp(-0.5 * (np.arange(m.basis.dim) % 16)))
    ts = np.linspace(0, 1, 11)
    a = propagate(m.L, h0, ts, kernel=m.kernel, keep_states=True)
    b = propagate(m.L, h0, ts, scheme="crank-nicolson", dt=1e-3, kernel=m.kernel, keep_states=True)
    assert a.scheme == "eig" and b.scheme == "crank-nicolson"
    assert np.abs(a.states - b.states).max() < 1e-5 * np.abs(h0).max()


def test_kernel_component_removed(quad):
    m, _ = quad
    h0 = m.kernel[:, 0] * 3.0
    tr = propagate(m.L, h0, [0.0, 1.0], kernel=m.kernel)
    assert tr.kernel_mass == pytest.approx(3.0)
    assert tr["l2"][0] == pytest.approx(0.0, abs=1e-24)


def test_propagate_rejects_bad_times(quad):
    m, _ = quad
    h0 = np.zeros(m.basis.dim)
    with pytest.raises(HypolabError):
        propagate(m.L, h0, [0.5, 1.0])
    with pytest.raises(HypolabError):
        propagate(m.L, h0, [0.0, 1.0, 0.5])
    with pytest.raises(HypolabError):
        propagate(m.L, h0[:-1], [0.0, 1.0])


def test_plane_waves_match_hermite_propagator(quad):
    m, ch = quad
    flow = PlaneWaveFlow(1.0)
    waves = np.array([[0.4, 0.0], [0.0, 0.5], [0.3, -0.2]])
    c = np.array([1.0, 0.5j, -0.3])
    h0 = flow.hermite_coefficients(waves, c, 16, 16)
    ts = np.linspace(0, 2, 5)
    tr = propagate(m.L, h0, ts, kernel=m.kernel, functionals=chain_functionals(ch))
    tp = flow.track(waves, c, ts)
    for name in ("l2", "ah", "ch", "mixed"):
        assert np.abs(tr[name] - tp[name]).max() < 1e-9


def test_l2_nonexpansive(quad):
    m, ch = quad
    rng = np.random.default_rng(1)
    h0 = rng.standard_normal(m.basis.dim)
    tr = propagate(m.L, h0, np.linspace(0, 5, 51), kernel=m.kernel)
    worst, ok = nonexpansive(tr)
    assert ok and worst == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.1, 10.0))
def test_fit_exact_exponential(rate, pref):
    t = np.linspace(0, 4, 41)
    y = pref * np.exp(-rate * t)
    f = fit_rate((t, y), None, "exponential", (0, 4))
    assert f.rate == pytest.approx(rate, rel=1e-10)
    assert f.r2 == pytest.approx(1.0)
    g = fit_rate((t, y ** 2), None, "exponential", (0, 4), squared=True)
    assert g.rate == pytest.approx(rate, rel=1e-10)


def test_fit_powerlaw_and_errors():
    t = np.logspace(-3, 0, 30)
    f = fit_rate((t, 2 * t ** -1.5), None, "powerlaw", (1e-3, 1))
    assert f.exponent == pytest.approx(-1.5)
    with pytest.raises(HypolabError):
        fit_rate((t, t), None, "exponential")
    with pytest.raises(HypolabError):
        fit_rate((t, -t), None, "exponential", (0, 1))
    with pytest.raises(HypolabError):
        fit_rate((t, t), None, "powerlaw", (0, 1))
    with pytest.raises(HypolabError):
        fit_rate((t, t), None, "cubic", (0.1, 1))


def test_trajectory_csv_roundtrip(tmp_path):
    tr = Trajectory(np.array([0.0, 0.5]), {"l2": np.array([1.0, 0.25]), "ah": np.array([2.0, 1 / 3])})
    back = read_csv(tr.to_csv(tmp_path / "t.csv"))
    assert back.names == ["l2", "ah"]
    assert np.array_equal(back["ah"], tr["ah"])
    with pytest.raises(HypolabError):
        tr["ch"]


def test_herau_functional_monotone():
    flow = PlaneWaveFlow(1.0)
    w, c = octave_waves(1.0, 1e3, 2)
    tr = flow.track(w, c, np.linspace(0, 1, 201))
    rep = herau_check(tr, 0.1, 0.01, 0.001)
    assert rep.monotone and rep.violations == 0 and rep.bounds_hold
    with pytest.raises(HypolabError, match="smallness"):
        herau_check(tr, 0.1, 0.5, 0.001)


def test_diffineq_synthetic_instance():
    v = diffineq_check(synthetic_instance())
    assert v.hypotheses_hold and v.verdict
    assert v.kappa == 0.5 and v.exponent == -2.0
    assert np.isfinite(v.Cbar)


def test_diffineq_detects_violation():
    inst = synthetic_instance()
    t = inst.times
    bad = DiffIneqInstance(inst.C, inst.K, inst.delta, inst.theta, t, np.exp(50 * t),
                           inst.X, inst.Y, inst.Z, inst.M)
    v = diffineq_check(bad)
    assert not v.hypotheses_hold and not v.verdict
    with pytest.raises(HypolabError):
        diffineq_check(DiffIneqInstance(1, 1, 0.5, 0.5, np.array([0.0, 0.5]), *[np.ones(2)] * 5))


def test_fitted_constants_make_hypotheses_hold():
    inst = synthetic_instance()
    C, K = fit_system_constants(inst.times, inst.E, inst.X, inst.Y, inst.Z, inst.M, 0.5, 0.5)
    v = diffineq_check(DiffIneqInstance(C, K, 0.5, 0.5, inst.times, inst.E, inst.X, inst.Y,
                                        inst.Z, inst.M))
    assert v.hypotheses_hold


def test_nash_theta_and_scale_behaviour():
    assert nash_theta(0, 1, 1, 3) == pytest.approx(0.4)
    with pytest.raises(HypolabError):
        nash_theta(1, 1, 1, 1)
    recs = [nash_check(f, h, h, 0, 1, 1, 3) for _, f, h in gaussian_family([0.5, 1.0, 2.0], 256, 32.0)]
    ratios = [r.ratio for r in recs]
    assert max(ratios) / min(ratios) < 10
    assert all(r.mass == pytest.approx(1.0, rel=1e-6) for r in recs)
    with pytest.raises(HypolabError):
        nash_check(np.ones((6, 8)), 0.1, 0.1, 0, 1, 1, 3)
