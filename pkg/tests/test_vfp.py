import numpy as np
import pytest

from hypolab import entropic, vfp
from hypolab.errors import HypolabError
from hypolab.models import cosine


def test_smallness_threshold():
    assert vfp.smallness_value(0.38) == pytest.approx(0.48558, abs=1e-5)
    assert vfp.smallness_value(0.38) < 0.5 < vfp.smallness_value(0.40)
    assert vfp.coupling(0.3).small and not vfp.coupling(0.45).small


def test_free_energy_of_maxwellian():
    g = entropic.make_grid(32, 96, length=1.0, vmax=8.0)
    f = g.with_values(vfp.maxwellian(g).copy())
    fe = vfp.free_energy(f, vfp.coupling(0.3))
    assert fe.E == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-9)
    assert fe.excess == pytest.approx(0.0, abs=1e-12)


def test_force_matches_quadrature():
    g = entropic.make_grid(64, 16, length=1.0)
    spec = vfp.coupling(0.3)
    rho = lambda y: 1 + 0.2 * np.cos(2 * np.pi * y)  # noqa: E731
    f = g.with_values(rho(g.x)[:, None] * vfp.maxwellian(g))
    F = vfp.self_consistent_force(f, spec)
    ys = np.linspace(0, 1, 4001)[:-1]
    ref = np.array([-np.mean(spec.dW(x - ys) * rho(ys)) for x in g.x])
    assert np.abs(F - ref).max() < 1e-12


def test_zero_coupling_reduces_to_linear_step():
    g = entropic.make_grid(32, 48, length=1.0)
    f = g.with_values((1 + 0.2 * np.cos(2 * np.pi * g.x))[:, None] * vfp.maxwellian(g))
    s0 = vfp.coupling(0.0)
    dt = vfp.vfp_cfl(f, s0)
    a = vfp.vfp_step(f, s0, dt).f
    b = entropic.grid_step_fp(f, cosine(0.0, 1.0), dt).f
    assert np.array_equal(a, b)


def test_uniform_state_is_stationary():
    g = entropic.make_grid(32, 48, length=1.0)
    f = g.with_values(vfp.maxwellian(g).copy())
    spec = vfp.coupling(0.3)
    out = vfp.vfp_step(f, spec, vfp.vfp_cfl(f, spec))
    assert np.abs(out.f - f.f).max() < 1e-14


def test_length_mismatch():
    g = entropic.make_grid(16, 16, length=2.0)
    with pytest.raises(HypolabError, match="dimension-mismatch"):
        vfp.potential_field(g.with_values(np.ones((16, 16))), vfp.coupling(0.1))


def test_schedule_and_lyapunov_errors():
    a1, s = vfp.schedule_a1(0.1, 0.5, 1.0)
    assert s.feasible and 0 < a1 < 1
    g = entropic.make_grid(16, 32, length=1.0)
    f = g.with_values(vfp.maxwellian(g).copy())
    with pytest.raises(HypolabError):
        vfp.nonlinear_lyapunov(f, vfp.coupling(0.1), -1.0, 1.0)


def test_short_run_monotone_and_sandwiched():
    g = entropic.make_grid(32, 48, length=1.0)
    spec = vfp.coupling(0.3)
    f0 = g.with_values((1 + 0.1 * np.cos(2 * np.pi * g.x))[:, None]
                       * np.exp(-0.5 * (g.v[None, :] - 0.3) ** 2))
    f0 = f0.with_values(f0.f / f0.mass)
    run = vfp.run_vfp(f0, spec, 2.0, every=20)
    assert run.increases == 0
    assert run.sandwich_ok
    assert len(run.rebrackets) >= 2
    assert run.l1_distance[-1] < run.l1_distance[0]
