import numpy as np
import pytest

from hypolab import entropic
from hypolab.certify import CoeffLadder, ladder_from_sequence, ladder_geometric
from hypolab.errors import HypolabError
from hypolab.models import cosine


def grid(Nx=32, Nv=48):
    return entropic.make_grid(Nx, Nv)


def test_equilibrium_is_stationary():
    g = grid()
    pot = cosine(1.0)
    f = g.with_values(entropic.equilibrium(g, pot))
    dt = entropic.cfl_limit(g, 1.0)
    out = entropic.grid_step_fp(f, pot, dt)
    assert np.abs(out.f - f.f).max() < 1e-14
    rep = entropic.entropy_and_fisher(f, pot)
    assert abs(rep.H) < 1e-14 and rep.I < 1e-20


def test_mass_and_positivity_preserved():
    g = grid()
    pot = cosine(0.8)
    f = g.with_values((1 + 0.9 * np.cos(g.x))[:, None] * np.exp(-0.5 * (g.v[None, :] - 1.0) ** 2))
    m0 = f.mass
    dt = entropic.cfl_limit(g, 0.8)
    for _ in range(50):
        f = entropic.grid_step_fp(f, pot, dt)
    assert abs(f.mass - m0) / m0 < 1e-12
    assert f.f.min() >= 0


def test_cfl_violation_raises():
    g = grid()
    f = g.with_values(entropic.equilibrium(g))
    with pytest.raises(HypolabError, match="cfl-violation"):
        entropic.grid_step_fp(f, None, 10 * entropic.cfl_limit(g, 0.0))


def test_velocity_variance_relaxes():
    # with no force the v-variance obeys s(t) = 1 + (s0 - 1) e^{-2t}
    g = entropic.make_grid(4, 400, vmax=10.0)
    f = g.with_values(np.broadcast_to(np.exp(-g.v ** 2 / 4), (4, 400)))
    t_end = 0.5
    n = int(np.ceil(t_end / entropic.cfl_limit(g, 0.0)))
    dt = t_end / n
    for _ in range(n):
        f = entropic.grid_step_fp(f, None, dt)
    var = float((f.f * g.v ** 2).sum() / f.f.sum())
    assert var == pytest.approx(1 + np.exp(-1.0), rel=2e-3)


def test_distorted_energy_requires_valid_ladder():
    g = grid()
    f = g.with_values(entropic.equilibrium(g))
    with pytest.raises(HypolabError, match="ladder-invalid"):
        entropic.distorted_energy(f, None, CoeffLadder((0.1, 0.01), (0.5,), 0.5))
    lad = ladder_from_sequence(ladder_geometric(0.5, 3), 0.5)
    rep = entropic.distorted_energy(f, None, lad)
    assert rep.K_S > 0 and abs(rep.E_total) < 1e-14


def test_short_entropy_run_dissipates():
    g = grid(32, 48)
    pot = cosine(1.0)
    f0 = g.with_values((1 + 0.5 * np.cos(g.x))[:, None] * np.exp(-0.5 * (g.v[None, :] - 0.5) ** 2))
    lad = ladder_from_sequence(ladder_geometric(0.5, 3), 0.5)
    run = entropic.run_entropy(f0, pot, lad, 1.0, every=5)
    assert run.violations == 0
    assert run.H[-1] < run.H[0]
    assert run.E[-1] < run.E[0]
    assert run.mass_drift < 1e-12


def test_grid_rejects_bad_input():
    with pytest.raises(HypolabError):
        entropic.make_grid(1, 8)
    g = grid()
    with pytest.raises(HypolabError):
        entropic.GridField(g.x, g.v, np.zeros((3, 3)), g.length, g.vmax)
