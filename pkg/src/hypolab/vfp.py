"""Weakly self-consistent Vlasov-Fokker-Planck on a one-dimensional torus.

    d_t f + v d_x f + F[f] d_v f = d_v (d_v f + v f),   F[f] = -(W' * rho)

The torus has Lebesgue measure dx on [0, length); with the default
length 1 the uniform state is f = M(v).  Grid, transport and collision
come from the entropic module.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import entropic
from .certify import ladder_nonlinear
from .errors import HypolabError


def smallness_value(delta):
    return delta + 0.5 * delta ** 2 * np.exp(delta)


@dataclass(frozen=True)
class CouplingSpec:
    """W(x) = sum_k w_k cos(2 pi k x / length), k >= 1 (even, mean zero)."""

    coeffs: tuple
    length: float = 1.0

    def __post_init__(self):
        if self.length <= 0:
            raise HypolabError("invalid-parameter", "torus length must be positive")

    def W(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, w in enumerate(self.coeffs, start=1):
            out = out + w * np.cos(2 * np.pi * k * x / self.length)
        return out

    def dW(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, w in enumerate(self.coeffs, start=1):
            q = 2 * np.pi * k / self.length
            out = out - w * q * np.sin(q * x)
        return out

    @property
    def delta(self):
        """max |W| on a fine grid."""
        xs = np.linspace(0.0, self.length, 4097)
        return float(np.abs(self.W(xs)).max())

    @property
    def small(self):
        return smallness_value(self.delta) < 0.5


def coupling(amplitude, length=1.0):
    """Single-mode coupling with max|W| = |amplitude|."""
    return CouplingSpec((float(amplitude),), length)


def _kernel_hat(spec, n, length):
    """Fourier multipliers of convolution with W and W' on an n-point grid."""
    xs = np.arange(n) * (length / n)
    what = np.fft.fft(spec.W(xs)) * (length / n)
    q = 2j * np.pi * np.fft.fftfreq(n, length / n)
    return what, q * what


def potential_field(grid, spec):
    """Phi = W * rho and Phi' = W' * rho on the x-nodes (periodic convolution)."""
    if abs(grid.length - spec.length) > 1e-12 * spec.length:
        raise HypolabError("dimension-mismatch", "grid and coupling lengths differ")
    rho = grid.density()
    what, dwhat = _kernel_hat(spec, len(grid.x), grid.length)
    rh = np.fft.fft(rho)
    phi = np.fft.ifft(what * rh).real
    dphi = np.fft.ifft(dwhat * rh).real
    return phi, dphi


def self_consistent_force(grid, spec):
    """F = -(W' * rho) sampled at the x-nodes."""
    return -potential_field(grid, spec)[1]


def mean_field_equilibrium(grid, phi, mass):
    """exp(-phi(x) - v^2/2) normalized to ``mass``: stationary for the frozen-force step."""
    e = np.exp(-(phi - phi.min()))[:, None] * np.exp(-0.5 * grid.v ** 2)[None, :]
    return e * (mass / (e.sum() * grid.weight))


def vfp_cfl(grid, spec):
    return entropic.cfl_limit(grid, float(np.abs(self_consistent_force(grid, spec)).max()))


def vfp_step(grid, spec, dt):
    """One Strang step with the force frozen at F[f(t)]."""
    phi, dphi = potential_field(grid, spec)
    feq = mean_field_equilibrium(grid, phi, grid.mass)
    g, clipped = entropic.split_step(grid, dphi, dt, feq)
    return grid.with_values(g, clipped=grid.info.get("clipped", 0.0) + clipped)


def maxwellian(grid):
    """Grid Maxwellian with unit mass per unit length (the uniform equilibrium)."""
    m = np.exp(-0.5 * grid.v ** 2)
    m = m / (m.sum() * grid.dv)
    return np.broadcast_to(m, grid.f.shape) / grid.length


@dataclass(frozen=True)
class FreeEnergy:
    E: float
    entropy: float
    kinetic: float
    interaction: float
    local: float
    hydro: float
    E_inf: float

    @property
    def excess(self):
        return self.E - self.E_inf


def _xlogx(a):
    a = np.asarray(a, dtype=float)
    return np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)


def free_energy(grid, spec):
    """Entropy + kinetic energy + pair interaction, with the split through rho M.

    ``local`` = int f log(f / rho M) and ``hydro`` = int rho log rho + interaction,
    both with the grid Maxwellian; E_inf is the value at the uniform state.
    """
    mass = grid.mass
    if mass <= 0:
        raise HypolabError("invalid-parameter", "zero mass")
    w = grid.weight
    f = grid.f
    ent = float(_xlogx(f).sum() * w)
    kin = float((f * 0.5 * grid.v[None, :] ** 2).sum() * w)
    phi, _ = potential_field(grid, spec)
    rho = grid.density()
    inter = float(0.5 * np.sum(rho * phi) * grid.dx)
    M = maxwellian(grid) * grid.length
    pim = rho[:, None] * M
    with np.errstate(divide="ignore", invalid="ignore"):
        loc = float(np.sum(np.where(f > 0, f * np.log(f / pim), 0.0)) * w)
    hyd = float(np.sum(_xlogx(rho)) * grid.dx) + inter
    feq = maxwellian(grid) * mass
    e_inf = float(_xlogx(feq).sum() * w + (feq * 0.5 * grid.v[None, :] ** 2).sum() * w)
    # uniform rho: the interaction term vanishes because W has mean zero
    return FreeEnergy(ent + kin + inter, ent, kin, inter, loc, hyd, e_inf)


def transport_term(grid, spec):
    """B f = v d_x f + F[f] d_v f (spectral in x, centred differences in v)."""
    F = self_consistent_force(grid, spec)
    q = 2j * np.pi * np.fft.fftfreq(len(grid.x), grid.dx)
    fx = np.fft.ifft(q[:, None] * np.fft.fft(grid.f, axis=0), axis=0).real
    fv = np.gradient(grid.f, grid.dv, axis=1)
    return grid.v[None, :] * fx + F[:, None] * fv


def projection(grid):
    """Pi f = rho M with the grid Maxwellian."""
    M = maxwellian(grid) * grid.length
    return grid.density()[:, None] * M


def correction_term(grid, spec):
    """<(Id - Pi) f, (Id - Pi)'_f (B f)> in the flat grid product."""
    M = maxwellian(grid) * grid.length
    g = grid.f - projection(grid)
    b = transport_term(grid, spec)
    pb = b - (b.sum(axis=1) * grid.dv)[:, None] * M
    return float(np.sum(g * pb) * grid.weight)


@dataclass(frozen=True)
class LyapunovReport:
    L: float
    excess: float
    a1: float
    bracket: float
    in_bracket: bool
    lower_margin: float
    upper_margin: float
    sandwich: bool


def nonlinear_lyapunov(grid, spec, a1, bracket):
    """L(f) = [E(f) - E(f_inf)] + a1 <(Id - Pi) f, (Id - Pi)' B f>.

    The sandwich E/4 <= L <= 5E/4 is checked for the bracket value E;
    ``in_bracket`` tells whether E/2 <= E(f) - E(f_inf) <= E holds.
    """
    if a1 < 0 or bracket <= 0:
        raise HypolabError("invalid-parameter", "need a1 >= 0 and a positive bracket")
    fe = free_energy(grid, spec)
    ex = fe.excess
    L = ex + (a1 * correction_term(grid, spec) if a1 > 0 else 0.0)
    lo = L - bracket / 4
    hi = 1.25 * bracket - L
    inside = bracket / 2 * (1 - 1e-12) <= ex <= bracket * (1 + 1e-12)
    return LyapunovReport(L, ex, a1, bracket, inside, lo, hi, lo >= 0 and hi >= 0)


def schedule_a1(bracket, K, Ebar, k=1.0, eps=0.1):
    """a_1 from the J = 2 nonlinear schedule for the current bracket."""
    s = ladder_nonlinear(K, Ebar, k, 2, eps, E=min(bracket, Ebar))
    if not s.feasible:
        raise HypolabError("ladder-invalid", f"schedule infeasible for bracket {bracket:g}")
    return float(s.a[1]), s


# ---------------------------------------------------------------------------
# experiment

@dataclass(frozen=True, eq=False)
class VFPRun:
    times: np.ndarray
    free_energy: np.ndarray
    lyapunov: np.ndarray
    l1_distance: np.ndarray
    bracket_E: np.ndarray
    a1: np.ndarray
    rebrackets: list
    max_increase: float
    increases: int
    final: object
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "free_energy", "lyapunov", "l1_distance", "bracket_E", "a1"])
            for row in zip(self.times, self.free_energy, self.lyapunov, self.l1_distance,
                           self.bracket_E, self.a1):
                w.writerow([repr(float(c)) for c in row])
        return path

    @property
    def sandwich_ok(self):
        return all(r["before"].sandwich and r["after"].sandwich for r in self.rebrackets)


def run_vfp(f0, spec, t_end, dt=None, K=0.5, k=1.0, eps=0.1, every=10, tol=1e-9):
    """Evolve f0 and track free energy, L(f) and the L1 distance to M.

    The bracket E starts at E(f0) - E(f_inf) and is reset to the current
    excess whenever the excess falls below half of it; a_1 is recomputed
    from the schedule at each reset and L is evaluated with the old and the
    new coefficient at that instant.
    """
    if dt is None:
        dt = 0.9 * vfp_cfl(f0, spec)
    nsteps = int(np.ceil(t_end / dt - 1e-9))
    dt = t_end / nsteps
    M = maxwellian(f0) * f0.mass
    f = f0
    fe0 = free_energy(f, spec)
    Ebar = max(fe0.excess, 1e-300)
    bracket = Ebar
    a1, _ = schedule_a1(bracket, K, Ebar, k, eps)
    rows = {n: [] for n in ("t", "E", "L", "l1", "br", "a1")}
    reb = []
    last = fe0.E
    worst, count = 0.0, 0

    def record(t, f, fe):
        rep = nonlinear_lyapunov(f, spec, a1, bracket)
        rows["t"].append(t)
        rows["E"].append(fe.E)
        rows["L"].append(rep.L)
        rows["l1"].append(float(np.abs(f.f - M).sum() * f.weight))
        rows["br"].append(bracket)
        rows["a1"].append(a1)
        return rep

    first = record(0.0, f, fe0)
    reb.append({"t": 0.0, "before": first, "after": first, "jump": 1.0})
    for n in range(1, nsteps + 1):
        if dt > vfp_cfl(f, spec) * (1 + 1e-12):
            raise HypolabError("cfl-violation", f"dt={dt:g} too large at step {n}")
        f = vfp_step(f, spec, dt)
        fe = free_energy(f, spec)
        up = fe.E - last
        worst = max(worst, up)
        count += up > tol
        last = fe.E
        if 0 < fe.excess < bracket / 2:
            before = nonlinear_lyapunov(f, spec, a1, fe.excess)
            bracket = fe.excess
            a1, _ = schedule_a1(bracket, K, Ebar, k, eps)
            after = nonlinear_lyapunov(f, spec, a1, bracket)
            jump = after.L / before.L if before.L > 0 else 1.0
            reb.append({"t": n * dt, "before": before, "after": after, "jump": jump})
        if n % every == 0 or n == nsteps:
            record(n * dt, f, fe)
    return VFPRun(np.array(rows["t"]), np.array(rows["E"]), np.array(rows["L"]),
                  np.array(rows["l1"]), np.array(rows["br"]), np.array(rows["a1"]), reb,
                  max(worst, 0.0), int(count), f,
                  {"dt": dt, "K": K, "k": k, "eps": eps, "inner_product": "flat grid L2"})
