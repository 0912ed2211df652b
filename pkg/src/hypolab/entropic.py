"""Density-form kinetic Fokker-Planck on a phase-space grid.

    d_t f + v d_x f - V'(x) d_v f = d_v (d_v f + v f)

on a torus in x and a truncated velocity interval with no-flux walls, plus
relative entropy, Fisher information and the distorted entropy functional.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import HypolabError

LOG_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class GridField:
    """Values f(x_i, v_j) (shape Nx x Nv) on a uniform torus-by-interval grid.

    v-nodes are cell centres of [-vmax, vmax]; every cell has weight dx dv.
    """

    x: np.ndarray
    v: np.ndarray
    f: np.ndarray
    length: float
    vmax: float
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        object.__setattr__(self, "f", f)
        if f.shape != (len(self.x), len(self.v)):
            raise HypolabError("dimension-mismatch", f"f has shape {f.shape}")

    @property
    def dx(self):
        return self.length / len(self.x)

    @property
    def dv(self):
        return 2 * self.vmax / len(self.v)

    @property
    def weight(self):
        return self.dx * self.dv

    @property
    def mass(self):
        return float(self.f.sum() * self.weight)

    def with_values(self, f, **info):
        return GridField(self.x, self.v, f, self.length, self.vmax, {**self.info, **info})

    def density(self):
        """rho(x) = int f dv."""
        return self.f.sum(axis=1) * self.dv

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "v", "f"])
            for i, xi in enumerate(self.x):
                for j, vj in enumerate(self.v):
                    w.writerow([repr(float(xi)), repr(float(vj)), repr(float(self.f[i, j]))])
        return path


def make_grid(Nx, Nv, length=2 * np.pi, vmax=6.0, values=None):
    if Nx < 2 or Nv < 2 or length <= 0 or vmax <= 0:
        raise HypolabError("invalid-parameter", "need Nx, Nv >= 2 and positive length, vmax")
    x = np.arange(Nx) * (length / Nx)
    dv = 2 * vmax / Nv
    v = -vmax + (np.arange(Nv) + 0.5) * dv
    f = np.zeros((Nx, Nv)) if values is None else values(x[:, None], v[None, :])
    return GridField(x, v, np.broadcast_to(f, (Nx, Nv)).copy(), length, vmax)


def _potential_values(grid, potential):
    if potential is None:
        z = np.zeros_like(grid.x)
        return z, z
    return potential.V(grid.x), potential.dV(grid.x)


def equilibrium(grid, potential=None, mass=1.0):
    """Grid equilibrium proportional to exp(-V(x) - v^2/2), with the given mass."""
    V, _ = _potential_values(grid, potential)
    e = np.exp(-(V - V.min()))[:, None] * np.exp(-0.5 * grid.v ** 2)[None, :]
    return e * (mass / (e.sum() * grid.weight))


# ---------------------------------------------------------------------------
# transport: conservative linear-interpolation shifts

def _push(f, shift, axis, periodic):
    """Move each cell's content by ``shift`` cells along ``axis`` (per line).

    ``shift`` has one entry per line orthogonal to ``axis``.  Content is split
    between the two nearest target cells (linear interpolation of the
    characteristic foot); on a bounded axis content leaving the interval is
    kept in the end cell, so the total is conserved exactly.
    """
    g = f if axis == 0 else f.T
    n, m = g.shape
    s = np.asarray(shift, dtype=float)
    whole = np.floor(s)
    frac = s - whole
    idx = np.arange(n)[:, None] + whole[None, :].astype(int)
    cols = np.arange(m)[None, :]
    out = np.zeros(n * m)
    for off, wgt in ((0, 1.0 - frac), (1, frac)):
        tgt = idx + off
        tgt = np.mod(tgt, n) if periodic else np.clip(tgt, 0, n - 1)
        out += np.bincount((tgt * m + cols).ravel(), (g * wgt[None, :]).ravel(), n * m)
    out = out.reshape(n, m)
    return out if axis == 0 else out.T


def _transport(f, grid, dV, tau):
    """Verlet split of the free flight and the force kick over time tau."""
    sx = grid.v * (0.5 * tau) / grid.dx
    sv = -dV * tau / grid.dv
    f = _push(f, sx, 0, True)
    f = _push(f, sv, 1, False)
    return _push(f, sx, 0, True)


# ---------------------------------------------------------------------------
# collision: Chang-Cooper / Scharfetter-Gummel fluxes, implicit Euler

def _bernoulli(z):
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = np.abs(z) > 1e-12
    out[nz] = z[nz] / np.expm1(z[nz])
    return out


def collision_matrix(v, dv):
    """Tridiagonal generator Q with d f / dt = Q f, no flux at the walls.

    The interface flux J = (B(w) f_j - B(-w) f_{j+1}) / dv with w = v_{j+1/2} dv
    vanishes on exp(-v_j^2/2), so the grid Maxwellian is exactly stationary.
    """
    n = len(v)
    vh = 0.5 * (v[1:] + v[:-1])
    w = vh * dv
    bp, bm = _bernoulli(w), _bernoulli(-w)
    Q = np.zeros((n, n))
    k = 1.0 / dv ** 2
    for j in range(n - 1):
        # flux through j+1/2 leaves cell j and enters j+1
        Q[j, j] -= k * bp[j]
        Q[j, j + 1] += k * bm[j]
        Q[j + 1, j] += k * bp[j]
        Q[j + 1, j + 1] -= k * bm[j]
    return Q


class _Collision:
    def __init__(self, v, dv, dt):
        Q = collision_matrix(v, dv)
        M = np.eye(len(v)) - dt * Q
        ab = np.zeros((3, len(v)))
        ab[0, 1:] = np.diag(M, 1)
        ab[1] = np.diag(M)
        ab[2, :-1] = np.diag(M, -1)
        self.ab = ab

    def __call__(self, f):
        return scipy.linalg.solve_banded((1, 1), self.ab, f.T).T


_CACHE = {}


def _collision(grid, dt):
    key = (len(grid.v), grid.vmax, dt)
    op = _CACHE.get(key)
    if op is None:
        if len(_CACHE) > 16:
            _CACHE.clear()
        op = _CACHE[key] = _Collision(grid.v, grid.dv, dt)
    return op


def cfl_limit(grid, force_max):
    lim = [grid.dx / grid.vmax, 0.5 * grid.dv ** 2]
    if force_max > 0:
        lim.append(grid.dv / force_max)
    return 0.4 * min(lim)


def split_step(f_grid, dV, dt, feq):
    """Strang step T(dt/2) C(dt) T(dt/2) with force samples dV (= -F) per x-node.

    Transport acts on the deviation f - feq so that feq (stationary for the
    continuous transport) is reproduced exactly; any negative values created
    by that correction are clipped and the mass is restored by rescaling.
    """
    grid = f_grid
    fmax = float(np.max(np.abs(dV))) if np.size(dV) else 0.0
    if dt <= 0:
        raise HypolabError("invalid-parameter", "dt must be positive")
    if dt > cfl_limit(grid, fmax) * (1 + 1e-12):
        raise HypolabError("cfl-violation", f"dt={dt:g} exceeds {cfl_limit(grid, fmax):g}")
    mass0 = grid.f.sum()
    if mass0 <= 0:
        raise HypolabError("invalid-parameter", "negative or zero mass")
    coll = _collision(grid, dt)
    f = feq + _transport(grid.f - feq, grid, dV, 0.5 * dt)
    f = coll(f)
    f = feq + _transport(f - feq, grid, dV, 0.5 * dt)
    clipped = 0.0
    if f.min() < 0:
        neg = f < 0
        clipped = float(-f[neg].sum())
        f[neg] = 0.0
        f *= mass0 / f.sum()
    return f, clipped


def grid_step_fp(f, potential, dt):
    """One step of the kinetic Fokker-Planck equation with confinement V."""
    _, dV = _potential_values(f, potential)
    feq = equilibrium(f, potential, f.mass)
    g, clipped = split_step(f, dV, dt, feq)
    return f.with_values(g, clipped=f.info.get("clipped", 0.0) + clipped)


# ---------------------------------------------------------------------------
# functionals

@dataclass(frozen=True)
class EntropyReport:
    H: float
    I: float
    I_x: float
    I_v: float
    distorted: float = None
    E_total: float = None
    S: tuple = None
    K_S: float = None

    def row(self):
        return {"H": self.H, "I": self.I, "I_x": self.I_x, "I_v": self.I_v,
                "distorted": self.distorted, "E": self.E_total}


def _log_ratio(f, feq):
    h = np.maximum(f / feq, LOG_FLOOR)
    return np.log(h)


def _grads(u, grid):
    gx = (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2 * grid.dx)
    gv = np.gradient(u, grid.dv, axis=1)
    return gx, gv


def entropy_and_fisher(f, potential=None, feq=None):
    """H = int h log h dmu and I = int |grad h|^2 / h dmu (h = f / feq).

    Both measures are normalized to unit mass first.  The Fisher integrand is
    evaluated as f |grad log h|^2 with centred differences.
    """
    mass = f.mass
    if mass <= 0:
        raise HypolabError("invalid-parameter", "zero mass")
    fn = f.f / mass
    if feq is None:
        feq = equilibrium(f, potential, 1.0)
    else:
        feq = feq / (feq.sum() * f.weight)
    u = _log_ratio(fn, feq)
    w = f.weight
    H = float(np.sum(fn * u) * w)
    gx, gv = _grads(u, f)
    Ix = float(np.sum(fn * gx * gx) * w)
    Iv = float(np.sum(fn * gv * gv) * w)
    return EntropyReport(H, Ix + Iv, Ix, Iv)


def ladder_matrix(ladder):
    a0, a1 = ladder.a[0], ladder.a[1]
    b0 = ladder.b[0]
    return np.array([[a0, b0], [b0, a1]])


def distorted_energy(f, potential, ladder, feq=None):
    """H + a0 int f|d_v u|^2 + 2 b0 int f d_v u d_x u + a1 int f|d_x u|^2, u = log h."""
    if len(ladder.a) < 2 or len(ladder.b) < 1:
        raise HypolabError("ladder-invalid", "need a = (a0, a1) and b = (b0,)")
    a0, a1, b0 = ladder.a[0], ladder.a[1], ladder.b[0]
    delta = ladder.delta if ladder.delta is not None else 1.0
    if min(a0, a1) <= 0 or b0 < 0 or b0 * b0 > delta * a0 * a1 * (1 + 1e-12):
        raise HypolabError("ladder-invalid", "need a0, a1 > 0 and b0^2 <= delta a0 a1")
    base = entropy_and_fisher(f, potential, feq)
    mass = f.mass
    fn = f.f / mass
    fe = equilibrium(f, potential, 1.0) if feq is None else feq / (feq.sum() * f.weight)
    u = _log_ratio(fn, fe)
    gx, gv = _grads(u, f)
    mixed = float(np.sum(fn * gv * gx) * f.weight)
    dist = a0 * base.I_v + 2 * b0 * mixed + a1 * base.I_x
    S = ladder_matrix(ladder)
    K = float(np.linalg.eigvalsh(S)[0])
    return EntropyReport(base.H, base.I, base.I_x, base.I_v, dist, base.H + dist,
                         (a0, b0, a1), K)


def l1_distance(f, feq):
    return float(np.abs(f.f - feq).sum() * f.weight)


# ---------------------------------------------------------------------------
# experiment driver

@dataclass(frozen=True, eq=False)
class EntropyRun:
    times: np.ndarray
    H: np.ndarray
    I: np.ndarray
    E: np.ndarray
    I_x: np.ndarray
    I_v: np.ndarray
    h_violation: float
    violations: int
    mass_drift: float
    final: GridField

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "H", "I", "I_x", "I_v", "E"])
            for row in zip(self.times, self.H, self.I, self.I_x, self.I_v, self.E):
                w.writerow([repr(float(c)) for c in row])
        return path


def run_entropy(f0, potential, ladder, t_end, dt=None, every=1, tol=1e-10):
    """Step f0 to t_end, recording H (every step) and the full report every ``every`` steps."""
    _, dV = _potential_values(f0, potential)
    lim = cfl_limit(f0, float(np.max(np.abs(dV))))
    if dt is None:
        dt = lim
    nsteps = int(np.ceil(t_end / dt - 1e-9))
    dt = t_end / nsteps
    feq = equilibrium(f0, potential, f0.mass)
    f = f0
    times, H, I, E, Ix, Iv = [], [], [], [], [], []
    last_h = entropy_and_fisher(f, potential, feq).H
    worst, count = 0.0, 0
    m0 = f0.mass

    def record(t, f):
        r = distorted_energy(f, potential, ladder, feq)
        times.append(t)
        H.append(r.H)
        I.append(r.I)
        E.append(r.E_total)
        Ix.append(r.I_x)
        Iv.append(r.I_v)

    record(0.0, f)
    for n in range(1, nsteps + 1):
        g, _ = split_step(f, dV, dt, feq)
        f = f.with_values(g)
        h = entropy_and_fisher(f, potential, feq).H
        up = h - last_h
        if up > tol:
            count += 1
        worst = max(worst, up)
        last_h = h
        if n % every == 0 or n == nsteps:
            record(n * dt, f)
    drift = abs(f.mass - m0) / m0
    return EntropyRun(np.array(times), np.array(H), np.array(I), np.array(E),
                      np.array(Ix), np.array(Iv), max(worst, 0.0), count, drift, f)
