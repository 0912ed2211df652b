"""Semigroup propagation, tracked functionals and rate fits.

Also hosts the time-weighted regularization functional, the verdict for
systems of differential inequalities, the Nash-type interpolation check
and an exact plane-wave propagator for the quadratic kinetic model.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import HypolabError
from .spectral import LinOp, StateVector, kernel_vectors, twisted_coefficients

EIG_RESIDUAL = 1e-8
MONO_TOL = 1e-10


# ---------------------------------------------------------------------------
# trajectories

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled functionals along a flow; squared quantities throughout.

    ``kernel_mass`` is the norm of the kernel component removed from h0
    before propagation.  ``states`` is kept only when requested.
    """

    times: np.ndarray
    tracked: dict
    scheme: str = "eig"
    kernel_mass: float = 0.0
    states: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        for name, vals in self.tracked.items():
            if len(vals) != n:
                raise HypolabError("dimension-mismatch", f"{name}: {len(vals)} values for {n} times")

    def __getitem__(self, name):
        try:
            return self.tracked[name]
        except KeyError:
            raise HypolabError("invalid-parameter", f"functional {name!r} not tracked") from None

    @property
    def names(self):
        return list(self.tracked)

    def to_csv(self, path, names=None):
        names = names or self.names
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + list(names))
            for i, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(self.tracked[k][i])) for k in names])
        return path


def read_csv(path):
    """Inverse of Trajectory.to_csv."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], np.array(rows[1:], dtype=float)
    return Trajectory(body[:, 0], {k: body[:, i + 1] for i, k in enumerate(head[1:])})


def chain_functionals(chain, ladder=None, extras=None):
    """name -> callable(h) for l2, ah, ch, mixed, h1 and twisted.

    ``chain`` is a CommutatorChain (or a plain list of LinOps C_0..C_N).
    ``extras`` maps further names to LinOps whose squared norm is tracked.
    """
    C = chain.C if hasattr(chain, "C") else list(chain)
    mats = [c.dense() for c in C]
    out = {"l2": lambda h: float(np.vdot(h, h).real)}
    if mats:
        out["ah"] = lambda h: float(np.linalg.norm(mats[0] @ h) ** 2)
    if len(mats) > 1:
        out["ch"] = lambda h: float(np.linalg.norm(mats[1] @ h) ** 2)
        out["mixed"] = lambda h: float(np.vdot(mats[0] @ h, mats[1] @ h).real)

    def h1(h):
        return float(np.vdot(h, h).real + sum(np.linalg.norm(m @ h) ** 2 for m in mats))

    out["h1"] = h1
    if ladder is not None:
        tw = twisted_coefficients(ladder, len(mats))

        def twisted(h):
            vecs = [h] + [m @ h for m in mats]
            g = np.array([[np.vdot(p, q) for q in vecs] for p in vecs])
            return float(np.real(np.sum(tw * g)))

        out["twisted"] = twisted
    for name, op in (extras or {}).items():
        m = op.dense()
        out[name] = lambda h, m=m: float(np.linalg.norm(m @ h) ** 2)
    return out


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise HypolabError("invalid-parameter", "times must increase strictly from 0")
    return times


def _eig_states(L, h0, times):
    w, V = np.linalg.eig(L)
    scale = max(1.0, np.linalg.norm(L))
    try:
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError:
        return None
    res = np.linalg.norm(L - (V * w) @ Vinv) / scale
    if not np.isfinite(res) or res > EIG_RESIDUAL:
        return None
    c = Vinv @ h0
    return (V @ (np.exp(-np.outer(w, times)) * c[:, None])).T


def _cn_states(L, h0, times, dt):
    if dt is None or dt <= 0:
        raise HypolabError("invalid-parameter", "crank-nicolson needs dt > 0")
    steps = times / dt
    k = np.rint(steps).astype(int)
    if np.any(np.abs(steps - k) > 1e-9 * np.maximum(1.0, steps)):
        raise HypolabError("invalid-parameter", "times must lie on the dt grid")
    n = L.shape[0]
    ident = np.eye(n)
    lu = scipy.linalg.lu_factor(ident + 0.5 * dt * L)
    right = ident - 0.5 * dt * L
    out = np.empty((len(times), n), dtype=complex)
    h = h0.astype(complex)
    done = 0
    for i, target in enumerate(k):
        while done < target:
            h = scipy.linalg.lu_solve(lu, right @ h)
            done += 1
        out[i] = h
    return out


def propagate(L, h0, times, scheme="eig", dt=None, kernel=None, functionals=None,
              keep_states=False):
    """Sample e^{-tL} h0 at ``times`` and evaluate tracked functionals.

    The kernel component of h0 (``kernel``: orthonormal columns, default
    computed from L) is removed first.  The eig scheme diagonalizes L once
    and falls back to Crank-Nicolson (``dt``, default the smallest time
    step) when the eigenvector residual exceeds 1e-8.
    """
    times = _check_times(times)
    M = L.dense() if isinstance(L, LinOp) else np.asarray(L)
    h = h0.coeffs if isinstance(h0, StateVector) else np.asarray(h0)
    if h.shape != (M.shape[0],):
        raise HypolabError("dimension-mismatch", f"h0 has shape {h.shape}, L is {M.shape}")
    if M.shape[0] > 4000 and scheme == "eig":
        raise HypolabError("unsupported", "eig scheme limited to dimension 4000")
    if kernel is None:
        kernel = kernel_vectors(L if isinstance(L, LinOp) else LinOp(M, None))
    h = h.astype(complex)
    proj = kernel.conj().T @ h if kernel.size else np.zeros(0)
    if kernel.size:
        h = h - kernel @ proj
    used = scheme
    states = None
    if scheme == "eig":
        states = _eig_states(M, h, times)
        if states is None:
            used = "crank-nicolson"
            if dt is None:
                dt = float(np.min(np.diff(times))) if len(times) > 1 else 1e-3
    elif scheme != "crank-nicolson":
        raise HypolabError("invalid-parameter", f"unknown scheme {scheme!r}")
    if states is None:
        states = _cn_states(M, h, times, dt)
    if functionals is None:
        functionals = {"l2": lambda v: float(np.vdot(v, v).real)}
    tracked = {name: np.array([f(s) for s in states]) for name, f in functionals.items()}
    return Trajectory(times, tracked, used, float(np.linalg.norm(proj)),
                      states if keep_states else None)


def nonexpansive(traj, name="l2", tol=MONO_TOL):
    """Largest per-step increase of a functional (0 when nonincreasing)."""
    d = np.diff(traj[name])
    return float(max(0.0, d.max())) if len(d) else 0.0, bool(np.all(d <= tol))


# ---------------------------------------------------------------------------
# fits

@dataclass(frozen=True)
class DecayFit:
    kind: str
    rate: float
    prefactor: float
    window: tuple
    r2: float
    squared: bool = False

    @property
    def reliable(self):
        return self.r2 >= 0.98

    @property
    def exponent(self):
        return self.rate


def _linfit(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss if ss > 0 else 1.0
    return coef[0], coef[1], r2


def fit_rate(traj, functional, kind="exponential", window=None, squared=False):
    """Least-squares fit of log values against t or log t.

    exponential: value ~ C e^{-rate t}; powerlaw: value ~ C t^{exponent}
    (``rate`` then holds the exponent).  With ``squared`` the functional is
    taken to be a squared norm and the result is reported for the norm.
    """
    if isinstance(traj, Trajectory):
        t, y = traj.times, traj[functional]
    else:
        t, y = (np.asarray(a, dtype=float) for a in traj)
    if window is None:
        raise HypolabError("invalid-parameter", "fit window must be given")
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 2:
        raise HypolabError("invalid-parameter", f"fewer than two samples in window {window}")
    ys = y[sel]
    if np.any(ys <= 0):
        raise HypolabError("invalid-parameter", "nonpositive values in fit window")
    ly = np.log(ys)
    div = 2.0 if squared else 1.0
    if kind == "exponential":
        slope, icpt, r2 = _linfit(t[sel], ly)
        return DecayFit(kind, -slope / div, float(np.exp(icpt / div)), (lo, hi), r2, squared)
    if kind == "powerlaw":
        if lo <= 0:
            raise HypolabError("invalid-parameter", "power-law window must start after 0")
        slope, icpt, r2 = _linfit(np.log(t[sel]), ly)
        return DecayFit(kind, slope / div, float(np.exp(icpt / div)), (lo, hi), r2, squared)
    raise HypolabError("invalid-parameter", f"unknown fit kind {kind!r}")


# ---------------------------------------------------------------------------
# time-weighted functional

@dataclass(frozen=True)
class HerauReport:
    F: np.ndarray
    max_violation: float
    violations: int
    monotone: bool
    bound_ah: np.ndarray
    bound_ch: np.ndarray
    bounds_hold: bool
    smallness: dict


def herau_smallness(a, b, c):
    return {"a": a, "b/a": b / a, "c/b": c / b, "c^2/b": c * c / b, "b^2/(ac)": b * b / (a * c)}


def herau_check(traj, a, b, c, tol=MONO_TOL, names=("l2", "ah", "ch", "mixed")):
    """F(t) = |h|^2 + a t |Ah|^2 + 2 b t^2 Re<Ah,Ch> + c t^3 |Ch|^2 along ``traj``.

    Coefficients must be positive with every smallness ratio at most 1
    (b^2 <= ac keeps F nonnegative); otherwise invalid-parameter is raised
    with the offending ratios.
    """
    if min(a, b, c) <= 0:
        raise HypolabError("invalid-parameter", "a, b, c must be positive")
    small = herau_smallness(a, b, c)
    bad = {k: v for k, v in small.items() if v > 1.0 + 1e-12}
    if bad:
        raise HypolabError("invalid-parameter", f"smallness ratios exceed 1: {bad}")
    t = traj.times
    l2, ah, ch, mx = (traj[n] for n in names)
    F = l2 + a * t * ah + 2 * b * t ** 2 * mx + c * t ** 3 * ch
    d = np.diff(F)
    worst = float(max(0.0, d.max())) if len(d) else 0.0
    count = int(np.sum(d > tol))
    with np.errstate(divide="ignore"):
        bah = np.where(t > 0, F[0] / (a * t), np.inf)
        bch = np.where(t > 0, F[0] / (c * t ** 3), np.inf)
    hold = bool(np.all(ah <= bah * (1 + 1e-12) + tol) and np.all(ch <= bch * (1 + 1e-12) + tol))
    return HerauReport(F, worst, count, count == 0, bah, bch, hold, small)


# ---------------------------------------------------------------------------
# differential inequalities

@dataclass(frozen=True, eq=False)
class DiffIneqInstance:
    C: float
    K: float
    delta: float
    theta: float
    times: np.ndarray
    E: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    M: np.ndarray

    def scaled(self, s):
        return DiffIneqInstance(self.C, self.K, self.delta, self.theta, self.times,
                                s * self.E, s * self.X, s * self.Y, s * self.Z, s * self.M)


@dataclass(frozen=True)
class DiffIneqVerdict:
    conditions: dict
    margins: dict
    kappa: float
    exponent: float
    Cbar: float
    hypotheses_hold: bool
    verdict: bool


def _forward_diff(t, f):
    """Forward differences with a local slack 10 dt max|f''| (neighbouring points)."""
    dt = np.diff(t)
    d = np.diff(f) / dt
    second = np.zeros_like(d)
    if len(d) > 1:
        dd = np.abs(np.diff(d)) / (0.5 * (dt[1:] + dt[:-1]))
        second[:-1] = dd
        second[1:] = np.maximum(second[1:], dd)
    return d, 10 * dt * second


def diffineq_check(inst):
    """Check the five hypotheses pointwise and compute the conclusion constant.

    Derivatives are forward differences evaluated at the left node; the
    derivative lines carry the local slack from ``_forward_diff``.  Cbar is
    the smallest constant with E(t_i) <= Cbar t_i^(-1/kappa) on the grid.
    """
    t = np.asarray(inst.times, dtype=float)
    if len(t) < 2 or t[0] <= 0 or t[-1] > 1 or np.any(np.diff(t) <= 0):
        raise HypolabError("invalid-parameter", "time grid must increase inside (0, 1]")
    if not (0 < inst.delta < 1 and 0 < inst.theta < 1) or inst.C <= 0 or inst.K <= 0:
        raise HypolabError("invalid-parameter", "need C, K > 0 and delta, theta in (0, 1)")
    E, X, Y, Z, M = (np.asarray(v, dtype=float) for v in (inst.E, inst.X, inst.Y, inst.Z, inst.M))
    C, K = inst.C, inst.K
    scale = max(1.0, float(np.max(np.abs(E))))
    tol = 1e-12 * scale
    m = {}
    m["nonneg"] = float(min(E.min(), X.min(), Y.min(), Z.min()))
    m["syst1"] = float(min(np.min(E - K * (X + Y)), np.min(C * (X + Y) - E)))
    m["syst2"] = float(np.min(C * np.maximum(E, 0) ** (1 - inst.delta) - np.abs(M)))
    dE, sE = _forward_diff(t, E)
    m["syst3"] = float(np.min(-K * Z[:-1] + C * E[:-1] + sE - dE))
    m["syst4"] = float(np.min(C * np.maximum(X + Z, 0) ** (1 - inst.theta) - Y))
    dM, sM = _forward_diff(t, M)
    m["syst5"] = float(np.min(-K * X[:-1] + C * (Y[:-1] + Z[:-1]) + sM - dM))
    cond = {k: v >= -tol for k, v in m.items()}
    kappa = min(inst.delta, inst.theta / (1 - inst.theta))
    expo = -1.0 / kappa
    Cbar = float(np.max(E * t ** (1.0 / kappa)))
    ok = all(cond.values())
    return DiffIneqVerdict(cond, m, kappa, expo, Cbar, ok, ok and np.isfinite(Cbar))


def fit_system_constants(times, E, X, Y, Z, M, delta, theta, K=None):
    """Constants (C, K) making the five lines hold on sampled data.

    K defaults to the largest admissible value from the lower half of
    (syst1); C is the smallest value satisfying every line at that K.
    """
    t = np.asarray(times, dtype=float)
    E, X, Y, Z, M = (np.asarray(v, dtype=float) for v in (E, X, Y, Z, M))
    tiny = 1e-300
    if K is None:
        K = float(np.min(E / np.maximum(X + Y, tiny))) * (1 - 1e-9)
    need = [np.max(E / np.maximum(X + Y, tiny)),
            np.max(np.abs(M) / np.maximum(E, tiny) ** (1 - delta)),
            np.max(Y / np.maximum(X + Z, tiny) ** (1 - theta))]
    dE, sE = _forward_diff(t, E)
    need.append(np.max((dE - sE + K * Z[:-1]) / np.maximum(E[:-1], tiny)))
    dM, sM = _forward_diff(t, M)
    need.append(np.max((dM - sM + K * X[:-1]) / np.maximum(Y[:-1] + Z[:-1], tiny)))
    C = float(max(max(need), 1e-12)) * (1 + 1e-9)
    return C, K


# ---------------------------------------------------------------------------
# Nash-type interpolation

@dataclass(frozen=True)
class NashRecord:
    lhs: float
    rhs_core: float
    theta: float
    mass: float

    @property
    def ratio(self):
        return self.lhs / self.rhs_core if self.rhs_core > 0 else 0.0


def nash_theta(lam, mu, lam_p, mu_p, n=1):
    if lam_p <= 0 or mu_p <= 0 or lam < 0 or mu < 0:
        raise HypolabError("invalid-parameter", "need lambda', mu' > 0 and lambda, mu >= 0")
    s = lam / lam_p + mu / mu_p
    if s >= 1:
        raise HypolabError("invalid-parameter", "lambda/lambda' + mu/mu' must be < 1")
    return (1 - s) / (1 + 0.5 * n * (1 / lam_p + 1 / mu_p))


def nash_check(f, dx, dv, lam, mu, lam_p, mu_p):
    """Both sides of the interpolation inequality for f sampled on a periodic grid.

    ``f`` has shape (Nx, Nv) with power-of-two sizes; D = (-Laplacian)^(1/2)
    is applied through the discrete Fourier symbols |xi|, |eta|.
    """
    f = np.asarray(f, dtype=float)
    theta = nash_theta(lam, mu, lam_p, mu_p, n=1)
    nx, nv = f.shape
    for s in (nx, nv):
        if s < 2 or s & (s - 1):
            raise HypolabError("invalid-parameter", "grid sizes must be powers of two")
    if f.min() < -1e-12:
        raise HypolabError("invalid-parameter", "f has negative values")
    F2 = np.abs(np.fft.fft2(f)) ** 2 * (dx * dv) / (nx * nv)
    xi = np.abs(2 * np.pi * np.fft.fftfreq(nx, dx))[:, None]
    eta = np.abs(2 * np.pi * np.fft.fftfreq(nv, dv))[None, :]

    def sym(base, p):
        return np.ones_like(base) if p == 0 else base ** (2 * p)

    lhs = float(np.sum(sym(xi, lam) * sym(eta, mu) * F2))
    top = float(np.sum(sym(xi, lam_p) * F2) + np.sum(sym(eta, mu_p) * F2))
    mass = float(f.sum() * dx * dv)
    rhs = top ** (1 - theta) * mass ** (2 * theta) if top > 0 else 0.0
    return NashRecord(lhs, rhs, theta, mass)


# ---------------------------------------------------------------------------
# exact flow of the quadratic model on Gaussian plane waves

class PlaneWaveFlow:
    """e^{-tL} on h = sum_j c_j exp(i k_j . (x, v)) for L = -D_v^2 + v D_v + v D_x - w x D_v.

    In L^2 of the Gaussian equilibrium (x-variance 1/w, v-variance 1) the
    backward equation is linear in the characteristic variables:
    k(t) = exp(t D^T) k and c(t) = c exp(-k^T S_t k / 2) with D = [[0, -1], [w, -1]]
    and S_t the covariance accumulated from the velocity noise.
    """

    symbols = {
        "dv": lambda k: 1j * k[:, 1],
        "dx": lambda k: 1j * k[:, 0],
        "dv2": lambda k: -k[:, 1] ** 2,
        "dv3": lambda k: -1j * k[:, 1] ** 3,
        "dv4": lambda k: k[:, 1] ** 4,
        "dxdv": lambda k: -k[:, 0] * k[:, 1],
        "id": lambda k: np.ones(len(k), dtype=complex),
    }

    def __init__(self, omega=1.0):
        if omega <= 0:
            raise HypolabError("invalid-parameter", "omega must be positive")
        self.omega = float(omega)
        self.D = np.array([[0.0, -1.0], [self.omega, -1.0]])
        self.Q = np.diag([0.0, 2.0])
        self.metric = np.array([1.0 / self.omega, 1.0])

    def at(self, waves, coeffs, t):
        """Wavevectors and amplitudes at time t."""
        k = np.atleast_2d(np.asarray(waves, dtype=float))
        big = np.zeros((4, 4))
        big[:2, :2] = self.D * t
        big[:2, 2:] = self.Q * t
        big[2:, 2:] = -self.D.T * t
        ex = scipy.linalg.expm(big)
        flow = ex[:2, :2]
        cov = ex[:2, 2:] @ flow.T
        cov = 0.5 * (cov + cov.T)
        kt = k @ flow
        damp = np.exp(-0.5 * np.einsum("ij,jk,ik->i", k, cov, k))
        return kt, np.asarray(coeffs, dtype=complex) * damp

    def gram(self, k):
        diff = k[:, None, :] - k[None, :, :]
        return np.exp(-0.5 * np.sum(diff ** 2 * self.metric, axis=-1))

    def mean(self, k, c):
        return complex(np.sum(c * np.exp(-0.5 * np.sum(k ** 2 * self.metric, axis=1))))

    def inner(self, k, c, p="id", q="id"):
        """<P h, Q h> for Fourier multipliers named in ``symbols``."""
        u = c * self.symbols[p](k)
        w = c * self.symbols[q](k)
        return complex(u.conj() @ self.gram(k) @ w)

    def track(self, waves, coeffs, times, remove_mean=True):
        """Trajectory with l2, ah (|dv h|^2), ch (|dx h|^2), mixed and the higher v-derivatives."""
        times = _check_times(times)
        names = {"ah": ("dv", "dv"), "ch": ("dx", "dx"), "mixed": ("dv", "dx"),
                 "dv2": ("dv2", "dv2"), "dv3": ("dv3", "dv3"), "dv4": ("dv4", "dv4"),
                 "dxdv": ("dxdv", "dxdv"), "mx": ("dx", "dv")}
        out = {n: np.empty(len(times)) for n in ["l2"] + list(names)}
        k0 = np.atleast_2d(np.asarray(waves, dtype=float))
        c0 = np.asarray(coeffs, dtype=complex)
        m0 = self.mean(k0, c0) if remove_mean else 0.0
        for i, t in enumerate(times):
            k, c = self.at(k0, c0, t)
            g = self.gram(k)
            mult = {s: c * f(k) for s, f in self.symbols.items()}
            out["l2"][i] = (c.conj() @ g @ c).real - abs(m0) ** 2
            for n, (p, q) in names.items():
                out[n][i] = (mult[p].conj() @ g @ mult[q]).real
        return Trajectory(times, out, "plane-wave", abs(m0))

    def hermite_coefficients(self, waves, coeffs, Nx, Nv):
        """Coefficients in the tensor Hermite basis (x outer, v inner)."""
        from math import factorial

        k = np.atleast_2d(np.asarray(waves, dtype=float))
        out = np.zeros(Nx * Nv, dtype=complex)
        nx = np.arange(Nx)
        nv = np.arange(Nv)
        fx = np.sqrt(np.array([float(factorial(n)) for n in nx]))
        fv = np.sqrt(np.array([float(factorial(n)) for n in nv]))
        for (kx, kv), c in zip(k, coeffs):
            sx = kx / np.sqrt(self.omega)
            ax = (1j * sx) ** nx / fx * np.exp(-0.5 * sx * sx)
            av = (1j * kv) ** nv / fv * np.exp(-0.5 * kv * kv)
            out += c * np.kron(ax, av)
        return out


def octave_waves(kmin=1.0, kmax=1e6, per_octave=2):
    """Wavevectors along both axes, log-spaced with equal weight per octave."""
    n = int(np.floor(per_octave * np.log2(kmax / kmin))) + 1
    ks = kmin * 2.0 ** (np.arange(n) / per_octave)
    waves = np.concatenate([np.column_stack([ks, 0 * ks]), np.column_stack([0 * ks, ks])])
    return waves, np.ones(len(waves), dtype=complex)
