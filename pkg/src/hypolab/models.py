"""Concrete operators: kinetic Fokker-Planck, linear BGK relaxation, the
Oseen model problem and tensor-product toys.

Kinetic Fokker-Planck in h-form, f = h e^{-V(x)} gamma(v):

    dh/dt + v dh/dx - V'(x) dh/dv = d2h/dv2 - v dh/dv,

so L = A^*A + B with A = d/dv and B = v d/dx - V'(x) d/dv, antisymmetric in
L2(e^{-V} dx gamma(v) dv).

* Quadratic V = omega x^2 / 2: Hermite x Hermite, where everything is a
  ladder operator and B = sqrt(omega) (a_v^+ a_x - a_x^+ a_v).
* Periodic V: Fourier x Hermite.  The Fourier basis is orthonormal for dx/l,
  not e^{-V} dx / l, so the x variable is carried in the half-density
  representation phi = h e^{-V/2}.  There d/dx becomes D = d/dx + V'/2,
  B = v d/dx + (V'/2)(a^+ - a) (exactly antisymmetric), and the equilibrium
  h = 1 is the vector e^{-V/2}.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import i0e

from .errors import HypolabError
from .spectral import (
    FOURIER, HERMITE, LinOp, StateVector, TensorBasis, antisymmetrize, commutator,
    detect_flag, fourier, function_matrix, gauss_hermite, hermite, hermite_table,
    identity_op, lowering, make_derivation, orthonormal_columns, raising,
    spectral_gap, symmetrize,
)


# ---------------------------------------------------------------------------
# potentials

@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """V, V', V'' for one of: quadratic(omega), cosine(amplitude, length), samples.

    V is shifted by a constant so that e^{-V} has unit mass for the reference
    measure (dx on the line, dx / l on the torus).
    """

    kind: str
    omega: float = 1.0
    amplitude: float = 0.0
    length: float = 2 * np.pi
    shift: float = 0.0
    spline: object = field(default=None, repr=False)

    @property
    def periodic(self):
        return self.kind == "cosine" or (self.kind == "samples" and self.spline.extrapolate == "periodic")

    def V(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * self.omega * x ** 2 + self.shift
        if self.kind == "cosine":
            return self.amplitude * np.cos(2 * np.pi * x / self.length) + self.shift
        return self.spline(x) + self.shift

    def dV(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return self.omega * x
        if self.kind == "cosine":
            k = 2 * np.pi / self.length
            return -self.amplitude * k * np.sin(k * x)
        return self.spline(x, 1)

    def d2V(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return np.full_like(x, self.omega)
        if self.kind == "cosine":
            k = 2 * np.pi / self.length
            return -self.amplitude * k * k * np.cos(k * x)
        return self.spline(x, 2)

    def hessian_bound(self, box=None, n=10001):
        """sup |V''| (on ``box`` for non-periodic potentials)."""
        if self.kind == "quadratic":
            return abs(self.omega)
        if self.kind == "cosine":
            return abs(self.amplitude) * (2 * np.pi / self.length) ** 2
        lo, hi = box or (self.spline.x[0], self.spline.x[-1])
        return float(np.abs(self.d2V(np.linspace(lo, hi, n))).max())


def quadratic(omega=1.0):
    if not omega > 0:
        raise HypolabError("invalid-parameter", "omega must be positive")
    return PotentialSpec("quadratic", omega=omega, shift=0.5 * np.log(2 * np.pi / omega))


def cosine(amplitude, length=2 * np.pi):
    if not length > 0:
        raise HypolabError("invalid-parameter", "torus length must be positive")
    # (1/l) int exp(-a cos) dx = I_0(a)
    shift = np.log(i0e(abs(amplitude))) + abs(amplitude)
    return PotentialSpec("cosine", amplitude=amplitude, length=length, shift=shift)


def from_samples(nodes, values, periodic=False):
    """Cubic-spline potential through (node, value) pairs.

    With ``periodic`` the nodes must cover one period [x0, x0 + l); the first
    value is appended at x0 + l to close the spline.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 4:
        raise HypolabError("invalid-parameter", "need at least 4 (node, value) pairs")
    if np.any(np.diff(nodes) <= 0):
        raise HypolabError("invalid-parameter", "nodes must be strictly increasing")
    if periodic:
        step = nodes[1] - nodes[0]
        length = nodes[-1] - nodes[0] + step
        sp = CubicSpline(np.append(nodes, nodes[0] + length), np.append(values, values[0]),
                         bc_type="periodic")
        xs = np.linspace(nodes[0], nodes[0] + length, 4097)[:-1]
        shift = np.log(np.mean(np.exp(-sp(xs))))
        return PotentialSpec("samples", length=length, shift=shift, spline=sp)
    sp = CubicSpline(nodes, values)
    xs = np.linspace(nodes[0], nodes[-1], 20001)
    shift = np.log(np.trapezoid(np.exp(-sp(xs)), xs))
    return PotentialSpec("samples", length=nodes[-1] - nodes[0], shift=shift, spline=sp)


def load_potential(path, periodic=False):
    """Read a two-column text file (node, value) into a spline potential."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise HypolabError("invalid-parameter", f"{path}: expected two columns, got {data.shape[1]}")
    return from_samples(data[:, 0], data[:, 1], periodic=periodic)


def derivative_check(potential, points, step=1e-4):
    """Largest relative mismatch between V', V'' and central differences."""
    x = np.asarray(points, dtype=float)
    fd1 = (potential.V(x + step) - potential.V(x - step)) / (2 * step)
    fd2 = (potential.dV(x + step) - potential.dV(x - step)) / (2 * step)
    e1 = np.abs(fd1 - potential.dV(x)) / np.maximum(1.0, np.abs(potential.dV(x)))
    e2 = np.abs(fd2 - potential.d2V(x)) / np.maximum(1.0, np.abs(potential.d2V(x)))
    return float(max(e1.max(), e2.max()))


def check_growth_condition(potential, sample_box=(-10.0, 10.0), n=10001):
    """max over a grid of |V''| / (1 + |V'|)."""
    x = np.linspace(sample_box[0], sample_box[1], n)
    try:
        ratio = np.abs(potential.d2V(x)) / (1.0 + np.abs(potential.dV(x)))
    except Exception as exc:
        raise HypolabError("evaluator-failure", str(exc)) from exc
    if not np.all(np.isfinite(ratio)):
        raise HypolabError("evaluator-failure", "non-finite derivative values")
    return float(ratio.max())


def hessian_domination_check(potential, g, dg, c=None, n=4096, box=(-8.0, 8.0)):
    """Both sides of int |V'|^2 g^2 e^{-V} <= 8 (1 + c)^2 (int g^2 e^{-V} + int g'^2 e^{-V}).

    Integrals are over one period for periodic potentials and over ``box``
    otherwise.  Returns (lhs, rhs, c).
    """
    if potential.periodic:
        x = np.linspace(0.0, potential.length, n, endpoint=False)
        w = np.full(n, potential.length / n)
    else:
        x = np.linspace(box[0], box[1], n)
        w = np.full(n, x[1] - x[0])
        w[[0, -1]] *= 0.5
    if c is None:
        lo, hi = (0.0, potential.length) if potential.periodic else box
        c = check_growth_condition(potential, (lo, hi))
    rho = np.exp(-potential.V(x)) * w
    gx, dgx = g(x), dg(x)
    lhs = float(np.sum(potential.dV(x) ** 2 * gx ** 2 * rho))
    rhs = float(8 * (1 + c) ** 2 * (np.sum(gx ** 2 * rho) + np.sum(dgx ** 2 * rho)))
    return lhs, rhs, c


# ---------------------------------------------------------------------------
# model containers

@dataclass(frozen=True, eq=False)
class ModelInstance:
    """Assembled operator L = sum A_i^*A_i + B (or S + B) with its pieces.

    ``grad_x`` is the designated principal part of [A, B] and ``hess_grad_v``
    the expected value of [B, grad_x] (V'' d/dv), both in the model's own
    representation.
    """

    name: str
    basis: TensorBasis
    A: list
    B: LinOp
    L: LinOp
    equilibrium: StateVector
    kernel: np.ndarray
    S: LinOp = None
    potential: PotentialSpec = None
    grad_x: LinOp = None
    hess_grad_v: LinOp = None
    principal: list = None

    def kernel_projector(self):
        k = self.kernel
        return k @ k.conj().T

    def remove_kernel(self, h):
        k = self.kernel
        h = np.asarray(h, dtype=complex)
        return h - k @ (k.conj().T @ h)

    def symmetric_part(self):
        return symmetrize(LinOp(self.L.dense(), self.basis))

    def random_vectors(self, count, seed=0):
        rng = np.random.default_rng(seed)
        n = self.basis.dim
        return rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))


def _assemble(basis, A, B, S=None):
    if S is None:
        sym = sum(a.dense().conj().T @ a.dense() for a in A)
    else:
        sym = S.dense()
    m = sym + B.dense()
    return LinOp(m, basis, detect_flag(m), B.truncation_defect, "L")


def _equilibrium_state(basis, vec):
    vec = np.asarray(vec, dtype=complex)
    vec = vec / np.linalg.norm(vec)
    # unit mass: the ground-mode coefficient is real positive
    j = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[j]) / vec[j])
    return StateVector(basis, vec)


def _half_density_coeffs(xf, potential):
    """Fourier coefficients of e^{-V/2} in the x factor (computed on a fine grid)."""
    nfine = 8 * xf.size
    x = xf.domain * np.arange(nfine) / nfine
    vals = np.exp(-0.5 * potential.V(x))
    coef = np.fft.fft(vals) / nfine
    return coef[xf.wavenumbers() % nfine]


def build_kfp(potential, Nx, Nv):
    """Kinetic Fokker-Planck operator for a quadratic or periodic potential."""
    if Nx < 4 or Nv < 4:
        raise HypolabError("invalid-parameter", "Nx and Nv must be at least 4")
    vf = hermite(Nv)
    if potential.kind == "quadratic":
        xf = hermite(Nx, 1.0 / np.sqrt(potential.omega))
        basis = TensorBasis((xf, vf), ("x", "v"))
        dv = make_derivation(basis, "d_v")
        dx = make_derivation(basis, "d_x")
        mv = make_derivation(basis, "mult_v")
        force = potential.omega * make_derivation(basis, "mult_x")
        # ladder-operator entries are exact; only the symmetrization correction is recorded
        B = antisymmetrize(LinOp((mv @ dx - force @ dv).matrix, basis), "B")
        grad_x = dx
        hess = potential.omega * dv
        eq = basis.basis_vector((0, 0))
    elif potential.periodic:
        xf = fourier(Nx, potential.length)
        basis = TensorBasis((xf, vf), ("x", "v"))
        dv = make_derivation(basis, "d_v")
        dx = make_derivation(basis, "d_x")
        mv = make_derivation(basis, "mult_v")
        half = make_derivation(basis, "mult_fn", fn=lambda x: 0.5 * potential.dV(x))
        skew = basis.lift(raising(Nv) - lowering(Nv), "v")
        bm = mv.matrix @ dx.matrix + half.matrix @ skew
        B = antisymmetrize(LinOp(bm, basis, detect_flag(bm), half.truncation_defect), "B")
        grad_x = dx + half
        d2 = make_derivation(basis, "mult_fn", fn=potential.d2V)
        hess = d2 @ dv
        eq = np.kron(_half_density_coeffs(xf, potential), np.eye(Nv)[0])
    else:
        raise HypolabError("basis-mismatch", "kinetic model needs a quadratic or periodic potential")
    A = [dv]
    L = _assemble(basis, A, B)
    state = _equilibrium_state(basis, eq)
    zero = LinOp(np.zeros_like(dv.matrix), basis, "symmetric", 0.0, "0")
    return ModelInstance(
        name=f"kfp-{potential.kind}", basis=basis, A=A, B=B, L=L, equilibrium=state,
        kernel=state.coeffs[:, None], potential=potential, grad_x=grad_x,
        hess_grad_v=hess, principal=[grad_x, zero],
    )


def build_bgk(length, Nx, Nv):
    """Linear relaxation S = I - Pi_v plus free transport B = v d/dx on the torus."""
    if Nx < 4 or Nv < 4:
        raise HypolabError("invalid-parameter", "Nx and Nv must be at least 4")
    if not length > 0:
        raise HypolabError("invalid-parameter", "torus length must be positive")
    xf, vf = fourier(Nx, length), hermite(Nv)
    basis = TensorBasis((xf, vf), ("x", "v"))
    pv = np.zeros((Nv, Nv))
    pv[0, 0] = 1.0  # the Maxwellian is the constant h = 1, i.e. Hermite mode 0
    S = LinOp(basis.lift(np.eye(Nv) - pv, "v"), basis, "symmetric", 0.0, "S")
    dv = make_derivation(basis, "d_v")
    dx = make_derivation(basis, "d_x")
    mv = make_derivation(basis, "mult_v")
    B = antisymmetrize(LinOp((mv @ dx).matrix, basis), "B")
    L = _assemble(basis, [dv], B, S)
    k0 = int(np.where(xf.wavenumbers() == 0)[0][0])
    state = _equilibrium_state(basis, basis.basis_vector((k0, 0)))
    zero = LinOp(np.zeros_like(dv.matrix), basis, "symmetric", 0.0, "0")
    return ModelInstance(
        name="bgk", basis=basis, A=[dv], B=B, L=L, S=S, equilibrium=state,
        kernel=state.coeffs[:, None], grad_x=dx, hess_grad_v=zero, principal=[dx, zero],
    )


def build_from_parts(basis, A, B, name="custom", S=None, kernel=None, principal=None):
    """Wrap user-supplied A (list) and B into a ModelInstance."""
    A = A if isinstance(A, (list, tuple)) else [A]
    B = antisymmetrize(B, "B")
    L = _assemble(basis, list(A), B, S)
    if kernel is None:
        u, s, vh = np.linalg.svd(L.dense())
        kernel = vh[s <= 1e-8 * max(1.0, s[0])].conj().T
    kernel = orthonormal_columns(kernel, basis.dim)
    eq = _equilibrium_state(basis, kernel[:, 0]) if kernel.shape[1] else None
    return ModelInstance(name=name, basis=basis, A=list(A), B=B, L=L, S=S,
                         equilibrium=eq, kernel=kernel, principal=principal)


# ---------------------------------------------------------------------------
# Oseen model problem

@dataclass(frozen=True, eq=False)
class OseenInstance:
    """L_alpha = S + i alpha F on Hermite functions, S = -d2 + x^2 - 1."""

    N: int
    alpha: float
    nodes: np.ndarray
    f_samples: np.ndarray
    S: np.ndarray
    F: np.ndarray

    @property
    def L(self):
        return self.S + 1j * self.alpha * self.F


def inv_quadratic(x):
    return 1.0 / (1.0 + x ** 2)


def build_oseen(alpha, f_kind="inv_quadratic", N=256, f=None, oversample=2):
    """Hermite-function discretization of the Oseen model operator.

    Hermite functions h_k(x) = p_k(sqrt2 x) (sqrt2 gamma(sqrt2 x))^{1/2}
    diagonalize S with eigenvalue 2k; F is assembled by Gauss-Hermite
    quadrature in y = sqrt2 x on ``oversample * N`` nodes.
    """
    if N < 32:
        raise HypolabError("invalid-parameter", "N must be at least 32")
    if not np.isreal(alpha):
        raise HypolabError("invalid-parameter", "alpha must be real")
    if f_kind == "inv_quadratic":
        f = inv_quadratic
    elif f_kind != "custom" or f is None:
        raise HypolabError("invalid-parameter", "custom f_kind needs a callable f")
    y, w = gauss_hermite(oversample * N)
    x = y / np.sqrt(2.0)
    fx = np.asarray(f(x), dtype=float)
    phi = hermite_table(N, y, start=np.sqrt(w))
    F = phi.T @ (fx[:, None] * phi)
    # the top row tests whether the quadrature resolved f against the weight
    if not np.all(np.isfinite(F)) or np.abs(fx * np.sqrt(w)).max() > 1e8 * max(1.0, np.abs(fx).min()):
        raise HypolabError("quadrature-failure", "multiplier does not decay against the Gaussian weight")
    F = 0.5 * (F + F.T)
    S = np.diag(2.0 * np.arange(N))
    return OseenInstance(N, float(alpha), x, fx, S, F)


def oseen_spectrum(inst, tail=0.1):
    """Eigenvalues of L_alpha whose eigenvectors live outside the top ``tail`` modes.

    An eigenvector is kept when at most half of its squared mass sits in the
    top ``tail`` fraction of Hermite modes.
    """
    vals, vecs = np.linalg.eig(inst.L)
    cut = int(np.ceil((1 - tail) * inst.N))
    mass = np.sum(np.abs(vecs[cut:]) ** 2, axis=0) / np.sum(np.abs(vecs) ** 2, axis=0)
    keep = mass <= 0.5
    return vals[keep]


def oseen_min_real(inst, tail=0.1, zero_tol=1e-10):
    """Smallest nonzero real part of the retained spectrum."""
    vals = oseen_spectrum(inst, tail)
    re = np.sort(vals.real)
    re = re[re > zero_tol]
    return float(re[0])


# ---------------------------------------------------------------------------
# tensor-product toys

@dataclass(frozen=True, eq=False)
class TensorToy:
    L: LinOp
    kernel: np.ndarray
    kappa1: float
    kappa2: float
    lam: float
    Lam: float
    m_l1: float = None
    m_l2: float = None


def _kernel_and_gap(P, name):
    m = P.dense()
    ev, vec = np.linalg.eigh(0.5 * (m + m.conj().T))
    if abs(ev[0]) > 1e-8 * max(1.0, abs(ev[-1])) or (len(ev) > 1 and ev[1] <= 1e-8):
        raise HypolabError("invalid-parameter", f"{name} must have a one-dimensional kernel")
    k = vec[:, :1]
    return k, spectral_gap(P, k)


def build_tensor_toy(P1, P2, m, weights=None, basis2=None):
    """L = P1 (x) M + I (x) P2 for a multiplier M acting on the second factor.

    ``m`` is one of: samples at nodes of a nodal orthonormal representation
    (give ``weights``; M is diagonal), samples at the nodes of ``basis2`` or
    a callable on ``basis2`` (M assembled by quadrature), or a square matrix.
    """
    k1, kappa1 = _kernel_and_gap(P1, "P1")
    k2, kappa2 = _kernel_and_gap(P2, "P2")
    n2 = P2.dim
    m_l1 = m_l2 = None
    if callable(m):
        if basis2 is None:
            raise HypolabError("invalid-parameter", "callable multiplier needs basis2")
        M, _ = function_matrix(basis2, fn=m)
        yq, wq = gauss_hermite(400) if basis2.kind == HERMITE else (None, None)
        if basis2.kind == HERMITE:
            vals = m(basis2.domain * yq)
        else:
            xq = basis2.domain * np.arange(4 * n2) / (4 * n2)
            wq = np.full(xq.size, 1.0 / xq.size)
            vals = m(xq)
        if np.any(vals < -1e-14):
            raise HypolabError("invalid-parameter", "multiplier must be nonnegative")
        m_l1 = float(np.sum(wq * np.abs(vals)))
        m_l2 = float(np.sqrt(np.sum(wq * vals ** 2)))
    else:
        m = np.asarray(m)
        if m.ndim == 2:
            M = m
        elif weights is not None:
            w = np.asarray(weights, dtype=float)
            if np.any(m < -1e-14):
                raise HypolabError("invalid-parameter", "multiplier must be nonnegative")
            M = np.diag(m.astype(float))
            m_l1 = float(np.sum(w * np.abs(m)))
            m_l2 = float(np.sqrt(np.sum(w * m ** 2)))
        elif basis2 is not None:
            M, _ = function_matrix(basis2, samples=m)
            m_l1 = float(np.sum(basis2.weights * np.abs(m)))
            m_l2 = float(np.sqrt(np.sum(basis2.weights * m ** 2)))
        else:
            raise HypolabError("invalid-parameter", "multiplier samples need weights or basis2")
    if np.abs(M).max() == 0:
        raise HypolabError("invalid-parameter", "multiplier vanishes identically")
    M = 0.5 * (M + M.conj().T)
    lam = float(np.real(k2.conj().T @ M @ k2)[0, 0])
    Lam = float(np.linalg.norm(M @ k2))
    big = np.kron(P1.dense(), M) + np.kron(np.eye(P1.dim), P2.dense())
    big = 0.5 * (big + big.conj().T)
    L = LinOp(big, None, "symmetric", 0.0, "tensor")
    return TensorToy(L, np.kron(k1, k2), kappa1, kappa2, lam, Lam, m_l1, m_l2)


def number_operator(n):
    """a^+ a on n Hermite modes: diag(0, 1, ..., n-1)."""
    return LinOp(np.diag(np.arange(n, dtype=float)), None, "symmetric", 0.0, "N")
