"""Weighted L2 bases, operator matrices and the linear algebra built on them.

Every basis used here is orthonormal in its own weighted L2 space, so the
adjoint of an operator is the conjugate transpose of its matrix and norms
are Euclidean norms of coefficient vectors.

Two one-dimensional families are provided:

* ``fourier-torus``: e_k(x) = exp(2 pi i k x / l) on the torus of length l,
  orthonormal for the uniform probability measure dx / l.
* ``hermite-gauss``: normalized probabilists' Hermite polynomials
  He_k(v / sigma) / sqrt(k!), orthonormal for the centred Gaussian of
  variance sigma^2.

Tensor products of these factors give the phase-space bases.
"""
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.special import roots_hermitenorm

from .errors import HypolabError

FOURIER = "fourier-torus"
HERMITE = "hermite-gauss"

# two-tier tolerances: exact algebra vs. quantities touched by truncation
EXACT_TOL = 1e-10
TRUNC_TOL = 1e-6
DENSE_LIMIT = 4000


def hermite_table(n, y, start=None):
    """Orthonormal probabilists' Hermite polynomials p_0..p_{n-1} at ``y``.

    Returns an array of shape (len(y), n).  ``start`` replaces p_0 = 1 by an
    arbitrary positive prefactor (e.g. sqrt of quadrature weights), which
    keeps the three-term recurrence bounded for large n.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty((y.size, n))
    out[:, 0] = 1.0 if start is None else start
    if n > 1:
        out[:, 1] = y * out[:, 0]
    for k in range(1, n - 1):
        out[:, k + 1] = (y * out[:, k] - np.sqrt(k) * out[:, k - 1]) / np.sqrt(k + 1)
    return out


def gauss_hermite(n):
    """Nodes and weights of the n-point rule for the standard Gaussian."""
    x, w = roots_hermitenorm(n)
    return x, w / w.sum()


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """One factor of a discretization.

    ``domain`` is the torus length for fourier-torus and the Gaussian
    scale sigma for hermite-gauss.  ``nodes``/``weights`` are attached by
    :func:`build_basis`.
    """

    kind: str
    size: int
    domain: float = 1.0
    weight: str = ""
    nodes: np.ndarray = field(default=None, repr=False)
    weights: np.ndarray = field(default=None, repr=False)

    @property
    def built(self):
        return self.nodes is not None

    def wavenumbers(self):
        """Fourier indices k, ascending, for the torus factor."""
        n = self.size
        return np.arange(-(n // 2), n - n // 2)

    def modes(self):
        if self.kind == FOURIER:
            return self.wavenumbers()
        return np.arange(self.size)

    def evaluate(self, points):
        """Matrix of basis functions at ``points``, shape (len(points), N)."""
        points = np.asarray(points, dtype=float)
        if self.kind == FOURIER:
            k = self.wavenumbers()
            return np.exp(2j * np.pi * np.outer(points, k) / self.domain)
        return hermite_table(self.size, points / self.domain)

    def gram(self):
        phi = self.evaluate(self.nodes)
        return phi.conj().T @ (self.weights[:, None] * phi)

    def interior(self, margin=2):
        """Mask of modes at distance > margin-1 from the truncation edge."""
        if self.kind == FOURIER:
            k = self.wavenumbers()
            kmax = min(-k[0], k[-1])
            return np.abs(k) <= kmax - margin
        return np.arange(self.size) < self.size - margin


def build_basis(spec):
    """Validate ``spec`` and attach its quadrature rule.

    Trapezoid on N equispaced nodes for the torus (exact for the products of
    the N retained exponentials), N-point Gauss rule for the Gaussian.
    """
    if not isinstance(spec.size, (int, np.integer)) or spec.size < 2:
        raise HypolabError("invalid-parameter", f"basis size must be >= 2, got {spec.size}")
    if not spec.domain > 0:
        raise HypolabError("invalid-parameter", f"domain must be positive, got {spec.domain}")
    if spec.kind == FOURIER:
        nodes = spec.domain * np.arange(spec.size) / spec.size
        weights = np.full(spec.size, 1.0 / spec.size)
        weight = spec.weight or "uniform"
    elif spec.kind == HERMITE:
        y, weights = gauss_hermite(spec.size)
        nodes = spec.domain * y
        weight = spec.weight or "gaussian"
    else:
        raise HypolabError("invalid-parameter", f"unknown basis kind {spec.kind!r}")
    out = replace(spec, nodes=nodes, weights=weights, weight=weight, size=int(spec.size))
    err = np.abs(out.gram() - np.eye(out.size)).max()
    if err > EXACT_TOL:
        raise HypolabError("invalid-parameter", f"Gram matrix off identity by {err:.2e}")
    return out


def fourier(n, length=2 * np.pi):
    return build_basis(BasisSpec(FOURIER, n, length))


def hermite(n, sigma=1.0):
    return build_basis(BasisSpec(HERMITE, n, sigma))


@dataclass(frozen=True, eq=False)
class TensorBasis:
    """Ordered product of factors; flat index is row-major (first factor slowest)."""

    factors: tuple
    names: tuple = ("x", "v")

    def __post_init__(self):
        if len(self.factors) != len(self.names):
            raise HypolabError("invalid-parameter", "one name per factor required")
        for f in self.factors:
            if not f.built:
                raise HypolabError("invalid-parameter", "factors must come from build_basis")

    @property
    def shape(self):
        return tuple(f.size for f in self.factors)

    @property
    def dim(self):
        return int(np.prod(self.shape))

    def flat_index(self, multi):
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def multi_index(self, flat):
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def position(self, name):
        if name not in self.names:
            raise HypolabError("invalid-parameter", f"no factor named {name!r}")
        return self.names.index(name)

    def factor(self, name):
        return self.factors[self.position(name)]

    def lift(self, matrix, name):
        """Embed a one-factor matrix as I (x) ... (x) matrix (x) ... (x) I."""
        pos = self.position(name)
        out = np.ones((1, 1))
        for i, f in enumerate(self.factors):
            out = np.kron(out, matrix if i == pos else np.eye(f.size))
        return out

    def interior(self, margin=2):
        mask = np.ones(1, dtype=bool)
        for f in self.factors:
            mask = np.kron(mask, f.interior(margin)).astype(bool)
        return mask

    def basis_vector(self, multi):
        e = np.zeros(self.dim, dtype=complex)
        e[self.flat_index(multi)] = 1.0
        return e


def single(factor, name="v"):
    return TensorBasis((factor,), (name,))


def _fro(m):
    if scipy.sparse.issparse(m):
        return scipy.sparse.linalg.norm(m)
    return float(np.linalg.norm(m))


def detect_flag(matrix, tol=EXACT_TOL):
    scale = max(1.0, _fro(matrix))
    h = matrix.conj().T
    if _fro(matrix - h) / scale <= tol:
        return "symmetric"
    if _fro(matrix + h) / scale <= tol:
        return "antisymmetric"
    return "none"


@dataclass(frozen=True, eq=False)
class LinOp:
    """Matrix of an operator in an orthonormal basis.

    ``truncation_defect`` is the norm of what the truncation dropped (or of
    the explicit symmetrization correction applied after assembly).
    """

    matrix: object
    basis: object = None
    flag: str = "none"
    truncation_defect: float = 0.0
    label: str = ""

    def __post_init__(self):
        m = self.matrix
        if not scipy.sparse.issparse(m):
            m = np.asarray(m)
            object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise HypolabError("invalid-parameter", f"operator matrix must be square, got {m.shape}")
        if self.basis is not None and self.basis.dim != m.shape[0]:
            raise HypolabError("dimension-mismatch", f"matrix {m.shape} vs basis dim {self.basis.dim}")
        if self.flag not in ("symmetric", "antisymmetric", "none"):
            raise HypolabError("invalid-parameter", f"unknown flag {self.flag!r}")
        if self.flag != "none":
            scale = max(1.0, _fro(m))
            sign = 1 if self.flag == "symmetric" else -1
            err = _fro(m - sign * m.conj().T) / scale
            if err > EXACT_TOL:
                raise HypolabError("flag-violated", f"{self.flag} flag off by {err:.2e}")

    @property
    def dim(self):
        return self.matrix.shape[0]

    def dense(self):
        m = self.matrix
        return m.toarray() if scipy.sparse.issparse(m) else m

    @property
    def H(self):
        return adjoint_weighted(self)

    def apply(self, h):
        return self.matrix @ _coeffs(h)

    def norm(self):
        return _fro(self.matrix)

    def _new(self, m, defect, label=""):
        return LinOp(m, self.basis, detect_flag(m), defect, label)

    def __matmul__(self, other):
        if isinstance(other, LinOp):
            _check_compatible(self, other)
            return self._new(self.matrix @ other.matrix,
                             self.truncation_defect + other.truncation_defect)
        return self.matrix @ _coeffs(other)

    def __add__(self, other):
        _check_compatible(self, other)
        return self._new(self.matrix + other.matrix,
                         self.truncation_defect + other.truncation_defect)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self._new(self.matrix - other.matrix,
                         self.truncation_defect + other.truncation_defect)

    def __neg__(self):
        return LinOp(-self.matrix, self.basis, self.flag, self.truncation_defect, self.label)

    def __mul__(self, s):
        if not np.isscalar(s):
            return NotImplemented
        return self._new(s * self.matrix, abs(s) * self.truncation_defect, self.label)

    __rmul__ = __mul__


def _coeffs(h):
    return h.coeffs if isinstance(h, StateVector) else np.asarray(h)


def _check_compatible(p, q):
    if p.matrix.shape != q.matrix.shape:
        raise HypolabError("dimension-mismatch", f"{p.matrix.shape} vs {q.matrix.shape}")


def zero_op(basis):
    return LinOp(np.zeros((basis.dim, basis.dim)), basis, "symmetric", 0.0, "0")


def identity_op(basis):
    return LinOp(np.eye(basis.dim), basis, "symmetric", 0.0, "I")


@dataclass(frozen=True, eq=False)
class StateVector:
    basis: object
    coeffs: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        object.__setattr__(self, "coeffs", c)
        if c.shape != (self.basis.dim,):
            raise HypolabError("dimension-mismatch", f"state of shape {c.shape} vs dim {self.basis.dim}")

    def norm(self):
        return float(np.linalg.norm(self.coeffs))


# ---------------------------------------------------------------------------
# closed-form one-factor matrices

def lowering(n):
    """a e_k = sqrt(k) e_{k-1}: the matrix of d/dv on unit-variance Hermite."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def raising(n):
    return lowering(n).T.copy()


def _factor_derivative(f):
    if f.kind == FOURIER:
        return np.diag(2j * np.pi * f.wavenumbers() / f.domain), 0.0
    return lowering(f.size) / f.domain, 0.0


def _factor_position(f):
    if f.kind == FOURIER:
        raise HypolabError("unsupported", "multiplication by the coordinate is not defined on a torus")
    n = f.size
    # a^dagger e_{N-1} = sqrt(N) e_N is dropped
    return f.domain * (lowering(n) + raising(n)), f.domain * np.sqrt(n)


def function_matrix(f, samples=None, fn=None, oversample=2):
    """Matrix of multiplication by a function in one factor.

    With ``samples`` at the factor's own nodes the pseudo-spectral (aliased)
    matrix Phi^* diag(w f) Phi is returned and the defect is not estimated.
    With a callable ``fn`` the Galerkin matrix is computed on a finer rule of
    ``oversample * N`` nodes and the defect is the norm of the couplings to
    the next N modes.
    """
    n = f.size
    if fn is None:
        samples = np.asarray(samples)
        if samples.shape != (n,):
            raise HypolabError("invalid-parameter", f"need {n} samples at the quadrature nodes")
        phi = f.evaluate(f.nodes)
        return phi.conj().T @ ((f.weights * samples)[:, None] * phi), 0.0
    big = build_basis(replace(f, size=2 * n, nodes=None, weights=None))
    if f.kind == FOURIER:
        nq = oversample * 2 * n + 1
        xq = f.domain * np.arange(nq) / nq
        wq = np.full(nq, 1.0 / nq)
    else:
        yq, wq = gauss_hermite(oversample * 2 * n)
        xq = f.domain * yq
    phi = big.evaluate(xq)
    full = phi.conj().T @ ((wq * fn(xq))[:, None] * phi)
    keep = _embedding(f, big)
    m = full[np.ix_(keep, keep)]
    out = np.setdiff1d(np.arange(2 * n), keep)
    defect = float(np.linalg.norm(full[np.ix_(out, keep)]))
    if not np.all(np.isfinite(m)):
        raise HypolabError("quadrature-failure", "non-finite multiplier matrix")
    return m, defect


def _embedding(small, big):
    """Indices of ``small``'s modes inside ``big``."""
    if small.kind == FOURIER:
        kb = list(big.wavenumbers())
        return np.array([kb.index(k) for k in small.wavenumbers()])
    return np.arange(small.size)


def make_derivation(basis, which, samples=None, fn=None, factor=None):
    """Matrix of d_v, d_x, multiplication by v or x, or by a function.

    ``which`` is one of ``d_v``, ``d_x``, ``mult_v``, ``mult_x``,
    ``mult_fn``.  For ``mult_fn`` pass ``samples`` at the factor's nodes or a
    callable ``fn``; the factor defaults to ``x``.
    """
    if isinstance(basis, BasisSpec):
        basis = single(basis, factor or "v")
    if which in ("d_v", "d_x"):
        name = which[-1]
        f = basis.factor(name)
        m, defect = _factor_derivative(f)
    elif which in ("mult_v", "mult_x"):
        name = which[-1]
        f = basis.factor(name)
        if name == "v" and f.kind == FOURIER:
            raise HypolabError("unsupported", "mult_v needs a hermite-gauss velocity factor")
        m, defect = _factor_position(f)
    elif which == "mult_fn":
        name = factor or ("x" if "x" in basis.names else basis.names[0])
        f = basis.factor(name)
        m, defect = function_matrix(f, samples=samples, fn=fn)
    else:
        raise HypolabError("unsupported", f"unknown derivation {which!r}")
    full = basis.lift(m, name)
    if not np.iscomplexobj(full) or np.abs(full.imag).max() == 0:
        full = full.real
    return LinOp(full, basis, detect_flag(full), defect, f"{which}[{name}]")


def commutator(P, Q):
    """PQ - QP, component-wise when either argument is a list."""
    if isinstance(P, (list, tuple)):
        return [commutator(p, Q) for p in P]
    if isinstance(Q, (list, tuple)):
        return [commutator(P, q) for q in Q]
    _check_compatible(P, Q)
    m = P.matrix @ Q.matrix - Q.matrix @ P.matrix
    return LinOp(m, P.basis, detect_flag(m), P.truncation_defect + Q.truncation_defect,
                 f"[{P.label},{Q.label}]")


def adjoint_weighted(P):
    """Adjoint in the weighted space: conjugate transpose in an orthonormal basis."""
    if isinstance(P, (list, tuple)):
        return [adjoint_weighted(p) for p in P]
    m = P.matrix.conj().T
    if not scipy.sparse.issparse(m):
        m = np.ascontiguousarray(m)
    return LinOp(m, P.basis, P.flag, P.truncation_defect, f"{P.label}*")


def antisymmetrize(P, label=""):
    """Return (B - B^*)/2 with the correction norm added to the defect."""
    m = P.dense()
    anti = 0.5 * (m - m.conj().T)
    corr = float(np.linalg.norm(m - anti))
    return LinOp(anti, P.basis, "antisymmetric", P.truncation_defect + corr, label or P.label)


def symmetrize(P, label=""):
    m = P.dense()
    sym = 0.5 * (m + m.conj().T)
    corr = float(np.linalg.norm(m - sym))
    return LinOp(sym, P.basis, "symmetric", P.truncation_defect + corr, label or P.label)


def gram_of(ops):
    """Sum of T^* T over a list of operators."""
    ops = ops if isinstance(ops, (list, tuple)) else [ops]
    m = sum(op.dense().conj().T @ op.dense() for op in ops)
    return 0.5 * (m + m.conj().T)


# ---------------------------------------------------------------------------
# norms

@dataclass(frozen=True)
class NormRecord:
    l2: float
    h1: float
    twisted: float = None
    lower: float = None
    upper: float = None


def _chain_ops(chain):
    ops = chain.C if hasattr(chain, "C") else chain
    return [op for op in ops if op is not None]


def twisted_coefficients(ladder, nlevels):
    """Tridiagonal coefficient matrix of the twisted form on (h, C_0h, C_1h, ...)."""
    a = list(ladder.a)
    b = list(ladder.b)
    if len(a) != nlevels or len(b) != nlevels - 1:
        raise HypolabError("ladder-mismatch",
                           f"chain has {nlevels} levels; ladder has {len(a)} a's and {len(b)} b's")
    t = np.zeros((nlevels + 1, nlevels + 1))
    t[0, 0] = 1.0
    for k in range(nlevels):
        t[k + 1, k + 1] = a[k]
    for k in range(nlevels - 1):
        t[k + 1, k + 2] = t[k + 2, k + 1] = b[k]
    return t


def equivalence_constants(ladder, nlevels):
    """Constants (lower, upper) with lower*h1^2 <= twisted <= upper*h1^2.

    For a single (a, b, c) level the closed form
    min(1,a,c)(1 - b/sqrt(ac)), max(1,a,c)(1 + b/sqrt(ac)) is returned;
    longer ladders use the extreme eigenvalues of the coefficient matrix.
    """
    t = twisted_coefficients(ladder, nlevels)
    if nlevels == 2:
        a, c = ladder.a
        b = ladder.b[0]
        r = b / np.sqrt(a * c)
        return min(1.0, a, c) * (1 - r), max(1.0, a, c) * (1 + r)
    ev = np.linalg.eigvalsh(t)
    return float(ev[0]), float(ev[-1])


def norms(h, chain, ladder=None):
    """l2 = ||h||, h1 = sqrt(||h||^2 + sum_j ||C_j h||^2), twisted (squared form).

    ``chain`` is a CommutatorChain or a plain list [C_0, C_1, ...]; ``ladder``
    carries sequences ``a`` (one per level) and ``b`` (one fewer).
    """
    h = _coeffs(h)
    ops = _chain_ops(chain)
    ch = [op.matrix @ h for op in ops]
    l2sq = float(np.vdot(h, h).real)
    h1sq = l2sq + sum(float(np.vdot(c, c).real) for c in ch)
    if ladder is None:
        return NormRecord(np.sqrt(l2sq), np.sqrt(h1sq))
    t = twisted_coefficients(ladder, len(ops))
    vecs = [h] + ch
    tw = 0.0
    for i in range(len(vecs)):
        for j in range(len(vecs)):
            if t[i, j] != 0.0:
                tw += t[i, j] * float(np.vdot(vecs[i], vecs[j]).real)
    lo, up = equivalence_constants(ladder, len(ops))
    return NormRecord(np.sqrt(l2sq), np.sqrt(h1sq), tw, lo, up)


# ---------------------------------------------------------------------------
# spectral gap and relative bounds

def orthonormal_columns(vectors, dim):
    if vectors is None:
        return np.zeros((dim, 0))
    v = np.asarray(vectors)
    if v.ndim == 1:
        v = v[:, None]
    elif v.shape[0] != dim:
        v = v.T
    q, _ = np.linalg.qr(v)
    return q


def complement_basis(kernel, dim):
    """Orthonormal basis of the orthogonal complement of span(kernel)."""
    k = orthonormal_columns(kernel, dim)
    if k.shape[1] == 0:
        return np.eye(dim)
    return scipy.linalg.null_space(k.conj().T)


def spectral_gap(P, kernel=None):
    """Smallest eigenvalue of the symmetric P on the complement of ``kernel``."""
    if P.flag != "symmetric":
        raise HypolabError("flag-not-symmetric", f"operator {P.label!r} is flagged {P.flag!r}")
    n = P.dim
    k = orthonormal_columns(kernel, n)
    if n <= DENSE_LIMIT:
        q = complement_basis(k, n)
        m = P.dense()
        r = q.conj().T @ m @ q
        ev = scipy.linalg.eigvalsh(0.5 * (r + r.conj().T))
        ev_all_min = ev[0]
        if k.shape[1]:
            kk = k.conj().T @ m @ k
            ev_all_min = min(ev_all_min, scipy.linalg.eigvalsh(0.5 * (kk + kk.conj().T))[0])
        scale = max(1.0, abs(ev[-1]))
        if ev_all_min < -1e-8 * scale:
            raise HypolabError("negative-eigenvalue", f"eigenvalue {ev_all_min:.3e} below -1e-8")
        return float(max(ev[0], 0.0))
    return _sparse_gap(P, k)


def _sparse_gap(P, k):
    m = scipy.sparse.csc_matrix(P.matrix)
    d = k.shape[1]
    nev = d + 4
    vals, vecs = scipy.sparse.linalg.eigsh(m, k=nev, sigma=-1e-3, which="LM")
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    if vals[0] < -1e-8 * max(1.0, abs(vals[-1])):
        raise HypolabError("negative-eigenvalue", f"eigenvalue {vals[0]:.3e} below -1e-8")
    for lam, vec in zip(vals, vecs.T):
        overlap = np.linalg.norm(k.conj().T @ vec) if d else 0.0
        if overlap < 0.5:
            return float(max(lam, 0.0))
    raise HypolabError("eigensolver-failure", "no eigenvector found off the kernel")


@dataclass(frozen=True)
class RelativeBound:
    """Least alpha with ||S h|| <= alpha * sqrt(sum_i ||T_i h||^2).

    ``alpha`` is also an upper bound for the sum-of-norms constant; that
    constant is at least ``alpha_lower = alpha / sqrt(k)``.
    ``finite`` is False when S does not vanish on the common kernel of the T_i.
    """

    alpha: float
    alpha_lower: float
    finite: bool
    convention: str = "quadratic-sum surrogate; array norm sqrt(sum ||S_i h||^2)"


def relative_bound_constant(S, T, tol=1e-10, restrict=None):
    """Relative bound of S (operator or list) with respect to the list T.

    ``restrict`` optionally gives a matrix whose columns span the subspace on
    which the bound is evaluated (used to exclude truncation-edge modes).
    """
    T = T if isinstance(T, (list, tuple)) else [T]
    S = S if isinstance(S, (list, tuple)) else [S]
    if all(np.abs(t.dense()).max() == 0 for t in T):
        raise HypolabError("all-T-zero", "every reference operator vanishes")
    smats = [s.dense() for s in S]
    tmats = [t.dense() for t in T]
    if restrict is not None:
        smats = [m @ restrict for m in smats]
        tmats = [m @ restrict for m in tmats]
    ss = sum(m.conj().T @ m for m in smats)
    tt = sum(m.conj().T @ m for m in tmats)
    ss = 0.5 * (ss + ss.conj().T)
    tt = 0.5 * (tt + tt.conj().T)
    g, u = scipy.linalg.eigh(tt)
    cut = tol * max(1.0, g[-1])
    null = u[:, g <= cut]
    rng = u[:, g > cut]
    finite = True
    if null.shape[1]:
        leak = np.sqrt(max(np.linalg.eigvalsh(null.conj().T @ ss @ null)[-1], 0.0))
        if leak > np.sqrt(tol) * max(1.0, np.sqrt(abs(np.linalg.eigvalsh(ss)[-1]))):
            finite = False
    if not finite:
        return RelativeBound(np.inf, np.inf, False)
    dinv = 1.0 / np.sqrt(g[g > cut])
    red = dinv[:, None] * (rng.conj().T @ ss @ rng) * dinv[None, :]
    top = float(np.linalg.eigvalsh(0.5 * (red + red.conj().T))[-1])
    alpha = np.sqrt(max(top, 0.0))
    return RelativeBound(alpha, alpha / np.sqrt(len(T)), True)


def dirichlet_defect(L, A, h):
    """|Re<Lh,h> - ||Ah||^2| for the A*A + B structure."""
    h = _coeffs(h)
    ah = sum(float(np.linalg.norm(a.matrix @ h)) ** 2 for a in (A if isinstance(A, (list, tuple)) else [A]))
    return abs(float(np.vdot(h, L.matrix @ h).real) - ah)


def kernel_vectors(L, tol=1e-8):
    """Right singular vectors of L with singular value <= tol (as columns)."""
    u, s, vh = np.linalg.svd(L.dense())
    return vh[s <= tol].conj().T
