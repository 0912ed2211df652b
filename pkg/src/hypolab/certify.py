"""Coercivity certificates: commutator chains, coefficient ladders, the
explicit 4x4 and 5x5 certificate matrices, rate optimization and
tensorization bounds.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .errors import HypolabError
from .spectral import (
    LinOp, commutator, complement_basis, equivalence_constants, gram_of,
    orthonormal_columns, relative_bound_constant, spectral_gap, symmetrize,
    twisted_coefficients,
)

REL_TOL = 1e-12


# ---------------------------------------------------------------------------
# commutator chains

@dataclass(frozen=True, eq=False)
class CommutatorChain:
    """C_0 = A, ..., C_Nc (C_{Nc+1} = 0) with remainders R_1..R_{Nc+1}.

    ``residuals[j]`` is the interior-mode norm of
    [C_j, B] - (C_{j+1} + R_{j+1}) when an expected remainder was designated,
    otherwise 0; ``remainder_bounds[j]`` is the relative bound of R_{j+1}
    with respect to C_0..C_j.
    """

    C: list
    R: list
    Z: list
    residuals: list
    remainder_bounds: list
    tolerance: float
    terminates: bool

    @property
    def Nc(self):
        return len(self.C) - 1


def interior_basis(basis, margin=2):
    """Columns spanning the modes away from the truncation edge."""
    mask = basis.interior(margin)
    return np.eye(basis.dim)[:, mask]


def _restricted_norm(op_matrix, mask):
    return float(np.linalg.norm(op_matrix[np.ix_(mask, mask)]))


def commutator_chain(model, Nc=1, principal=None, expected=None, margin=2):
    """Build C_k by C_{k+1} = principal part of [C_k, B].

    ``principal`` lists C_1..C_{Nc} (default: the model's designation, or
    the full commutators when the model has none).  ``expected`` lists the
    designated remainders R_1..R_{Nc+1}; for the kinetic models these default
    to R_1 = 0 and R_2 = -V'' d/dv.  Identities are compared on interior modes
    only, where the truncated ladder algebra is exact.
    """
    if Nc < 1:
        raise HypolabError("invalid-parameter", "Nc must be >= 1")
    B = model.B
    basis = model.basis
    mask = basis.interior(margin)
    tol = max(1e-8, B.truncation_defect)
    zero = LinOp(np.zeros_like(B.dense()), basis, "symmetric", 0.0, "0")
    if principal is None and model.principal is not None:
        principal = list(model.principal[:Nc])
    if expected is None and model.hess_grad_v is not None and Nc == 1:
        expected = [zero, -model.hess_grad_v]
    C = [model.A[0]]
    R, residuals, bounds = [], [], []
    restrict = interior_basis(basis, margin + 1)
    for j in range(Nc + 1):
        comm = commutator(C[j], B)
        if j < Nc:
            nxt = principal[j] if principal is not None and j < len(principal) else comm
        else:
            nxt = zero
        rem = comm - nxt
        R.append(rem)
        if expected is not None and j < len(expected) and expected[j] is not None:
            res = _restricted_norm(rem.dense() - expected[j].dense(), mask)
            if res > tol:
                raise HypolabError("chain-invariant",
                                   f"[C_{j},B] - C_{j + 1} - R_{j + 1} = {res:.2e} > {tol:.1e}")
        else:
            res = 0.0
        residuals.append(res)
        if _restricted_norm(rem.dense(), mask) <= tol:
            bounds.append(0.0)
        else:
            rb = relative_bound_constant(rem, C[: j + 1], restrict=restrict)
            if not rb.finite:
                raise HypolabError("chain-invariant",
                                   f"R_{j + 1} is not bounded relative to C_0..C_{j}")
            bounds.append(rb.alpha)
        if j < Nc:
            C.append(nxt)
    terminates = _restricted_norm(R[-1].dense(), mask) <= tol
    return CommutatorChain(C, R, [(1.0, 1.0)] * (Nc + 1), residuals, bounds, tol, terminates)


# ---------------------------------------------------------------------------
# coefficient ladders

@dataclass(frozen=True)
class CoeffLadder:
    """Twisted-norm coefficients: a = (a_0..a_Nc), b = (b_0..b_{Nc-1})."""

    a: tuple
    b: tuple
    delta: float = None


def simple_ladder(a, b, c):
    return CoeffLadder((a, c), (b,))


def _leq(x, y):
    return x <= y * (1 + REL_TOL) + 1e-300


def check_geometric(u, delta):
    """Both inequality families of the geometric ladder, with worst ratios."""
    u = np.asarray(u, dtype=float)
    step = [u[k + 1] / (delta * u[k]) for k in range(len(u) - 1)]
    convex = [u[k] ** 2 / (delta * u[k - 1] * u[k + 1]) for k in range(1, len(u) - 1)]
    ok = all(_leq(r, 1.0) for r in step) and all(_leq(r, 1.0) for r in convex)
    return ok, (max(step) if step else 0.0), (max(convex) if convex else 0.0)


def ladder_geometric(delta, N):
    """u_0 = 1, u_k = eps^{m_k} with midpoint exponents and eps in {10^-j}.

    m_0 = 0, m_1 = 1, m_{k+1} = (3 m_k - m_{k-1}) / 2; the largest eps of the
    form 10^-j satisfying both families is used.
    """
    if not 0 < delta < 1:
        raise HypolabError("invalid-parameter", "delta must lie in (0, 1)")
    if N < 1:
        raise HypolabError("invalid-parameter", "N must be >= 1")
    m = [0.0, 1.0]
    for _ in range(N - 1):
        m.append(0.5 * (3 * m[-1] - m[-2]))
    m = np.array(m)
    j = 1
    while True:
        u = 10.0 ** (-j * m)
        if check_geometric(u, delta)[0]:
            return u
        j += 1


def ladder_from_sequence(u, delta=None):
    """Interleave u_1, u_2, ... as a_0, b_0, a_1, b_1, ..."""
    u = list(u)[1:]
    a = tuple(u[0::2])
    b = tuple(u[1::2][: len(a) - 1])
    return CoeffLadder(a, b, delta)


def check_condakbk(ladder, delta):
    """a_0 <= d, b_k <= d a_k, a_{k+1} <= d b_k, a_k^2 <= d b_{k-1} b_k, b_k^2 <= d a_k a_{k+1}."""
    a, b = ladder.a, ladder.b
    checks = [_leq(a[0], delta)]
    for k in range(len(b)):
        checks.append(_leq(b[k], delta * a[k]))
        checks.append(_leq(a[k + 1], delta * b[k]))
        checks.append(_leq(b[k] ** 2, delta * a[k] * a[k + 1]))
        if k >= 1:
            checks.append(_leq(a[k] ** 2, delta * b[k - 1] * b[k]))
    return all(checks)


@dataclass(frozen=True)
class NonlinearSchedule:
    """Coefficients 1 = a_0 >= a_1 >= ... >= a_{J-1} with their validity report.

    ``closed_form`` holds the textbook construction (a_1 = K E^eps imposed,
    recursion from a_{J-1}); ``a`` is the schedule actually returned and
    ``path`` names the route that produced it.
    """

    a: tuple
    path: str
    feasible: bool
    lines: tuple
    margins: tuple
    K: float
    K_eff: float
    E: float
    Ebar: float
    k: float
    J: int
    eps: float
    K1: float
    ell: float
    closed_form: tuple
    closed_form_lines: tuple


def schedule_alphas(J):
    """alpha_j for j = 0..J-1: alpha_{J-1} = 0, alpha_{J-2} = 1, alpha_{j-1} = 2 alpha_j + 1."""
    return np.array([2.0 ** (J - 1 - j) - 1 for j in range(J)])


def check_condcoeff(a, K, E, k, eps, K1, ell):
    """The four lines of the nonlinear schedule conditions.

    Returns (booleans, margins); a margin is rhs/lhs - 1 in log form, so
    nonnegative means satisfied.
    """
    a = np.asarray(a, dtype=float)
    J = len(a)
    last = a[-1]
    mono = min(np.log(a[j - 1]) - np.log(a[j]) for j in range(1, J)) if J > 1 else 0.0
    mono = min(mono, -np.log(a[0]))
    first = np.log(K * E ** eps) - np.log(a[1]) if J > 1 else 0.0
    third = min(
        np.log(K * last ** (1 + eps) * E ** (k * eps)) - np.log(a[j] ** 2 / a[j - 1])
        for j in range(1, J)
    ) if J > 1 else 0.0
    fourth = np.log(last) - np.log(K1 * E ** (ell * eps))
    margins = (mono, first, third, fourth)
    tol = 1e-10
    return tuple(m >= -tol for m in margins), margins


def ladder_nonlinear(K, Ebar, k, J, eps, E=None):
    """Coefficient schedule with a validity report.

    The textbook construction imposes equality in the third line for
    j = 2..J-1 and a_1 = K E^eps; it leaves the j = 1 line (a_1^2 / a_0)
    unchecked and in general violates it.  When it fails, the equality
    recursion is extended down to a_0 = 1 (boundary-corrected closed form);
    when that is unavailable a linear program in log a_j is solved.
    """
    if not (K > 0 and Ebar > 0 and k > 0):
        raise HypolabError("invalid-parameter", "K, Ebar and k must be positive")
    if J < 2 or int(J) != J:
        raise HypolabError("invalid-parameter", "J must be an integer >= 2")
    J = int(J)
    alphas = schedule_alphas(J)
    a1 = alphas[1]
    a0 = alphas[0]
    eps1 = np.inf if a1 == 0 else 1.0 / (2 * a1)
    if not 0 < eps <= eps1:
        raise HypolabError("invalid-parameter", f"eps must lie in (0, {eps1}]")
    E = Ebar if E is None else E
    if not 0 < E <= Ebar:
        raise HypolabError("invalid-parameter", "E must lie in (0, Ebar]")

    # K reduced so that K E^{k eps} <= 1 and the bracket below is <= 1
    K_eff = min(K, 1.0, Ebar ** (-k), Ebar ** (-(1 + k * a1) * eps / (1 + a1)))
    base = K_eff * E ** (k * eps)

    # textbook closed form
    last = (K_eff ** (1 + a1) * E ** ((1 + k * a1) * eps)) ** (1.0 / (1 - a1 * eps))
    r = base * last ** eps
    cf = [1.0] + [last * r ** (-alphas[j]) for j in range(1, J)]
    if J > 2:
        cf[1] = K_eff * E ** eps
    cf = tuple(cf)
    K1_cf = K_eff ** (2 * (1 + a1))
    ell_cf = 2 * (1 + k * a1)
    cf_lines, cf_marg = check_condcoeff(cf, K, E, k, eps, K1_cf, ell_cf)

    # constants valid for the boundary-corrected construction, eps <= 1/(2 alpha_0)
    ell = max(2 * (1 + k * a1), 2 * k * a0)
    K1 = min(K_eff ** (2 * (1 + a1)), K_eff ** (2 * a0)) * min(1.0, Ebar ** (-ell / (2 * a0)))

    if all(cf_lines):
        return NonlinearSchedule(cf, "closed-form", True, cf_lines, cf_marg, K, K_eff, E, Ebar, k,
                                 J, eps, K1_cf, ell_cf, cf, cf_lines)

    if a0 * eps < 1:
        P = last
        Q = base ** (a0 / (1 - a0 * eps))
        tail = min(P, Q)
        r = base * tail ** eps
        bc = tuple([1.0] + [tail * r ** (-alphas[j]) for j in range(1, J)])
        lines, marg = check_condcoeff(bc, K, E, k, eps, K1, ell)
        if all(lines):
            return NonlinearSchedule(bc, "boundary-corrected", True, lines, marg, K, K_eff, E,
                                     Ebar, k, J, eps, K1, ell, cf, cf_lines)

    sol = _schedule_lp(K_eff, E, k, J, eps, K1, ell)
    if sol is not None:
        lines, marg = check_condcoeff(sol, K, E, k, eps, K1, ell)
        if all(lines):
            return NonlinearSchedule(sol, "lp-search", True, lines, marg, K, K_eff, E, Ebar, k,
                                     J, eps, K1, ell, cf, cf_lines)
    fallback = sol if sol is not None else cf
    lines, marg = check_condcoeff(fallback, K, E, k, eps, K1, ell)
    return NonlinearSchedule(fallback, "infeasible", False, lines, marg, K, K_eff, E, Ebar, k,
                             J, eps, K1, ell, cf, cf_lines)


def _schedule_lp(K, E, k, J, eps, K1, ell):
    """Maximize log a_{J-1} subject to all four lines, linear in y_j = log a_j."""
    n = J - 1  # unknowns y_1..y_{J-1}
    rows, rhs = [], []
    lk, le = np.log(K), np.log(E)
    for j in range(1, J):
        # y_j - y_{j-1} <= 0 (y_0 = 0)
        row = np.zeros(n)
        row[j - 1] = 1.0
        if j >= 2:
            row[j - 2] = -1.0
        rows.append(row)
        rhs.append(0.0)
        # 2 y_j - y_{j-1} - (1 + eps) y_{J-1} <= log K + k eps log E
        row = np.zeros(n)
        row[j - 1] += 2.0
        if j >= 2:
            row[j - 2] -= 1.0
        row[n - 1] -= 1 + eps
        rows.append(row)
        rhs.append(lk + k * eps * le)
    row = np.zeros(n)
    row[0] = 1.0
    rows.append(row)
    rhs.append(lk + eps * le)
    row = np.zeros(n)
    row[n - 1] = -1.0
    rows.append(row)
    rhs.append(-(np.log(K1) + ell * eps * le))
    cost = np.zeros(n)
    cost[n - 1] = -1.0
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=[(None, 0.0)] * n,
                  method="highs")
    if not res.success:
        return None
    return tuple([1.0] + list(np.exp(res.x)))


# ---------------------------------------------------------------------------
# certificate matrices

@dataclass(frozen=True)
class BoundConstants:
    alpha: float
    beta: float
    kappa: float = None

    @property
    def M(self):
        return max(1.0, self.alpha, self.beta)


@dataclass(frozen=True, eq=False)
class CertifyReport:
    kind: str
    matrix: np.ndarray
    min_eig: float
    positive: bool
    rate: float = None
    lower: float = None
    upper: float = None
    coefficients: tuple = ()
    trace: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_text(self):
        """Self-describing key=value record."""
        lines = [f"kind={self.kind}", f"min_eig={self.min_eig!r}", f"positive={self.positive}"]
        lines.append(f"rate={self.rate!r}")
        lines.append(f"equivalence_lower={self.lower!r}")
        lines.append(f"equivalence_upper={self.upper!r}")
        lines.append("coefficients=" + ",".join(repr(float(c)) for c in self.coefficients))
        n = self.matrix.shape[0]
        for i in range(n):
            lines.append(f"m{i + 1}=" + ",".join(repr(float(x)) for x in self.matrix[i]))
        for key in sorted(self.extra):
            lines.append(f"{key}={self.extra[key]!r}")
        lines.append(f"trace_points={len(self.trace)}")
        return "\n".join(lines) + "\n"


def parse_report_text(text):
    out = {}
    for line in text.strip().splitlines():
        key, _, val = line.partition("=")
        out[key] = val
    return out


def _min_sym_eig(m):
    return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])


def certificate_matrix_aab(consts, a, b, c):
    """4x4 certificate on X = (|Ah|, |A^2h|, |Ch|, |CAh|)."""
    if min(a, b, c) <= 0:
        raise HypolabError("invalid-parameter", "a, b, c must be positive")
    if b * b > a * c * (1 + REL_TOL):
        raise HypolabError("ladder-invalid", "b^2 > ac: the twisted norm is not equivalent to H1")
    al, be = consts.alpha, consts.beta
    m = np.array([
        [1 - (a * al + b * be), -(a * al + b * be), -(a + b * al + b * be + c * be), -b * be],
        [0.0, a, -(b * al + c * be), -2 * b],
        [0.0, 0.0, b - c * be, -c * be],
        [0.0, 0.0, 0.0, c],
    ])
    K = _min_sym_eig(m)
    lo, up = equivalence_constants(simple_ladder(a, b, c), 2)
    rate = None
    if K > 0 and consts.kappa is not None and consts.kappa > 0:
        rate = K * min(1.0, consts.kappa) / (2 * up)
    return CertifyReport("aab", m, K, K > 0, rate, lo, up, (a, b, c),
                         extra={"alpha": al, "beta": be, "kappa": consts.kappa})


def certificate_matrix_sb(M, a, b, c, kappa=None):
    """5x5 certificate on X = (|S^1/2 h|, |S^1/2 Ch|, |Ch|, |S^1/2 Ah|, |Ah|)."""
    if min(a, b, c) <= 0:
        raise HypolabError("invalid-parameter", "a, b, c must be positive")
    m = np.array([
        [1 - M * b - M * c, -M * a - M * b, -M * a - M * b, -M * b, -M * c],
        [0.0, a - M * b - M * c, -M * b, -M * b, -M * c],
        [0.0, 0.0, b - M * c, 0.0, -M * c],
        [0.0, 0.0, 0.0, c, 0.0],
        [0.0, 0.0, 0.0, 0.0, c],
    ])
    K = _min_sym_eig(m)
    lo, up = (None, None)
    if b * b <= a * c:
        lo, up = equivalence_constants(simple_ladder(a, b, c), 2)
    rate = None
    if K > 0 and kappa is not None and up is not None:
        rate = K * min(1.0, kappa) / (2 * up)
    return CertifyReport("sb", m, K, K > 0, rate, lo, up, (a, b, c), extra={"M": M})


def quadratic_rate_objective(a, b, c, M, kappa):
    """min of the two branch ratios; -inf where b^2 > ac."""
    a, b, c = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), np.asarray(c, float))
    first = (1 - (a + b * M + 0.25)) / (2 * a + 1 / kappa)
    second = (b - (a + b + c * M) ** 2) / (2 * c + 1 / kappa)
    val = np.minimum(first, second)
    ok = (b * b <= a * c) & (a > 0) & (b > 0) & (c > 0)
    val = np.where(ok, val, -np.inf)
    return val if val.ndim else float(val)


def certified_rate_quadratic(M, kappa, grid=41, lo=-4.0, hi=0.0, max_iter=2000):
    """Maximize the explicit rate bound over (a, b, c) with b^2 <= ac.

    Coarse log grid followed by a compass search in log coordinates whose
    step halves on failure.  The feasible boundary b^2 = ac is handled by
    also searching along b = sqrt(ac) directly.  Fully deterministic.
    """
    if M < 0 or not kappa > 0:
        raise HypolabError("invalid-parameter", "need M >= 0 and kappa > 0")
    g = np.logspace(lo, hi, grid)
    A, Bv, Cv = np.meshgrid(g, g, g, indexing="ij")
    vals = quadratic_rate_objective(A, Bv, Cv, M, kappa)
    i = np.unravel_index(np.argmax(vals), vals.shape)
    trace = [((0.05, 0.05, 0.05), quadratic_rate_objective(0.05, 0.05, 0.05, M, kappa))]
    starts = [np.log([g[i[0]], g[i[1]], g[i[2]]]), np.log([0.05, 0.05, 0.05])]
    best_x, best_v = None, -np.inf
    for x0 in starts:
        x, v = _compass(lambda y: quadratic_rate_objective(*np.exp(y), M, kappa), x0, max_iter, trace)
        # boundary search: b = sqrt(ac), two free variables
        def on_edge(y2):
            a_, c_ = np.exp(y2)
            return quadratic_rate_objective(a_, np.sqrt(a_ * c_), c_, M, kappa)
        y2, v2 = _compass(on_edge, np.array([x[0], x[2]]), max_iter, trace)
        if v2 > v:
            a_, c_ = np.exp(y2)
            x, v = np.log([a_, np.sqrt(a_ * c_), c_]), v2
        if v > best_v:
            best_x, best_v = x, v
    abc = tuple(float(t) for t in np.exp(best_x))
    return float(best_v), abc, trace


def _compass(fun, x0, max_iter, trace, step=0.5, min_step=1e-10):
    x = np.array(x0, dtype=float)
    v = fun(x)
    dirs = np.vstack([np.eye(len(x)), -np.eye(len(x))])
    it = 0
    while step > min_step and it < max_iter:
        it += 1
        improved = False
        for d in dirs:
            y = x + step * d
            w = fun(y)
            if w > v:
                x, v, improved = y, w, True
                break
        if not improved:
            step *= 0.5
        if it % 50 == 0:
            trace.append((tuple(np.exp(x)), v))
    trace.append((tuple(np.exp(x)), v))
    return x, v


# ---------------------------------------------------------------------------
# tensorization

def tensor_gap_bound(kappa1, kappa2, lam, Lam):
    """Lower bound min(k2/2, k2 lam^2 / (16 Lam^2), k1 lam / 2) on the gap of
    L1 (x) M + I (x) L2, where lam = <M e, e> and Lam = |M e| for the unit
    kernel vector e of L2.
    """
    for v in (kappa1, kappa2, lam, Lam):
        if not v > 0:
            raise HypolabError("invalid-parameter", "all arguments must be positive")
    return min(kappa2 / 2, kappa2 * lam ** 2 / (16 * Lam ** 2), kappa1 * lam / 2)


def tensor_gap_bound_multiplier(kappa1, kappa2, m_l1, m_l2):
    """Multiplier form: lam = ||m||_L1, Lam = ||m||_L2."""
    return tensor_gap_bound(kappa1, kappa2, m_l1, m_l2)


# ---------------------------------------------------------------------------
# bound constants from a model, and the coercivity check

def bound_constants(model, chain, margin=2):
    """alpha, beta, kappa for the 4x4 certificate, measured on interior modes.

    alpha bounds [A, A^*] relative to (I, A); beta bounds R_2 = [C, B]
    relative to (A, A^2, C, CA).  Quadratic-sum surrogates are used (they
    dominate the sum-of-norms constants) and both are inflated by the
    recorded truncation defect of B.
    """
    A = model.A[0]
    C = chain.C[1]
    basis = model.basis
    restrict = interior_basis(basis, margin + 1)
    ident = LinOp(np.eye(basis.dim), basis, "symmetric")
    comm = commutator(A, A.H)
    alpha = relative_bound_constant(comm, [ident, A], restrict=restrict).alpha
    R2 = chain.R[1]
    beta = relative_bound_constant(R2, [A, A @ A, C, C @ A], restrict=restrict).alpha
    defect = model.B.truncation_defect
    P = symmetrize(LinOp(gram_of([A, C]), basis))
    kappa = spectral_gap(P, model.kernel)
    return BoundConstants(alpha + defect, beta + defect, kappa)


@dataclass(frozen=True)
class CoercivityResult:
    K: float
    coercive: bool


def twisted_form_matrix(chain, ladder):
    """Gram matrix G of the twisted scalar product: <<h, g>> = h^* G g."""
    ops = [c.dense() for c in chain.C]
    t = twisted_coefficients(ladder, len(ops))
    n = ops[0].shape[0]
    G = np.eye(n, dtype=complex)
    for i in range(len(ops)):
        for j in range(len(ops)):
            if t[i + 1, j + 1] != 0.0:
                G = G + t[i + 1, j + 1] * ops[i].conj().T @ ops[j]
    return 0.5 * (G + G.conj().T)


def coercivity_check(model, chain, ladder, margin=2):
    """Smallest K with Re<<h, Lh>> >= K sum_j |C_j h|^2 on the kernel complement.

    Test vectors are restricted to interior modes (distance ``margin`` from
    the truncation edge) where L and the C_j act without truncation error.
    """
    t = twisted_coefficients(ladder, len(chain.C))
    if np.linalg.eigvalsh(t)[0] <= 0:
        raise HypolabError("ladder-invalid", "twisted form is not positive definite (b^2 > ac)")
    G = twisted_form_matrix(chain, ladder)
    L = model.L.dense()
    H = G @ L
    H = 0.5 * (H + H.conj().T)
    N = gram_of(chain.C)
    basis = model.basis
    Q0 = interior_basis(basis, margin)
    k = model.kernel
    kin = Q0.T @ k
    comp = complement_basis(kin, Q0.shape[1])
    Q = Q0 @ comp
    Hr = Q.conj().T @ H @ Q
    Nr = Q.conj().T @ N @ Q
    Nr = 0.5 * (Nr + Nr.conj().T)
    ev = scipy.linalg.eigh(0.5 * (Hr + Hr.conj().T), Nr, eigvals_only=True)
    K = float(ev[0])
    return CoercivityResult(K, K > 0)
