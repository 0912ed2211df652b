import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypolab.certify import simple_ladder
from hypolab.errors import HypolabError
from hypolab.spectral import (
    FOURIER, HERMITE, BasisSpec, LinOp, TensorBasis, build_basis, commutator,
    equivalence_constants, fourier, gauss_hermite, hermite, identity_op, lowering,
    make_derivation, norms, raising, relative_bound_constant, spectral_gap,
)


def test_gauss_rule_moments():
    y, w = gauss_hermite(20)
    assert abs(w.sum() - 1) < 1e-14
    for k in range(1, 10):
        # E[y^2k] = (2k-1)!!
        assert abs(np.sum(w * y ** (2 * k)) - math.prod(range(1, 2 * k, 2))) < 1e-8 * math.prod(range(1, 2 * k, 2))


@pytest.mark.parametrize("make", [lambda: fourier(9, 3.0), lambda: hermite(12, 0.7)])
def test_gram_is_identity(make):
    b = make()
    assert np.abs(b.gram() - np.eye(b.size)).max() < 1e-12


def test_build_basis_rejects_bad_specs():
    with pytest.raises(HypolabError, match="basis size"):
        build_basis(BasisSpec(HERMITE, 1))
    with pytest.raises(HypolabError, match="domain"):
        build_basis(BasisSpec(FOURIER, 8, -1.0))
    with pytest.raises(HypolabError, match="unknown basis"):
        build_basis(BasisSpec("chebyshev", 8))


def test_linop_flags():
    m = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert LinOp(m, flag="antisymmetric").flag == "antisymmetric"
    with pytest.raises(HypolabError, match="flag"):
        LinOp(m, flag="symmetric")
    with pytest.raises(HypolabError):
        LinOp(np.zeros((2, 3)))


def test_lowering_raising_commutator():
    n = 10
    c = lowering(n) @ raising(n) - raising(n) @ lowering(n)
    # [a, a^+] = 1 except on the truncation edge
    assert np.allclose(np.diag(c)[:-1], 1.0)


def test_derivations_on_tensor_basis():
    basis = TensorBasis((fourier(8), hermite(8)), ("x", "v"))
    dx = make_derivation(basis, "d_x")
    dv = make_derivation(basis, "d_v")
    mv = make_derivation(basis, "mult_v")
    assert dx.flag == "antisymmetric"
    assert mv.flag == "symmetric"
    comm = commutator(dv, mv).dense()
    inner = basis.interior(2)
    assert np.allclose(comm[np.ix_(inner, inner)], np.eye(inner.sum()))
    with pytest.raises(HypolabError, match="torus"):
        make_derivation(basis, "mult_x")


def test_derivative_adjoint_relation():
    b = hermite(10)
    d = make_derivation(b, "d_v")
    # d^* = v - d on Hermite functions (Gaussian weight), away from the edge
    mv = make_derivation(b, "mult_v")
    lhs = d.H.dense()[:8, :8]
    rhs = (mv.dense() - d.dense())[:8, :8]
    assert np.allclose(lhs, rhs)


def test_spectral_gap_number_operator():
    n = 6
    N = LinOp(np.diag(np.arange(n, dtype=float)), flag="symmetric")
    e0 = np.eye(n)[:, 0]
    assert spectral_gap(N, e0) == pytest.approx(1.0)
    assert spectral_gap(N) == pytest.approx(0.0)
    with pytest.raises(HypolabError, match="negative-eigenvalue"):
        spectral_gap(LinOp(np.diag([-1.0, 1.0]), flag="symmetric"))
    with pytest.raises(HypolabError, match="flag-not-symmetric"):
        spectral_gap(LinOp(np.array([[0.0, 1.0], [-1.0, 0.0]]), flag="antisymmetric"))


def test_relative_bound():
    rng = np.random.default_rng(0)
    T = LinOp(rng.standard_normal((5, 5)))
    S = 2.5 * T
    r = relative_bound_constant(S, [T])
    assert r.alpha == pytest.approx(2.5, rel=1e-10)
    assert r.finite
    with pytest.raises(HypolabError, match="all-T-zero"):
        relative_bound_constant(S, [LinOp(np.zeros((5, 5)))])


@settings(max_examples=60, deadline=None)
@given(
    st.floats(1e-3, 1.0), st.floats(0.0, 0.99), st.floats(1e-3, 1.0),
    st.integers(0, 2 ** 31 - 1),
)
def test_twisted_norm_between_equivalence_constants(a, r, c, seed):
    b = r * math.sqrt(a * c)
    ladder = simple_ladder(a, b, c)
    rng = np.random.default_rng(seed)
    n = 6
    C = [LinOp(rng.standard_normal((n, n))), LinOp(rng.standard_normal((n, n)))]
    h = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    rec = norms(h, C, ladder)
    lo, up = equivalence_constants(ladder, 2)
    assert lo * rec.h1 ** 2 <= rec.twisted * (1 + 1e-10) + 1e-12
    assert rec.twisted <= up * rec.h1 ** 2 * (1 + 1e-10) + 1e-12


def test_identity_gap():
    b = TensorBasis((hermite(4),), ("v",))
    assert spectral_gap(identity_op(b)) == pytest.approx(1.0)
