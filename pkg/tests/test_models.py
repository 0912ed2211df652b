import numpy as np
import pytest

from hypolab.errors import HypolabError
from hypolab.models import (
    build_bgk, build_kfp, build_oseen, build_tensor_toy, check_growth_condition, cosine,
    derivative_check, from_samples, number_operator, oseen_min_real, oseen_spectrum,
    quadratic,
)
from hypolab.spectral import LinOp, spectral_gap


@pytest.mark.parametrize("make", [
    lambda: build_kfp(quadratic(1.0), 10, 10),
    lambda: build_kfp(quadratic(2.0), 10, 10),
    lambda: build_kfp(cosine(1.0), 17, 10),
    lambda: build_bgk(2 * np.pi, 9, 8),
])
def test_equilibrium_in_kernel_and_structure(make):
    m = make()
    L = m.L.dense()
    k = m.kernel[:, 0]
    assert np.linalg.norm(L @ k) < 1e-10
    assert m.B.flag == "antisymmetric"
    sym = 0.5 * (L + L.conj().T)
    assert np.linalg.eigvalsh(sym)[0] > -1e-10


def test_quadratic_gap_on_complement():
    m = build_kfp(quadratic(1.0), 12, 12)
    # A^*A + B has symmetric part A^*A, gap 1 in v only; the full operator is not symmetric
    S = m.symmetric_part()
    assert spectral_gap(S, m.kernel) == pytest.approx(0.0, abs=1e-10)


def test_model_size_checks():
    with pytest.raises(HypolabError):
        build_kfp(quadratic(1.0), 3, 10)
    with pytest.raises(HypolabError):
        build_bgk(1.0, 10, 2)
    with pytest.raises(HypolabError):
        quadratic(-1.0)


def test_potentials_derivatives():
    xs = np.linspace(-2, 2, 11)
    assert derivative_check(quadratic(1.3), xs) < 1e-6
    assert derivative_check(cosine(0.7, 3.0), xs) < 1e-6
    nodes = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    sp = from_samples(nodes, np.cos(nodes), periodic=True)
    assert sp.periodic
    assert abs(sp.dV(1.0) + np.sin(1.0)) < 1e-4
    assert check_growth_condition(quadratic(1.0)) == pytest.approx(1.0)


def test_cosine_potential_normalized():
    p = cosine(1.5)
    x = np.linspace(0, p.length, 4096, endpoint=False)
    assert np.mean(np.exp(-p.V(x))) == pytest.approx(1.0, rel=1e-12)


def test_oseen_alpha_zero_is_harmonic_oscillator():
    inst = build_oseen(0.0, N=64)
    ev = np.sort(oseen_spectrum(inst).real)
    assert ev[0] == pytest.approx(0.0, abs=1e-10)
    assert oseen_min_real(inst) == pytest.approx(2.0)
    assert np.allclose(inst.F, inst.F.T)


def test_oseen_min_real_grows_with_alpha():
    vals = [oseen_min_real(build_oseen(a, N=128)) for a in (10.0, 100.0)]
    assert vals[1] > vals[0] > 0
    with pytest.raises(HypolabError):
        build_oseen(1.0, N=8)


def test_tensor_toy_kernel_and_bound_inputs():
    P = number_operator(4)
    toy = build_tensor_toy(P, number_operator(3), np.diag([1.0, 2.0, 3.0]))
    assert toy.kappa1 == pytest.approx(1.0)
    assert toy.lam == pytest.approx(1.0)
    assert toy.Lam == pytest.approx(1.0)
    assert np.linalg.norm(toy.L.dense() @ toy.kernel) < 1e-12
    with pytest.raises(HypolabError, match="one-dimensional kernel"):
        build_tensor_toy(LinOp(np.zeros((3, 3)), flag="symmetric"), P, np.eye(4))
