import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypolab.certify import (
    BoundConstants, bound_constants, certificate_matrix_aab, certificate_matrix_sb,
    certified_rate_quadratic, check_condakbk, check_condcoeff, check_geometric,
    commutator_chain, ladder_from_sequence, ladder_geometric, ladder_nonlinear,
    parse_report_text, quadratic_rate_objective, schedule_alphas, simple_ladder,
    tensor_gap_bound,
)
from hypolab.errors import HypolabError
from hypolab.experiments import sample_aab, sample_sb
from hypolab.models import build_kfp, quadratic


def test_objective_reference_point():
    assert abs(quadratic_rate_objective(0.05, 0.05, 0.05, 1.0, 1.0) - 0.025) < 1e-12
    assert quadratic_rate_objective(0.01, 0.5, 0.01, 1.0, 1.0) == -np.inf


def test_optimizer_is_deterministic_and_bracketed():
    lam, abc, trace = certified_rate_quadratic(1.0, 1.0)
    lam2, abc2, _ = certified_rate_quadratic(1.0, 1.0)
    assert lam == lam2 and abc == abc2
    assert 0.025 <= lam <= 0.5
    a, b, c = abc
    assert b * b <= a * c * (1 + 1e-12)
    assert quadratic_rate_objective(a, b, c, 1.0, 1.0) == pytest.approx(lam)
    assert len(trace) > 1


def test_optimizer_monotone_in_M():
    lams = [certified_rate_quadratic(M, 1.0, grid=21)[0] for M in (0.0, 0.5, 1.0, 2.0)]
    assert all(x >= y for x, y in zip(lams, lams[1:]))


def test_optimizer_rejects_bad_input():
    with pytest.raises(HypolabError):
        certified_rate_quadratic(-1.0, 1.0)
    with pytest.raises(HypolabError):
        certified_rate_quadratic(1.0, 0.0)


def test_certificate_aab_shape_and_errors():
    rep = certificate_matrix_aab(BoundConstants(1.0, 1.0, 1.0), 0.05, 0.05, 0.05)
    assert rep.matrix.shape == (4, 4)
    assert np.allclose(np.tril(rep.matrix, -1), 0)
    with pytest.raises(HypolabError, match="ladder-invalid"):
        certificate_matrix_aab(BoundConstants(1.0, 1.0), 0.01, 0.1, 0.01)
    with pytest.raises(HypolabError):
        certificate_matrix_aab(BoundConstants(1.0, 1.0), 0.0, 0.1, 0.01)


def test_report_text_roundtrip():
    rep = certificate_matrix_aab(BoundConstants(0.5, 0.5, 1.0), 1e-3, 1e-5, 1e-6)
    d = parse_report_text(rep.to_text())
    assert d["kind"] == "aab"
    assert float(d["min_eig"]) == rep.min_eig
    assert d["positive"] == str(rep.positive)
    row = [float(x) for x in d["m1"].split(",")]
    assert row == list(rep.matrix[0])


def test_sampled_certificates_positive():
    rng = np.random.default_rng(7)
    for al, be, a, b, c in sample_aab(rng, 200):
        M = max(1.0, al, be)
        assert a <= 1 / (32 * M * M) * (1 + 1e-12)
        assert a * a / b <= 1 / (256 * M * M) * (1 + 1e-9)
        assert certificate_matrix_aab(BoundConstants(al, be), a, b, c).positive
    for M, a, b, c in sample_sb(rng, 200):
        assert b / math.sqrt(a * c) <= 1 / (64 * M * M) * (1 + 1e-9)
        assert certificate_matrix_sb(M, a, b, c).positive


def test_sb_certificate_fails_for_large_coefficients():
    assert not certificate_matrix_sb(1.0, 0.5, 0.5, 0.5).positive


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(1, 6))
def test_geometric_ladder_satisfies_both_families(delta, N):
    u = ladder_geometric(delta, N)
    assert u[0] == 1.0 and len(u) == N + 1
    assert check_geometric(u, delta)[0]
    if N >= 2:
        assert check_condakbk(ladder_from_sequence(u, delta), delta)


def test_ladder_geometric_rejects():
    with pytest.raises(HypolabError):
        ladder_geometric(1.5, 3)
    with pytest.raises(HypolabError):
        ladder_geometric(0.5, 0)


def test_schedule_alphas():
    assert list(schedule_alphas(4)) == [7.0, 3.0, 1.0, 0.0]


def test_nonlinear_J2():
    s = ladder_nonlinear(0.5, 1.0, 1.0, 2, 0.3, E=0.2)
    assert s.closed_form[1] == pytest.approx(0.5 * 0.2 ** 0.3, rel=1e-14)
    # with K < 1 the textbook a_1 breaks the j = 1 line; the corrected schedule holds
    assert not all(s.closed_form_lines)
    assert s.feasible and s.path == "boundary-corrected"
    assert ladder_nonlinear(1.0, 1.0, 1.0, 2, 0.3).path == "closed-form"


def test_nonlinear_J3_worked_example():
    s = ladder_nonlinear(0.5, 1.0, 1.0, 3, 0.1, E=0.1)
    assert s.closed_form[1] == 0.5 * 0.1 ** 0.1
    assert s.feasible
    lines, _ = check_condcoeff(s.a, s.K, s.E, s.k, s.eps, s.K1, s.ell)
    assert all(lines)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.01, 100.0), st.floats(0.5, 3.0),
       st.integers(2, 5), st.floats(0.01, 1.0), st.floats(1e-6, 1.0))
def test_nonlinear_schedules_valid(K, Ebar, k, J, frac, efrac):
    eps = frac / (2 * (2.0 ** (J - 1) - 1))
    s = ladder_nonlinear(K, Ebar, k, J, eps, E=Ebar * efrac)
    assert s.feasible
    assert all(x >= y for x, y in zip(s.a, s.a[1:]))
    assert all(check_condcoeff(s.a, K, s.E, k, eps, s.K1, s.ell)[0])


def test_nonlinear_rejects():
    with pytest.raises(HypolabError):
        ladder_nonlinear(0.5, 1.0, 1.0, 3, 0.9)
    with pytest.raises(HypolabError):
        ladder_nonlinear(0.5, 1.0, 1.0, 3, 0.1, E=2.0)
    with pytest.raises(HypolabError):
        ladder_nonlinear(0.5, 1.0, 1.0, 1, 0.1)


def test_tensor_bound_formula():
    assert tensor_gap_bound(1.0, 2.0, 1.0, 1.0) == pytest.approx(min(1.0, 2 / 16, 0.5))
    with pytest.raises(HypolabError):
        tensor_gap_bound(1.0, 2.0, 0.0, 1.0)


def test_quadratic_chain_and_constants():
    m = build_kfp(quadratic(1.0), 16, 16)
    ch = commutator_chain(m)
    assert ch.Nc == 1
    bc = bound_constants(m, ch)
    assert bc.alpha == pytest.approx(1.0, abs=1e-8)
    assert bc.beta == pytest.approx(1.0, abs=1e-8)
    assert bc.kappa == pytest.approx(1.0, abs=1e-8)


def test_simple_ladder_layout():
    lad = simple_ladder(0.1, 0.01, 0.001)
    assert lad.a == (0.1, 0.001) and lad.b == (0.01,)
