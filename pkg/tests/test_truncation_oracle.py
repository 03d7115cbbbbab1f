import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import GOLDEN
from qgmaryland.errors import DegeneratePhaseError, InputError, ResourceError
from qgmaryland.lattice_model import GraphModel, MarylandParams
from qgmaryland.spectral_solver import eigenvalue_for_index
from qgmaryland.truncation_oracle import (
    build_truncated, count_near_zero, defect, defect_scan, discrete_maryland,
    inverse_participation_ratio, jacobi_eigh, krein_check, symmetric_eigen,
)


@given(st.integers(1, 24), st.integers(0, 2**31 - 1))
def test_jacobi_matches_lapack(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    a = a + a.T
    w, v = jacobi_eigh(a)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-10 * max(1, np.abs(a).max()))
    np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, a, atol=1e-9)


def test_jacobi_handles_degenerate_and_zero():
    w, v = jacobi_eigh(np.eye(5) * 2.0)
    assert w.tolist() == [2.0] * 5
    w, _ = jacobi_eigh(np.zeros((3, 3)))
    assert w.tolist() == [0.0, 0.0, 0.0]


def test_jacobi_rejects_nonsymmetric():
    with pytest.raises(InputError):
        jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_symmetric_eigen_methods_agree(free1, golden):
    op = build_truncated(free1, golden, 2.0, 10)
    wj, _ = symmetric_eigen(op, "jacobi")
    wl, _ = symmetric_eigen(op, "lapack")
    np.testing.assert_allclose(wj, wl, atol=1e-10)
    with pytest.raises(InputError):
        symmetric_eigen(op, "qr")


def test_free_laplacian_spectrum():
    n = 20
    op = discrete_maryland(0.0, GOLDEN, 0.3, n)
    w, _ = jacobi_eigh(op.matrix)
    size = 2 * n + 1
    exact = np.sort(2 * np.cos(np.arange(1, size + 1) * math.pi / (size + 1)))
    np.testing.assert_allclose(w, exact, atol=1e-12)


def test_maryland_spectrum_mirror_symmetric():
    # phase 0 makes the diagonal odd in n; a staggered sign flip maps H to -H
    w = np.linalg.eigvalsh(discrete_maryland(1.0, 2 * math.pi * GOLDEN, 0.0, 30).matrix)
    np.testing.assert_allclose(w, -w[::-1], atol=1e-10)


def test_maryland_states_are_localized():
    n = 60
    _, v_free = np.linalg.eigh(discrete_maryland(0.0, 1.0, 0.0, n).matrix)
    _, v_dis = np.linalg.eigh(discrete_maryland(2.0, 2 * math.pi * GOLDEN, 0.1, n).matrix)
    ipr_free = np.median(inverse_participation_ratio(v_free))
    ipr_dis = np.median(inverse_participation_ratio(v_dis))
    assert ipr_free < 2.0 / (2 * n + 1)
    assert ipr_dis > 10 * ipr_free


def test_discrete_maryland_pole():
    with pytest.raises(DegeneratePhaseError):
        discrete_maryland(1.0, 1.0, -math.pi / 2, 3)


def test_defect_small_at_eigenvalue_and_large_between(free1, golden, first_gap, first_bracket):
    r0 = eigenvalue_for_index(free1, golden, first_gap, (0,), bracket=first_bracket)
    r1 = eigenvalue_for_index(free1, golden, first_gap, (8,), bracket=first_bracket)
    assert defect(free1, golden, r0.lam, 16) < 1e-10
    op = build_truncated(free1, golden, r0.lam, 16)
    assert count_near_zero(op) == 1
    mid = 0.5 * (r0.lam + r1.lam)
    assert defect(free1, golden, mid, 16) > 1e-3


def test_defect_scan_dips_near_eigenvalues(free1, golden, first_gap, first_bracket):
    gap = (2.0, 3.0)
    rec = eigenvalue_for_index(free1, golden, first_gap, (0,), bracket=first_bracket)
    coarse = defect_scan(free1, golden, gap, 41, 16)
    fine = defect_scan(free1, golden, gap, 201, 16)
    assert np.all(coarse.defects >= 0)
    dip_c = coarse.local_minima()[np.argmin(np.abs(coarse.local_minima() - rec.lam))]
    dip_f = fine.local_minima()[np.argmin(np.abs(fine.local_minima() - rec.lam))]
    assert abs(dip_c - rec.lam) <= 0.025 + 1e-12
    assert abs(dip_f - rec.lam) <= 0.005 + 1e-12


def test_box_size_limit():
    model = GraphModel.free([1.0, 1.0])
    params = MarylandParams(1.0, (GOLDEN, math.sqrt(2) - 1))
    with pytest.raises(ResourceError):
        build_truncated(model, params, 2.0, 40)


def test_krein_round_trip_converges(free1, golden):
    z = 2.0 + 0.5j
    errs = [krein_check(free1, golden, z, (0,), n) for n in (8, 16, 32)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_krein_needs_imaginary_part(free1, golden):
    with pytest.raises(InputError):
        krein_check(free1, golden, 2.0 + 0.01j, (0,), 8)


def test_slow_state_needs_larger_box(free1, golden, first_gap, first_bracket):
    # m = -4 sits close to the Dirichlet point pi^2 and decays slowly
    rec = eigenvalue_for_index(free1, golden, first_gap, (-4,), bracket=first_bracket)
    defects = [defect(free1, golden, rec.lam, n, "lapack") for n in (32, 64, 128)]
    assert defects[0] > defects[1] > defects[2]
    assert defects[2] < 1e-8
