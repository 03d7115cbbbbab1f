import math

import numpy as np
import pytest

from conftest import GOLDEN, SILVER
from qgmaryland.edge_solver import EdgeProfile
from qgmaryland.errors import InputError
from qgmaryland.lattice_model import GraphModel, MarylandParams, spectral_gaps
from qgmaryland.spectral_solver import (
    EigenRecord, certify_record, decay_envelope, eigenvalue_for_index, enumerate_eigenvalues,
    fold_target, graph_eigenfunction, lattice_eigenvector, lattice_residual,
)
from qgmaryland.torus_analysis import sigma


@pytest.fixture(scope="module")
def records(free1, golden, first_gap):
    return enumerate_eigenvalues(free1, golden, first_gap, 3)


def test_fold_target_range(golden):
    for m in range(-20, 21):
        t = fold_target(golden, (m,))
        assert -math.pi / 2 <= t < math.pi / 2
        assert (t + golden.phi + math.pi * GOLDEN * m) / math.pi == pytest.approx(
            round((t + math.pi * GOLDEN * m) / math.pi), abs=1e-12)


def test_canonical_ground_index(free1, golden, first_gap, first_bracket):
    rec = eigenvalue_for_index(free1, golden, first_gap, (0,), bracket=first_bracket)
    assert rec.lam == pytest.approx(math.pi**2 / 4, abs=1e-12)


def test_records_satisfy_quantization(records, golden):
    assert len(records) >= 4
    for r in records:
        assert abs(r.sigma_at_lambda - r.target) < 1e-10
        assert r.residual < 1e-6


def test_energy_order_follows_target_order(records):
    # sigma is increasing, so sorting by energy sorts the targets
    targets = [r.target for r in records]
    assert targets == sorted(targets)


def test_phase_shift_relabels_indices(free1, first_gap):
    base = MarylandParams(1.0, (GOLDEN,), 0.0)
    shifted = MarylandParams(1.0, (GOLDEN,), math.pi * GOLDEN)
    a = eigenvalue_for_index(free1, base, first_gap, (3,))
    b = eigenvalue_for_index(free1, shifted, first_gap, (2,))
    assert a.lam == pytest.approx(b.lam, abs=1e-11)


def test_missing_indices_lie_below_the_window(free1, golden, first_gap, first_bracket):
    # with the gap starting at 0 the skipped targets are below sigma(0+)
    for m in (-6, -1, 4, 7):
        assert eigenvalue_for_index(free1, golden, first_gap, (m,), bracket=first_bracket) is None
        assert fold_target(golden, (m,)) < first_bracket[2]


def test_wrong_index_dimension(free1, golden, first_gap):
    with pytest.raises(InputError):
        eigenvalue_for_index(free1, golden, first_gap, (0, 0))


def test_eigenvector_is_real_and_localized(free1, golden, records):
    for r in records:
        u = lattice_eigenvector(free1, golden, r, r.box_radius)
        assert u.imag_ratio() < 1e-10
        assert u.decay_slope < 0 and u.decay_r2 > 0.9
        assert lattice_residual(free1, golden, r.lam, u) < 1e-6
        assert abs(u[r.m]) == pytest.approx(np.abs(u.amplitudes).max(), rel=0.5)


def test_eigenvector_box_must_contain_centre(free1, golden, records):
    r = records[0]
    with pytest.raises(InputError):
        lattice_eigenvector(free1, golden, r, box_radius=abs(r.m[0]))


def test_decay_envelope_is_nonincreasing():
    env = decay_envelope(np.array([1.0, 0.2, 0.5, 0.01, 0.03]))
    assert env.tolist() == [1.0, 0.5, 0.5, 0.03, 0.03]


def test_graph_eigenfunction_conditions(free1, golden, records):
    r = records[len(records) // 2]
    u = lattice_eigenvector(free1, golden, r, 24)
    gf = graph_eigenfunction(free1, golden, r, u)
    assert gf.continuity_residual() < 1e-12
    assert gf.flux_residual() < 1e-6
    assert gf.ode_residual(h=1e-3) < 1e-4
    ratio = gf.ode_residual(h=2e-3) / gf.ode_residual(h=1e-3)
    assert 3.5 < ratio < 4.5


def test_step_potential_eigenfunction():
    model = GraphModel((EdgeProfile(1.0, ((0.5, 0.0), (0.5, 3.0))),))
    params = MarylandParams(0.7, (GOLDEN,), 0.3)
    gap = spectral_gaps(model, (0.1, 9.5))[0]
    rec = eigenvalue_for_index(model, params, gap, (1,))
    u = certify_record(model, params, rec)
    assert rec.residual < 1e-6
    gf = graph_eigenfunction(model, params, rec, lattice_eigenvector(model, params, rec, 20))
    assert gf.flux_residual() < 1e-6
    assert gf.ode_residual(h=1e-3) < 1e-4
    assert u.decay_slope < 0


def test_two_dimensional_record():
    model = GraphModel.free([1.0, 1.0])
    params = MarylandParams(1.0, (GOLDEN, SILVER))
    gap = spectral_gaps(model, (0.1, 9.5))[0]
    rec = eigenvalue_for_index(model, params, gap, (1, 0))
    assert abs(sigma(model, params, rec.lam).sigma - rec.target) < 1e-10
    u = lattice_eigenvector(model, params, rec, 10)
    gf = graph_eigenfunction(model, params, rec, u)
    assert gf.continuity_residual() < 1e-12
    assert gf.flux_residual() < 1e-5


def test_record_defaults():
    r = EigenRecord((0,), 1.0, (0.0, 2.0), 0, 0.0, 0.0)
    assert math.isnan(r.residual) and r.box_radius == 0
