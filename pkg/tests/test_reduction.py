import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dimred_nls.potentials import InadmissiblePotentialError, PotentialSpec, reference_bump, scaled_to_threshold
from dimred_nls.reduction import (
    ReducedDensity,
    ScalingRegime,
    full_trace_distance,
    projector_x,
    reduced_density_x,
    run_convergence_study,
    scaling_ladder,
    trace_distance,
)
from dimred_nls.spectral_core import ComplexField2D, ComplexField3D, SlabGrid, TorusGrid

CGN = 0.6336962967985058


def random_2d(grid, rng, k0=2.0):
    c = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    return ComplexField2D.from_coefficients(grid, c * np.exp(-grid.k_squared() / k0**2)).normalized()


def test_ladder_particle_numbers():
    ladder = scaling_ladder(0.25, 0.9, [1 / 2, 1 / 4, 1 / 8, 1 / 16])
    np.testing.assert_allclose([r.N for r in ladder], [5.2488, 41.9904, 335.9232, 2687.3856], rtol=1e-12)
    for r in ladder:
        assert r.params.c == pytest.approx(0.9, rel=1e-13)


@pytest.mark.parametrize(
    "args",
    [(0.25, 1.2, [0.5, 0.25]), (0.25, 0.9, [0.25, 0.5]), (0.25, 0.9, []), (0.5, 0.9, [0.5])],
)
def test_ladder_validation(args):
    with pytest.raises(ValueError):
        scaling_ladder(*args)


@given(st.integers(0, 10_000))
def test_pure_state_trace_distance(seed):
    rng = np.random.default_rng(seed)
    grid = TorusGrid(8, 8)
    u, v = random_2d(grid, rng), random_2d(grid, rng)
    expected = 2 * np.sqrt(max(0.0, 1 - abs(np.vdot(u.coefficients, v.coefficients)) ** 2))
    assert trace_distance(projector_x(u, (8, 8)), projector_x(v, (8, 8))) == pytest.approx(expected, abs=1e-10)


@given(st.integers(0, 10_000))
def test_trace_distance_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    grid = TorusGrid(8, 8)
    a, b, c = (projector_x(random_2d(grid, rng), (8, 8)) for _ in range(3))
    assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-12


@given(st.integers(0, 10_000), st.floats(0.0, 2 * np.pi))
def test_product_state_reduces_to_projector(seed, theta):
    rng = np.random.default_rng(seed)
    grid = SlabGrid(TorusGrid(8, 8), 4)
    u = random_2d(grid.torus, rng)
    phi = ComplexField3D.product(grid, u, [np.cos(theta), 1j * np.sin(theta)])
    assert trace_distance(reduced_density_x(phi, (8, 8), 4), projector_x(u, (8, 8))) < 1e-12
    if abs(np.sin(theta)) < 1e-3:
        assert full_trace_distance(phi, u) < 1e-2


def test_mixed_reduced_density():
    grid = SlabGrid(TorusGrid(8, 8), 4)
    X1, _ = grid.torus.mesh()
    u = ComplexField2D(grid.torus, values=np.exp(1j * X1)).normalized()
    v = ComplexField2D(grid.torus, values=np.ones(grid.torus.shape)).normalized()
    c = (u.coefficients[..., None] * [1, 0, 0, 0] + v.coefficients[..., None] * [0, 1, 0, 0]) / np.sqrt(2)
    phi = ComplexField3D.from_coefficients(grid, c)
    gamma = reduced_density_x(phi, (8, 8), 4)
    np.testing.assert_allclose(sorted(gamma.eigenvalues())[-2:], [0.5, 0.5], atol=1e-12)
    assert trace_distance(gamma, projector_x(u, (8, 8))) == pytest.approx(1.0, abs=1e-12)
    assert full_trace_distance(phi, u) == pytest.approx(2 * np.sqrt(0.5), abs=1e-12)


def test_truncation_keeps_trace_below_one():
    grid = SlabGrid(TorusGrid(16, 16), 8)
    rng = np.random.default_rng(3)
    c = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    phi = ComplexField3D.from_coefficients(grid, c).normalized()
    gamma = reduced_density_x(phi, (8, 8), 4)
    assert 0 < gamma.trace < 1


def test_density_validation():
    basis = np.zeros((2, 2), dtype=int)
    with pytest.raises(ValueError):
        ReducedDensity(basis, np.array([[1.0, 1.0], [0.0, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        ReducedDensity(basis, np.diag([1.5, -0.5]), 1.0)
    with pytest.raises(ValueError):
        ReducedDensity(basis, np.diag([0.6, 0.6]), 1.2)
    grid = SlabGrid(TorusGrid(8, 8), 4)
    with pytest.raises(ValueError):
        reduced_density_x(ComplexField3D(grid, values=np.ones(grid.shape)), (8, 8), 4)


@pytest.fixture(scope="module")
def short_study():
    grid = TorusGrid(16, 16)
    X1, X2 = grid.mesh()
    u = ComplexField2D(grid, values=1 + 0.6 * np.cos(X1) + 0.4j * np.sin(X2))
    spec = scaled_to_threshold(reference_bump(), CGN, 0.5)
    ladder = scaling_ladder(0.25, 0.9, [0.5, 0.25])
    return run_convergence_study(ladder, u, spec, t_final=0.2, dt=0.01, retained_modes=(8, 8), checkpoints=4, cgn=CGN), u


def test_study_report(short_study, tmp_path):
    rep, _ = short_study
    assert rep.valid
    assert len(rep.rungs) == 2
    assert all(r.distance[0] < 1e-12 for r in rep.rungs)
    assert rep.strictly_decreasing
    d = json.loads(rep.to_json(include_metadata=False))
    assert "metadata" not in d and d["verdict"]["strictly_decreasing"]
    path = rep.write_csv(tmp_path / "series.csv")
    rows = [r for r in csv.reader(l for l in path.read_text().splitlines() if not l.startswith("#"))]
    assert rows[0] == ["rung", "t", "distance", "mass3d", "energy3d", "mass2d", "energy2d"]
    assert len(rows) == 1 + 2 * 5


def test_study_zero_potential_has_no_defect(short_study):
    _, u = short_study
    rep = run_convergence_study(
        scaling_ladder(0.25, 0.9, [0.5]), u, PotentialSpec.zero(), t_final=0.2, dt=0.01,
        retained_modes=(8, 8), checkpoints=4, cgn=CGN, compare_factor=None,
    )
    assert max(rep.max_distances) < 1e-12


def test_study_rejects_inadmissible(short_study):
    _, u = short_study
    with pytest.raises(InadmissiblePotentialError):
        run_convergence_study(scaling_ladder(0.25, 0.9, [0.5]), u, reference_bump(-50.0), t_final=0.2, dt=0.01, cgn=CGN)
    with pytest.raises(ValueError):
        run_convergence_study(scaling_ladder(0.25, 0.9, [0.5]), u, PotentialSpec.zero(), t_final=0.2, dt=0.01,
                              checkpoints=3, cgn=CGN)


def test_regime_round_trip():
    r = ScalingRegime(0.3, 0.5, 0.1)
    assert r.L * (r.N / r.L) ** r.beta == pytest.approx(0.5, rel=1e-13)
    with pytest.raises(ValueError):
        ScalingRegime(0.25, 0.0, 0.5)
