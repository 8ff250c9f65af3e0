import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aeromap.errors import DimensionError, DomainError, GeometryError, HermitianError
from aeromap.geometry import (
    Csm,
    FocusGrid,
    MicArray,
    SourceMap,
    adjoint_csm,
    check_pairing,
    forward_csm,
    monopole_matrix,
    propagation_matrix,
    steering_matrix,
    steering_vector,
    vec_linearization,
)
from aeromap.physics import FlowConfig, greens
from aeromap.recon import normal_matrix
from aeromap.verify import adjoint_defect, random_scenario


def _hermitian(rng, m):
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return a + a.conj().T


def test_spiral_layout():
    arr = MicArray.spiral(16, 1.0, 1.0)
    assert arr.positions.shape == (16, 3)
    assert np.all(arr.positions[:, 2] == 1.0)
    assert np.hypot(*arr.positions[:, :2].T).max() <= 0.5
    assert MicArray.spiral(8, 1.0, 2.0, dimension=2).positions.shape == (8, 2)


def test_grid_array_needs_square_count():
    assert MicArray.grid(9, 1.0, 1.0).size == 9
    with pytest.raises(GeometryError):
        MicArray.grid(10, 1.0, 1.0)


def test_mic_array_validation():
    with pytest.raises(GeometryError):
        MicArray([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    with pytest.raises(GeometryError):
        MicArray([[0.0, np.nan, 1.0]])
    with pytest.raises(GeometryError):
        MicArray(np.zeros((2, 4)))


def test_regular_grid():
    grid = FocusGrid.regular((-0.2, -0.2, 0.0), (0.2, 0.2, 0.0), 0.1)
    assert grid.size == 25
    assert np.allclose(grid.cell_measures, 1e-3)
    assert np.allclose(grid.box[0], [-0.25, -0.25, -0.05])
    assert np.allclose(grid.box[1], [0.25, 0.25, 0.05])
    # index order: last axis fastest
    assert np.allclose(grid.points[1], [-0.2, -0.1, 0.0])


def test_focus_grid_validation():
    with pytest.raises(GeometryError):
        FocusGrid([[0.0, 0.0]], [0.0])
    with pytest.raises(GeometryError):
        FocusGrid([[0.0, 0.0], [1.0, 1.0]], [1.0])
    with pytest.raises(GeometryError):
        FocusGrid.regular((0.0, 0.0), (1.0, 1.0), -0.1)


def test_pairing_rejects_overlap():
    grid = FocusGrid.regular((-0.2, -0.2, 0.0), (0.2, 0.2, 0.0), 0.1)
    arr = MicArray([[0.0, 0.0, 1.0], [0.0, 0.0, 0.01]])
    with pytest.raises(GeometryError):
        check_pairing(arr, grid)
    with pytest.raises(DimensionError):
        check_pairing(MicArray([[0.0, 1.0]]), grid)


def test_source_map_and_csm_validation():
    with pytest.raises(DomainError):
        SourceMap([1.0, np.inf])
    with pytest.raises(HermitianError):
        Csm([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(DomainError):
        Csm([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(DimensionError):
        Csm(np.zeros((2, 3)))


def test_steering_and_monopole(G):
    arr, grid, flow = G.array, G.grid, G.flow
    g = steering_vector(7, arr, grid, flow)
    assert np.allclose(g, greens(arr.positions, grid.points[7], flow))
    assert np.allclose(G.steering[:, 7], g)
    P = monopole_matrix(7, arr, grid, flow)
    assert np.linalg.matrix_rank(P) == 1
    assert np.allclose(P, P.conj().T)
    with pytest.raises(IndexError):
        steering_vector(25, arr, grid, flow)


def test_propagation_weights(G):
    assert np.allclose(G.entries, G.steering * np.sqrt(G.grid.cell_measures))
    assert np.array_equal(G.reconstruct(), G.entries)
    assert not G.entries.flags.writeable


def test_forward_csm_properties(G, rng):
    q = rng.uniform(0, 1, G.shape[1])
    C = forward_csm(q, G)
    assert np.array_equal(C.entries, C.entries.conj().T)
    assert np.linalg.eigvalsh(C.entries).min() > -1e-12 * np.abs(C.entries).max()
    assert C.snapshots == 0
    assert np.all(forward_csm(np.zeros(G.shape[1]), G).entries == 0)
    with pytest.raises(DomainError):
        forward_csm(-q, G)
    with pytest.raises(DimensionError):
        forward_csm(q[:-1], G)


def test_forward_csm_is_sum_of_monopoles(G):
    q = np.zeros(G.shape[1])
    q[[3, 11]] = [2.0, 0.5]
    ref = sum(q[n] * G.grid.cell_measures[n] * monopole_matrix(n, G.array, G.grid, G.flow)
              for n in (3, 11))
    assert np.allclose(forward_csm(q, G).entries, ref, rtol=1e-13, atol=0)


def test_vec_linearization(G, rng):
    q = rng.uniform(0, 1, G.shape[1])
    L = vec_linearization(G)
    assert L.shape == (G.shape[0] ** 2, G.shape[1])
    assert np.allclose(L @ q, forward_csm(q, G).entries.ravel(), rtol=1e-13, atol=0)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_adjoint_identity_property(seed):
    rng = np.random.default_rng(seed)
    array, grid, flow = random_scenario(int(rng.integers(2, 10)), int(rng.integers(1, 30)), seed)
    G = propagation_matrix(array, grid, flow)
    q = rng.uniform(0, 1, grid.size)
    K = _hermitian(rng, array.size)
    assert adjoint_defect(q, K, G) < 1e-12


def test_adjoint_matches_function(G, rng):
    K = _hermitian(rng, G.shape[0])
    assert np.allclose(G.adjoint(K), adjoint_csm(K, G.array, G.grid, G.flow), rtol=1e-14)
    with pytest.raises(HermitianError):
        G.adjoint(K + 1j * np.eye(G.shape[0]))


def test_normal_matrix_columns(G):
    # column n' of A is the adjoint applied to the CSM of a unit source at y_n'
    A = normal_matrix(G)
    for n in (0, 12, 24):
        e = np.zeros(G.shape[1])
        e[n] = 1.0
        col = G.adjoint(forward_csm(e, G).entries)
        assert np.allclose(A[:, n], col, rtol=1e-12, atol=0)


def test_normal_matrix_symmetry_needs_uniform_cells(G):
    A = normal_matrix(G)
    assert np.allclose(A, A.T, rtol=1e-13, atol=0)
    array, grid, flow = random_scenario(6, 10, seed=1)
    B = normal_matrix(propagation_matrix(array, grid, flow))
    assert not np.allclose(B, B.T)
    w = grid.cell_measures
    assert np.allclose(B / w[None, :], (B / w[None, :]).T, rtol=1e-13)


def test_steering_matrix_2d():
    flow = FlowConfig.default(2)
    arr = MicArray.spiral(8, 1.0, 1.0, dimension=2)
    grid = FocusGrid.regular((-0.2, 0.0), (0.2, 0.0), 0.1)
    S = steering_matrix(arr, grid, flow)
    assert S.shape == (8, 5)
    assert np.isfinite(S).all()


def test_single_pair_reductions():
    flow = FlowConfig.default(3)
    arr = MicArray([[0.1, 0.2, 1.0]])
    grid = FocusGrid([[0.0, 0.0, 0.0]], [4e-3])
    g = greens(arr.positions[0], grid.points[0], flow)
    assert steering_vector(0, arr, grid, flow) == pytest.approx([g], rel=1e-15)
    G1 = propagation_matrix(arr, grid, flow)
    assert G1.entries.shape == (1, 1)
    assert G1.entries[0, 0] == pytest.approx(g * np.sqrt(4e-3), rel=1e-15)


def test_equidistant_mics_zero_flow():
    flow = FlowConfig((0.0, 0.0, 0.0))
    theta = np.linspace(0, 2 * np.pi, 7, endpoint=False)
    arr = MicArray(np.column_stack([0.5 * np.cos(theta), 0.5 * np.sin(theta), np.full(7, 1.0)]))
    grid = FocusGrid.regular((-0.1, -0.1, 0.0), (0.1, 0.1, 0.0), 0.1)
    g = steering_vector(4, arr, grid, flow)  # grid centre
    assert np.allclose(g, g[0], rtol=1e-14)
    assert np.all(np.isfinite(g)) and np.all(g != 0)


def test_propagation_is_deterministic(scenario):
    a = scenario.propagation().entries
    b = scenario.propagation().entries
    assert np.array_equal(a, b)


def test_uniform_grid_columns_scaled_by_half_power(G):
    assert np.allclose(G.entries, G.steering * 1e-3 ** 0.5, rtol=1e-15)


def test_unit_source_and_trace(G, rng):
    w = G.grid.cell_measures
    g = G.steering[:, 9]
    e = np.zeros(25)
    e[9] = 2.5
    C = forward_csm(e, G).entries
    assert np.allclose(C, 2.5 * w[9] * np.outer(g, g.conj()), rtol=1e-13)
    assert np.linalg.matrix_rank(C) == 1
    q = rng.uniform(0, 1, 25)
    trace = np.trace(forward_csm(q, G).entries).real
    assert trace == pytest.approx(np.sum(q * w * np.sum(np.abs(G.steering) ** 2, axis=0)), rel=1e-13)


def test_monopole_identities(G):
    P = monopole_matrix(5, G.array, G.grid, G.flow)
    g2 = np.sum(np.abs(G.steering[:, 5]) ** 2)
    assert np.trace(P).real == pytest.approx(g2, rel=1e-14)
    assert np.linalg.norm(P) == pytest.approx(g2, rel=1e-13)
    assert np.allclose(P @ P, g2 * P, rtol=1e-12)


def test_adjoint_special_inputs(G):
    S = G.steering
    eye = G.adjoint(np.eye(16, dtype=complex))
    assert np.allclose(eye, np.sum(np.abs(S) ** 2, axis=0), rtol=1e-14)
    P = monopole_matrix(3, G.array, G.grid, G.flow)
    assert np.allclose(G.adjoint(P), np.abs(S[:, 3].conj() @ S) ** 2, rtol=1e-12)
