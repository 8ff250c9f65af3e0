"""Microphone/focus geometry and the discrete forward model.

The cell-measure convention: the propagation matrix carries ``|Omega_n|^(1/2)``
per column, while steering vectors, monopole (steering) matrices, the adjoint
and everything in :mod:`aeromap.recon` use bare Green's function values.
Consequently ``<forward_csm(q), K>_F = sum_n q_n |Omega_n| adjoint_csm(K)_n``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, DomainError, GeometryError, HermitianError
from .physics import FlowConfig, greens

HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-10


def _distinct(points, what):
    if len(points) > 1:
        uniq = np.unique(points, axis=0)
        if len(uniq) != len(points):
            raise GeometryError(f"{what} contains duplicate points")


@dataclass(frozen=True, eq=False)
class MicArray:
    """Microphone positions, shape ``(M, d)``."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, ndmin=2)
        if pos.ndim != 2 or pos.shape[0] < 1 or pos.shape[1] not in (2, 3):
            raise GeometryError(f"positions must have shape (M, 2|3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("microphone positions must be finite")
        _distinct(pos, "microphone array")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def size(self):
        return self.positions.shape[0]

    @property
    def dimension(self):
        return self.positions.shape[1]

    @classmethod
    def spiral(cls, count, aperture, distance, dimension=3):
        """Sunflower (Vogel) spiral in the plane ``x_d = distance``.

        For ``dimension=2`` the microphones sit on the line ``y = distance``
        with the same radial law.
        """
        i = np.arange(count) + 0.5
        r = 0.5 * aperture * np.sqrt(i / count)
        if dimension == 2:
            xs = r * np.where(np.arange(count) % 2 == 0, 1.0, -1.0)
            return cls(np.column_stack([xs, np.full(count, float(distance))]))
        golden = np.pi * (3.0 - np.sqrt(5.0))
        theta = golden * np.arange(count)
        return cls(np.column_stack([r * np.cos(theta), r * np.sin(theta),
                                    np.full(count, float(distance))]))

    @classmethod
    def grid(cls, count, aperture, distance, dimension=3):
        """Square (3-D) or linear (2-D) uniform array centred on the axis."""
        if dimension == 2:
            xs = np.linspace(-0.5 * aperture, 0.5 * aperture, count)
            return cls(np.column_stack([xs, np.full(count, float(distance))]))
        side = int(round(np.sqrt(count)))
        if side * side != count:
            raise GeometryError("grid array count must be a perfect square in 3-D")
        ax = np.linspace(-0.5 * aperture, 0.5 * aperture, side)
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        return cls(np.column_stack([gx.ravel(), gy.ravel(), np.full(count, float(distance))]))


@dataclass(frozen=True, eq=False)
class FocusGrid:
    """Focus points ``y_n`` with cell measures ``|Omega_n|`` (m^d).

    ``box`` is the ``(lower, upper)`` corner pair of the source region; it
    defaults to the bounding box of the points.
    """

    points: np.ndarray
    cell_measures: np.ndarray
    box: tuple = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] not in (2, 3):
            raise GeometryError(f"points must have shape (N, 2|3), got {pts.shape}")
        w = np.array(self.cell_measures, dtype=float, ndmin=1)
        if w.shape != (pts.shape[0],):
            raise GeometryError("one cell measure per focus point required")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise GeometryError("focus grid must be finite")
        if np.any(w <= 0):
            raise GeometryError("cell measures must be positive")
        _distinct(pts, "focus grid")
        if self.box is None:
            box = (pts.min(axis=0), pts.max(axis=0))
        else:
            box = (np.asarray(self.box[0], dtype=float), np.asarray(self.box[1], dtype=float))
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cell_measures", w)
        object.__setattr__(self, "box", box)

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def dimension(self):
        return self.points.shape[1]

    @classmethod
    def regular(cls, lower, upper, spacing):
        """Axis-aligned lattice from ``lower`` to ``upper`` (inclusive).

        ``spacing`` is a scalar or one value per axis; every cell has measure
        ``prod(spacing)``, including along degenerate axes where
        ``lower == upper`` (the spacing is then the slab thickness).
        """
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        h = np.broadcast_to(np.asarray(spacing, dtype=float), lower.shape)
        if np.any(h <= 0) or np.any(upper < lower):
            raise GeometryError("need positive spacing and upper >= lower")
        counts = np.floor((upper - lower) / h + 1e-9).astype(int) + 1
        axes = [lo + h_ * np.arange(n) for lo, h_, n in zip(lower, h, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([m.ravel() for m in mesh])
        w = np.full(len(pts), float(np.prod(h)))
        box = (lower - 0.5 * h, lower + (counts - 1) * h + 0.5 * h)
        return cls(pts, w, box)


@dataclass(frozen=True, eq=False)
class SourceMap:
    """Per-focus-point source powers on a grid.

    Raw beamforming maps may hold negative values; reconstructed maps and
    inputs to the forward model are non-negative.
    """

    values: np.ndarray
    grid: FocusGrid = None
    info: object = field(default=None, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, ndmin=1)
        if v.ndim != 1:
            raise DimensionError("source map values must be one-dimensional")
        if self.grid is not None and v.shape[0] != self.grid.size:
            raise DimensionError(f"{v.shape[0]} values for a grid of {self.grid.size} points")
        if not np.all(np.isfinite(v)):
            raise DomainError("source map values must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class Csm:
    """Cross-spectral matrix with provenance.

    ``snapshots == 0`` marks an exact (synthesized, not estimated) matrix.
    """

    entries: np.ndarray
    snapshots: int = 0
    frequency: float = float("nan")
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        c = np.array(self.entries, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise DimensionError(f"CSM must be square, got shape {c.shape}")
        if self.check:
            check_hermitian(c)
            lam = np.linalg.eigvalsh(c)
            scale = np.abs(lam).max()
            if lam.min() < -PSD_RTOL * scale:
                raise DomainError(f"CSM is not positive semi-definite (min eigenvalue {lam.min():.3e})")
        object.__setattr__(self, "entries", c)
        object.__setattr__(self, "snapshots", int(self.snapshots))
        object.__setattr__(self, "frequency", float(self.frequency))

    @property
    def size(self):
        return self.entries.shape[0]


def check_hermitian(K, rtol=HERMITIAN_RTOL):
    K = np.asarray(K)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {K.shape}")
    scale = np.abs(K).max()
    if scale > 0 and np.abs(K - K.conj().T).max() > rtol * scale:
        raise HermitianError("matrix is not Hermitian within tolerance")
    return K


def check_pairing(array, grid, flow=None):
    """Raise :class:`GeometryError` unless microphones avoid the source box."""
    if array.dimension != grid.dimension:
        raise DimensionError("array and grid dimensions differ")
    if flow is not None and flow.dimension != array.dimension:
        raise DimensionError("flow and geometry dimensions differ")
    lo, hi = grid.box
    inside = np.all((array.positions >= lo) & (array.positions <= hi), axis=1)
    if np.any(inside):
        raise GeometryError(f"{int(inside.sum())} microphone(s) inside the source region")


def steering_matrix(array, grid, flow):
    """``(M, N)`` matrix whose column ``n`` is the steering vector of ``y_n``."""
    check_pairing(array, grid, flow)
    return np.asarray(greens(array.positions[:, None, :], grid.points[None, :, :], flow))


def _index(n, grid):
    if not (0 <= n < grid.size):
        raise IndexError(f"focus index {n} out of range for {grid.size} points")
    return n


def steering_vector(n, array, grid, flow):
    """Green's function values ``g(x_m, y_n)`` at all microphones."""
    _index(n, grid)
    check_pairing(array, grid, flow)
    return np.asarray(greens(array.positions, grid.points[n][None, :], flow))


def monopole_matrix(n, array, grid, flow):
    """Rank-one steering matrix ``g g*`` of focus point ``n``."""
    g = steering_vector(n, array, grid, flow)
    return np.outer(g, g.conj())


@dataclass(frozen=True, eq=False)
class PropagationMatrix:
    """Discrete volume potential ``G[m, n] = g(x_m, y_n) |Omega_n|^(1/2)``.

    Keeps the bare steering matrix alongside so the adjoint and the
    reconstruction methods need not recompute Green's functions.
    """

    entries: np.ndarray
    steering: np.ndarray
    array: MicArray
    grid: FocusGrid
    flow: FlowConfig

    @property
    def shape(self):
        return self.entries.shape

    def reconstruct(self):
        """Recompute the entries from the recorded geometry and flow."""
        return propagation_matrix(self.array, self.grid, self.flow).entries

    def forward(self, q):
        return forward_csm(q, self)

    def adjoint(self, K):
        """``Re(g_n* K g_n)`` for every focus point (no cell measures)."""
        check_hermitian(K)
        if K.shape[0] != self.entries.shape[0]:
            raise DimensionError("K does not match the number of microphones")
        return kernels.quad_forms(self.steering, np.ascontiguousarray(K, dtype=complex))


def propagation_matrix(array, grid, flow):
    s = steering_matrix(array, grid, flow)
    s.setflags(write=False)
    g = s * np.sqrt(grid.cell_measures)[None, :]
    g.setflags(write=False)
    return PropagationMatrix(g, s, array, grid, flow)


def _powers(q, n):
    q = np.asarray(getattr(q, "values", q), dtype=float)
    if q.shape != (n,):
        raise DimensionError(f"expected {n} source powers, got shape {q.shape}")
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise DomainError("source powers must be finite and non-negative")
    return q


def forward_csm(q, G):
    """Exact CSM ``G diag(q) G*`` for uncorrelated sources of power ``q``."""
    q = _powers(q, G.entries.shape[1])
    c = (G.entries * q[None, :]) @ G.entries.conj().T
    c = 0.5 * (c + c.conj().T)
    return Csm(c, snapshots=0, frequency=G.flow.frequency, check=False)


def adjoint_csm(K, array, grid, flow):
    """Discrete adjoint ``(C* K)_n = <K, P_n>_F`` for Hermitian ``K``."""
    K = check_hermitian(np.asarray(getattr(K, "entries", K), dtype=complex))
    if K.shape[0] != array.size:
        raise DimensionError("K does not match the number of microphones")
    return kernels.quad_forms(steering_matrix(array, grid, flow), np.ascontiguousarray(K))


def vec_linearization(G):
    """``(M^2, N)`` matrix with columns ``vec(|Omega_n| g_n g_n*)``.

    Applied to ``q`` it yields ``vec(forward_csm(q, G))`` (row-major vec).
    """
    s = G.steering
    w = G.grid.cell_measures
    cols = np.einsum("in,jn->ijn", s, s.conj()) * w[None, None, :]
    return cols.reshape(-1, s.shape[1])
