"""Free-field Green's functions of the convected Helmholtz equation.

Sign convention ``exp(-i omega t)``. All point arguments are arrays whose last
axis has length ``flow.dimension``; leading axes broadcast, so a full
microphone-by-focus-point kernel is ``greens(mics[:, None], grid[None, :], flow)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, SingularPointError
from .hankel import hankel_h1_0

#: Mach-scaled distances below this (in meters) are treated as singular.
SINGULAR_EPS = 1e-9

DEFAULT_SOUND_SPEED = 343.0
DEFAULT_FREQUENCY = 8000.0
DEFAULT_MACH = 0.15


@dataclass(frozen=True)
class FlowConfig:
    """Uniform subsonic mean flow plus the evaluation frequency.

    The wavenumber ``k = 2 pi f / c`` is derived, never given directly.
    """

    mach: tuple
    sound_speed: float = DEFAULT_SOUND_SPEED
    frequency: float = DEFAULT_FREQUENCY

    def __post_init__(self):
        mach = tuple(float(v) for v in np.ravel(self.mach))
        object.__setattr__(self, "mach", mach)
        if len(mach) not in (2, 3):
            raise DimensionError(f"mach must have 2 or 3 components, got {len(mach)}")
        if not all(np.isfinite(mach)):
            raise DomainError("mach components must be finite")
        if float(np.dot(mach, mach)) >= 1.0:
            raise DomainError("flow must be subsonic (|mach| < 1)")
        if not (np.isfinite(self.sound_speed) and self.sound_speed > 0):
            raise DomainError("sound_speed must be positive")
        if not (np.isfinite(self.frequency) and self.frequency > 0):
            raise DomainError("frequency must be positive")

    @property
    def dimension(self):
        return len(self.mach)

    @property
    def mach_vector(self):
        return np.array(self.mach)

    @property
    def wavenumber(self):
        return 2.0 * np.pi * self.frequency / self.sound_speed

    @property
    def beta_sq(self):
        return 1.0 - float(np.dot(self.mach, self.mach))

    @property
    def beta(self):
        return np.sqrt(self.beta_sq)

    @classmethod
    def default(cls, dimension=3):
        mach = np.zeros(dimension)
        mach[0] = DEFAULT_MACH
        return cls(tuple(mach))


def _points(x, flow, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != flow.dimension:
        raise DimensionError(
            f"{name} must have last axis of length {flow.dimension}, got shape {x.shape}"
        )
    return x


def _unwrap(value):
    if np.ndim(value) == 0:
        return complex(value) if np.iscomplexobj(value) else float(value)
    return value


def mach_norm(x, flow):
    """Mach-scaled norm ``sqrt((x.m)^2 + beta^2 |x|^2)`` along the last axis."""
    x = _points(x, flow)
    m = flow.mach_vector
    xm = x @ m
    return _unwrap(np.sqrt(xm * xm + flow.beta_sq * np.einsum("...i,...i->...", x, x)))


def _separation(x, y, flow):
    diff = _points(x, flow, "x") - _points(y, flow, "y")
    r = np.asarray(mach_norm(diff, flow))
    if np.any(r < SINGULAR_EPS):
        raise SingularPointError(
            f"|x - y|_m below {SINGULAR_EPS} m; Green's function is singular there"
        )
    return diff, r


def greens_3d(x, y, flow):
    """Convected free-field Green's function in three dimensions."""
    if flow.dimension != 3:
        raise DimensionError("greens_3d needs a 3-D flow configuration")
    diff, r = _separation(x, y, flow)
    kb = flow.wavenumber / flow.beta_sq
    phase = kb * (r - diff @ flow.mach_vector)
    return _unwrap(np.exp(1j * phase) / (4.0 * np.pi * r))


def greens_2d(x, y, flow):
    """Convected free-field Green's function in two dimensions."""
    if flow.dimension != 2:
        raise DimensionError("greens_2d needs a 2-D flow configuration")
    diff, r = _separation(x, y, flow)
    kb = flow.wavenumber / flow.beta_sq
    convect = np.exp(-1j * kb * (diff @ flow.mach_vector))
    return _unwrap(1j / (4.0 * flow.beta) * convect * hankel_h1_0(kb * r))


def greens(x, y, flow):
    """Dispatch to :func:`greens_2d` or :func:`greens_3d` by flow dimension."""
    if flow.dimension == 3:
        return greens_3d(x, y, flow)
    return greens_2d(x, y, flow)


def _zero_flow_greens(x, y, k, dimension):
    diff = np.asarray(x) - np.asarray(y)
    r = np.sqrt(np.einsum("...i,...i->...", diff, diff))
    if np.any(r < SINGULAR_EPS):
        raise SingularPointError("zero-flow Green's function evaluated at its singularity")
    if dimension == 3:
        return np.exp(1j * k * r) / (4.0 * np.pi * r)
    return 0.25j * hankel_h1_0(k * r)


def lorentz_reference(x, y, flow):
    """Green's function rebuilt from the zero-flow kernel by a Lorentz map.

    Only valid for a Mach vector along the first axis; rotate coordinates
    with :func:`flow_frame_rotation` first otherwise. Used as an independent
    check of :func:`greens_2d` / :func:`greens_3d`.
    """
    m = flow.mach_vector
    if np.any(m[1:] != 0.0):
        raise DomainError("lorentz_reference requires mach aligned with the first axis")
    x = _points(x, flow, "x")
    y = _points(y, flow, "y")
    beta = flow.beta
    stretch = np.ones(flow.dimension)
    stretch[0] = 1.0 / beta
    kb = flow.wavenumber / flow.beta_sq
    convect = np.exp(-1j * kb * ((x - y) @ m))
    g0 = _zero_flow_greens(x * stretch, y * stretch, flow.wavenumber / beta, flow.dimension)
    return _unwrap(convect * g0 / beta)


def flow_frame_rotation(flow):
    """Orthogonal matrix ``R`` with ``R @ mach`` along the first axis.

    A Householder reflection; identity for zero flow. Green's functions depend
    on the geometry only through dot products, so reflections are admissible.
    """
    m = flow.mach_vector
    n = np.linalg.norm(m)
    eye = np.eye(flow.dimension)
    if n == 0.0:
        return eye
    v = m / n - eye[0]
    vv = v @ v
    if vv < 1e-30:
        return eye
    return eye - 2.0 * np.outer(v, v) / vv


def mach_direction(x, flow):
    """Project ``x`` onto the Mach unit sphere, ``x / |x|_m``."""
    x = _points(x, flow)
    return x / np.asarray(mach_norm(x, flow))[..., None]


def _flow_matrix(flow):
    m = flow.mach_vector
    return np.outer(m, m) + flow.beta_sq * np.eye(flow.dimension)


def _farfield_constant(flow):
    if flow.dimension == 3:
        return 1.0 / (4.0 * np.pi)
    return np.exp(0.25j * np.pi) / np.sqrt(8.0 * np.pi * flow.wavenumber)


def farfield_leading(x, y, flow):
    """Leading term of the large-``|x|`` expansion of ``g(x, y)``.

    The remainder decays like ``|x|^(-(d+1)/2)`` uniformly for ``y`` in a
    bounded set.
    """
    x = _points(x, flow, "x")
    y = _points(y, flow, "y")
    m = flow.mach_vector
    kb = flow.wavenumber / flow.beta_sq
    xn = np.asarray(mach_norm(x, flow))
    xhat = x / xn[..., None]
    h = np.exp(1j * kb * (xn - x @ m))
    decay = xn ** (-(flow.dimension - 1) / 2.0)
    spatial = np.exp(1j * kb * ((m - xhat @ _flow_matrix(flow)) * y).sum(axis=-1))
    return _unwrap(_farfield_constant(flow) * h * decay * spatial)


def _check_unit(xhat, flow):
    xhat = _points(xhat, flow, "xhat")
    if np.any(np.abs(np.asarray(mach_norm(xhat, flow)) - 1.0) > 1e-12):
        raise DomainError("xhat must lie on the Mach unit sphere (|xhat|_m = 1)")
    return xhat


def plane_wave(y, xhat, flow):
    """Plane wave ``exp((ik/beta^2)(A xhat - m) . y)`` for a Mach-unit ``xhat``."""
    xhat = _check_unit(xhat, flow)
    y = _points(y, flow, "y")
    kb = flow.wavenumber / flow.beta_sq
    direction = xhat @ _flow_matrix(flow) - flow.mach_vector
    return _unwrap(np.exp(1j * kb * (y * direction).sum(axis=-1)))


def far_field_pattern(v, xhat, flow, grid):
    """Midpoint-rule far-field pattern of a grid function ``v``.

    ``grid`` needs ``points`` (N, d) and ``cell_measures`` (N,). ``xhat`` may
    be a single direction or a stack of directions.
    """
    v = np.asarray(v)
    if v.shape != (grid.size,):
        raise DimensionError(f"v has shape {v.shape}, grid has {grid.size} points")
    xhat = _check_unit(xhat, flow)
    kb = flow.wavenumber / flow.beta_sq
    direction = flow.mach_vector - xhat @ _flow_matrix(flow)
    phases = np.exp(1j * kb * (direction @ grid.points.T))
    return _unwrap(phases @ (v * grid.cell_measures))
