"""Source-power reconstruction: beamforming, DAMAS and covariance matrix fitting.

Conventions (see :mod:`aeromap.geometry`): steering vectors ``g_n`` are bare
Green's function values, cell measures ``w_n = |Omega_n|`` live only in the
propagation matrix. With exact data ``C = forward_csm(q)``:

* ``beamform(C)_n = sum_n' psi[n, n'] w_n' q_n'`` where
  ``psi[n, n'] = |g_n* g_n'|^2 / |g_n|^4`` is the beamformer response at
  ``y_n`` to a unit source at ``y_n'``;
* ``normal_matrix(G) = diag(|g_n|^4) @ psi @ diag(w)``, the matrix of
  ``q -> adjoint_csm(forward_csm(q))``.

DAMAS therefore solves for the cell-integrated powers ``w_n q_n`` and divides
by ``w_n`` at the end.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConvergenceError, DimensionError, DomainError
from .geometry import (
    MicArray,
    PropagationMatrix,
    SourceMap,
    check_hermitian,
    steering_matrix,
)

PENALTIES = ("quadratic", "l1")


@dataclass(frozen=True)
class ReconConfig:
    """Regularization and stopping parameters shared by the solvers."""

    alpha: float = 0.0
    penalty: str = "quadratic"
    max_iter: int = 5000
    tol: float = 1e-12
    nonneg: bool = True

    def __post_init__(self):
        penalty = {"l2": "quadratic"}.get(self.penalty, self.penalty)
        object.__setattr__(self, "penalty", penalty)
        if penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError("alpha must be finite and non-negative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        if penalty == "l1" and not self.nonneg:
            raise ValueError("the l1 penalty is only implemented together with q >= 0")


@dataclass(frozen=True, eq=False)
class PsfMatrix:
    """Point-spread matrix ``psi[n, n'] = <P_n, P_n'>_F / ||P_n||_F^2``.

    Row ``n`` is the focus point where the beamformer is evaluated, column
    ``n'`` the location of the unit source; column ``n'`` is therefore the
    beamforming map of a unit monopole at ``y_n'``. ``monopole_norms`` holds
    ``||P_n||_F^2 = |g_n|^4``. The transpose, ``psi[n', n]``, is the same
    kernel with its arguments ordered source-first.
    """

    entries: np.ndarray
    monopole_norms: np.ndarray
    grid: object = None

    @property
    def source_first(self):
        return self.entries.T


@dataclass
class SolverInfo:
    iterations: int = 0
    status: str = ""
    objective: list = field(default_factory=list)
    residuals: np.ndarray = None

    @property
    def converged(self):
        return self.status in ("converged", "stagnant")


def _steering(source, grid=None, flow=None):
    if isinstance(source, PropagationMatrix):
        return source.steering, source.grid
    if isinstance(source, MicArray):
        return steering_matrix(source, grid, flow), grid
    raise TypeError("expected a PropagationMatrix or a MicArray with grid and flow")


def _csm_entries(C):
    return check_hermitian(np.asarray(getattr(C, "entries", C), dtype=complex))


def beamform(C, array, grid=None, flow=None):
    """Conventional beamforming map ``g_n* C g_n / |g_n|^4``.

    ``array`` may also be a :class:`PropagationMatrix`, in which case its
    stored steering vectors are used. Negative values are kept.
    """
    S, grid = _steering(array, grid, flow)
    K = _csm_entries(C)
    if K.shape[0] != S.shape[0]:
        raise DimensionError("CSM size does not match the number of microphones")
    power = np.einsum("mn,mn->n", S.real, S.real) + np.einsum("mn,mn->n", S.imag, S.imag)
    if np.any(power == 0):
        raise DomainError("zero steering vector")
    return SourceMap(kernels.quad_forms(S, K) / power**2, grid)


def psf_matrix(array, grid=None, flow=None):
    """Point-spread matrix of the geometry; unit diagonal, non-negative."""
    S, grid = _steering(array, grid, flow)
    gram = kernels.gram_abs2(S)
    norms = np.diag(gram).copy()
    return PsfMatrix(gram / norms[:, None], norms, grid)


def normal_matrix(G):
    """Matrix of ``q -> adjoint_csm(forward_csm(q, G))``.

    Entry ``[n, n'] = |g_n* g_n'|^2 |Omega_n'|``; symmetric positive
    semi-definite whenever all cells have the same measure.
    """
    return kernels.gram_abs2(G.steering) * G.grid.cell_measures[None, :]


def _cell_measures(I, psi, n):
    for holder in (getattr(I, "grid", None), getattr(psi, "grid", None)):
        if holder is not None:
            return holder.cell_measures
    return np.ones(n)


def _values(I):
    v = np.asarray(getattr(I, "values", I), dtype=float)
    if not np.all(np.isfinite(v)):
        raise DomainError("non-finite input map")
    return v


def damas_gauss_seidel(I, psi, cfg=ReconConfig()):
    """DAMAS by projected Gauss-Seidel sweeps in grid-index order.

    Sweeps ``z_n <- max(0, (I_n - sum_{n' != n} psi[n, n'] z_n') / psi[n, n])``
    until ``||psi z - I|| <= tol ||I||``, a sweep changes nothing beyond
    1e-15 relative (``"stagnant"``), or ``max_iter`` sweeps. Returns
    ``q = z / |Omega|`` with a :class:`SolverInfo` in ``result.info``.
    """
    b = _values(I)
    A = np.asarray(getattr(psi, "entries", psi), dtype=float)
    if A.shape != (b.shape[0], b.shape[0]):
        raise DimensionError("PSF and beamforming map sizes differ")
    if not np.all(np.isfinite(A)):
        raise DomainError("non-finite PSF")
    w = _cell_measures(I, psi, b.shape[0])
    z, sweeps, residuals, status = kernels.gs_solve(A, b, np.zeros_like(b), cfg.max_iter, cfg.tol)
    info = SolverInfo(sweeps, status, residuals=residuals)
    return _result(z / w, getattr(I, "grid", None) or getattr(psi, "grid", None), info)


def _result(q, grid, info):
    return SourceMap(q, grid, info)


def _penalty(cfg):
    a = cfg.alpha
    if a == 0:
        return (lambda q: 0.0), (lambda q: 0.0)
    if cfg.penalty == "quadratic":
        return (lambda q: a * float(q @ q)), (lambda q: 2.0 * a * q)
    return (lambda q: a * float(q.sum())), (lambda q: np.full_like(q, a))


def _lipschitz(grad, x, iters=20):
    """Power-iteration estimate of the gradient's Lipschitz constant."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(x.shape)
    g0 = grad(x)
    lam = 0.0
    for _ in range(iters):
        v /= np.linalg.norm(v)
        hv = grad(x + v) - g0
        lam = np.linalg.norm(hv)
        if lam == 0:
            break
        v = hv
    return lam


def minimize_projected(fun, grad, x0, cfg):
    """Projected gradient with Barzilai-Borwein trial steps and backtracking.

    Each accepted step satisfies the majorization condition
    ``f(x+) <= f(x) + grad.(x+ - x) + |x+ - x|^2 / (2t)``, which forces the
    objective to be non-increasing. Stops when the relative objective
    decrease drops below ``cfg.tol``, the projected step vanishes, or after
    ``cfg.max_iter`` iterations.
    """
    project = (lambda v: np.maximum(v, 0.0)) if cfg.nonneg else (lambda v: v)
    x = project(np.array(x0, dtype=float))
    f = fun(x)
    g = grad(x)
    lip = _lipschitz(grad, x)
    t = 1.0 / lip if lip > 0 else 1.0
    info = SolverInfo(objective=[f])
    for it in range(1, int(cfg.max_iter) + 1):
        info.iterations = it
        for _ in range(60):
            xn = project(x - t * g)
            d = xn - x
            dd = float(d @ d)
            if dd == 0.0:
                info.status = "converged"
                return x, info
            fn = fun(xn)
            if fn <= f + float(g @ d) + dd / (2.0 * t) + 4.0 * np.finfo(float).eps * abs(f):
                break
            t *= 0.5
        else:
            info.status = "line_search_failed"
            return x, info
        gn = grad(xn)
        decrease = f - fn
        s, y = d, gn - g
        sy = float(s @ y)
        x, f, g = xn, fn, gn
        info.objective.append(f)
        if decrease <= cfg.tol * abs(info.objective[-2]):
            info.status = "converged"
            return x, info
        t = dd / sy if sy > 0 else 2.0 * t
    info.status = "max_iter"
    return x, info


def cmf_data_term(q, G, C):
    """``||G diag(q) G* - C||_F^2`` and its gradient in ``q``.

    The gradient ``2 |Omega_n| Re(g_n* R g_n)`` of the residual ``R`` is
    formed from matrix products without assembling the normal matrix.
    """
    E = G.entries
    R = (E * q[None, :]) @ E.conj().T - C
    R = 0.5 * (R + R.conj().T)
    value = float(np.vdot(R, R).real)
    gradient = 2.0 * G.grid.cell_measures * kernels.quad_forms(G.steering, R)
    return value, gradient


def cmf_solve(C, G, cfg=ReconConfig(), x0=None):
    """Covariance matrix fitting with optional Tikhonov/l1 penalty and q >= 0."""
    K = _csm_entries(C)
    if K.shape[0] != G.entries.shape[0]:
        raise DimensionError("CSM size does not match the propagation matrix")
    pen, pen_grad = _penalty(cfg)
    fun = lambda q: cmf_data_term(q, G, K)[0] + pen(q)
    grad = lambda q: cmf_data_term(q, G, K)[1] + pen_grad(q)
    start = np.zeros(G.entries.shape[1]) if x0 is None else x0
    q, info = minimize_projected(fun, grad, start, cfg)
    return _result(q, G.grid, info)


def damas_system(I, matrix, form="psf"):
    """Linear system ``(A, b)`` whose solution is ``q`` for a DAMAS map ``I``.

    ``form="psf"``: ``A = psi diag(|Omega|)``, ``b = I``.
    ``form="normal"``: ``A`` is :func:`normal_matrix` and ``b`` the map
    rescaled by ``||P_n||_F^2``, i.e. ``b = adjoint_csm(C)``.
    """
    b = _values(I)
    n = b.shape[0]
    if form == "psf":
        A = np.asarray(getattr(matrix, "entries", matrix), dtype=float)
        if A.shape != (n, n):
            raise DimensionError("PSF and map sizes differ")
        return A * _cell_measures(I, matrix, n)[None, :], b
    if form == "normal":
        A = np.asarray(matrix, dtype=float)
        if A.shape != (n, n):
            raise DimensionError("normal matrix and map sizes differ")
        w = _cell_measures(I, None, n)
        return A, b * np.diag(A) / w
    raise ValueError(f"unknown form {form!r}")


def damas_tikhonov(I, matrix, cfg=ReconConfig(), form="psf"):
    """Regularized DAMAS: minimize ``||A q - b||^2 + alpha R(q)`` over q >= 0."""
    A, b = damas_system(I, matrix, form)
    pen, pen_grad = _penalty(cfg)

    def fun(q):
        r = A @ q - b
        return float(r @ r) + pen(q)

    def grad(q):
        return 2.0 * (A.T @ (A @ q - b)) + pen_grad(q)

    q, info = minimize_projected(fun, grad, np.zeros(b.shape[0]), cfg)
    return _result(q, getattr(I, "grid", None), info)


def normalize_map(q, threshold=0.1):
    """Scale a map to max 1 and mask entries below ``threshold``.

    Returns ``(normalized, mask)``; a map without positive entries gives
    zeros and an empty mask.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    v = _values(q)
    top = v.max() if v.size else 0.0
    if not top > 0:
        return SourceMap(np.zeros_like(v), getattr(q, "grid", None)), np.zeros(v.shape, bool)
    out = v / top
    return SourceMap(out, getattr(q, "grid", None)), out >= threshold


def require_converged(result):
    """Raise :class:`ConvergenceError` if a solver result did not converge."""
    info = getattr(result, "info", None)
    if info is not None and not info.converged:
        raise ConvergenceError(f"solver stopped with status {info.status!r}")
    return result
