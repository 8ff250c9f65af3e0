"""Numerical certification of the model identities the package relies on.

Every check returns a :class:`DiagnosticEntry`; :func:`run_all` collects them
into a :class:`DiagnosticReport` that can be rendered as text or JSON.
"""

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import (
    FocusGrid,
    MicArray,
    adjoint_csm,
    forward_csm,
    propagation_matrix,
    vec_linearization,
)
from .physics import (
    FlowConfig,
    farfield_leading,
    flow_frame_rotation,
    greens,
    lorentz_reference,
)
from .recon import normal_matrix, psf_matrix
from .synth import estimate_csm, simulate_ensemble

TOLERANCES = {
    "adjoint": 1e-12,
    "normal_equation": 1e-12,
    "asymptotics_d2": 0.1,
    "asymptotics_d3": 0.1,
    "lorentz": 1e-10,
    "injectivity": 1e-10,
    "kernel_nonuniqueness": 1e-10,
    "hs_bound": 1e-9,
    "mc_convergence": (0.3, 0.8),
}


@dataclass
class DiagnosticEntry:
    name: str
    value: object
    tolerance: object
    passed: bool
    runtime: float = 0.0
    details: dict = field(default_factory=dict)


@dataclass
class DiagnosticReport:
    entries: list = field(default_factory=list)
    seed: int = 0

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self):
        return [e.name for e in self.entries]

    def to_text(self):
        lines = [f"aeromap verification report (seed {self.seed})"]
        for e in self.entries:
            status = "PASS" if e.passed else "FAIL"
            lines.append(f"{status}  {e.name:<22} value={_fmt(e.value):<28} "
                         f"tol={_fmt(e.tolerance):<16} {e.runtime:8.3f}s")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        payload = {"seed": self.seed, "passed": self.passed,
                   "checks": [_jsonable(asdict(e)) for e in self.entries]}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _fmt(v):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, (float, np.floating)):
        return f"{v:.3e}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        entry = fn(*args, **kwargs)
        entry.runtime = time.perf_counter() - t0
        return entry

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _random_hermitian(rng, m):
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return 0.5 * (a + a.conj().T)


def random_scenario(M, N, seed, flow=None):
    """Random 3-D geometry: M microphones on a plane, N focus points in a slab."""
    flow = flow or FlowConfig.default(3)
    rng = np.random.default_rng(seed)
    mics = np.column_stack([rng.uniform(-0.5, 0.5, (M, 2)), np.full(M, 1.0)])
    pts = np.column_stack([rng.uniform(-0.2, 0.2, (N, 2)), rng.uniform(-0.05, 0.05, N)])
    w = rng.uniform(0.5e-3, 2e-3, N)
    return MicArray(mics), FocusGrid(pts, w), flow


@_timed
def check_adjoint(M=8, N=20, seed=0, pairs=20, flow=None, tol=TOLERANCES["adjoint"]):
    """Relative defect of ``<C(q), K>_F = sum_n q_n |Omega_n| (C* K)_n``."""
    array, grid, flow = random_scenario(M, N, seed, flow)
    G = propagation_matrix(array, grid, flow)
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(pairs):
        q = rng.uniform(0.0, 1.0, N)
        K = _random_hermitian(rng, M)
        worst = max(worst, adjoint_defect(q, K, G))
    return DiagnosticEntry("adjoint", worst, tol, worst < tol, details={"M": M, "N": N})


def adjoint_defect(q, K, G):
    C = forward_csm(q, G).entries
    lhs = np.vdot(K, C)  # <C, K>_F = sum conj(K) C
    rhs = float(np.sum(q * G.grid.cell_measures * G.adjoint(K)))
    scale = np.linalg.norm(C) * np.linalg.norm(K)
    return 0.0 if scale == 0 else abs(lhs - rhs) / scale


def normal_equation_defects(G):
    """Entrywise defects of the two scalings of the normal-equation identity.

    ``damas``: ``diag(||P_n||^2) psi diag(|Omega|) = A``.
    ``source_first``: ``psi^T diag(||P_n'||^2 |Omega_n'|) = A``.
    """
    A = normal_matrix(G)
    psi = psf_matrix(G)
    w = G.grid.cell_measures
    scale = np.abs(A).max()
    damas = psi.monopole_norms[:, None] * psi.entries * w[None, :]
    source_first = psi.source_first * (psi.monopole_norms * w)[None, :]
    return (np.abs(damas - A).max() / scale, np.abs(source_first - A).max() / scale)


@_timed
def check_normal_equation(G, tol=TOLERANCES["normal_equation"]):
    """Scaled PSF reproduces the normal matrix of the CMF problem."""
    damas, source_first = normal_equation_defects(G)
    value = max(damas, source_first)
    return DiagnosticEntry("normal_equation", value, tol, value < tol,
                           details={"damas_scaling": damas, "source_first_scaling": source_first})


def asymptotic_slope(flow, radii=None, samples=16, seed=0, y_radius=0.1):
    """Log-log slope of ``max |g - farfield_leading|`` against ``|x|``."""
    d = flow.dimension
    radii = np.logspace(2, 4, 9) if radii is None else np.asarray(radii)
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, d))
    u /= np.linalg.norm(u, axis=1)[:, None]
    y = rng.standard_normal((samples, d))
    y *= (y_radius * rng.uniform(0, 1, samples) ** (1.0 / d) / np.linalg.norm(y, axis=1))[:, None]
    err = []
    for r in radii:
        x = r * u
        err.append(np.abs(np.asarray(greens(x, y, flow)) - np.asarray(farfield_leading(x, y, flow))).max())
    err = np.array(err)
    if np.any(err <= 0):
        raise ValueError("degenerate asymptotic fit (zero residual)")
    slope = np.polyfit(np.log(radii), np.log(err), 1)[0]
    return slope, err


@_timed
def check_asymptotics(d=3, flow=None, samples=16, seed=0, tol=None):
    """Remainder of the far-field expansion decays like ``|x|^(-(d+1)/2)``."""
    flow = flow or FlowConfig.default(d)
    tol = TOLERANCES[f"asymptotics_d{d}"] if tol is None else tol
    slope, err = asymptotic_slope(flow, samples=samples, seed=seed)
    expected = -(d + 1) / 2.0
    return DiagnosticEntry(f"asymptotics_d{d}", slope, tol, abs(slope - expected) <= tol,
                           details={"expected": expected, "residuals": err})


def lorentz_deviation(flow, pairs=100, seed=0):
    """Max relative deviation between ``greens`` and the Lorentz reference.

    Non-aligned Mach vectors are handled by rotating into the flow frame.
    """
    rng = np.random.default_rng(seed)
    d = flow.dimension
    x = rng.uniform(-2.0, 2.0, (pairs, d))
    y = rng.uniform(-0.5, 0.5, (pairs, d))
    R = flow_frame_rotation(flow)
    along = np.zeros(d)
    along[0] = np.linalg.norm(flow.mach_vector)
    aligned = FlowConfig(tuple(along), flow.sound_speed, flow.frequency)
    g = np.asarray(greens(x, y, flow))
    ref = np.asarray(lorentz_reference(x @ R.T, y @ R.T, aligned))
    return float(np.max(np.abs(g - ref) / np.abs(ref)))


LORENTZ_CASES = ((3, 0.15), (2, 0.3), (3, 0.6))


@_timed
def check_lorentz(cases=LORENTZ_CASES, seed=0, tol=TOLERANCES["lorentz"]):
    """Green's functions agree with the Lorentz-transformed zero-flow kernel."""
    devs = {}
    for d, m in cases:
        mach = np.zeros(d)
        mach[0] = m
        devs[f"d{d}_m{m}"] = lorentz_deviation(FlowConfig(tuple(mach)), seed=seed)
    value = max(devs.values())
    return DiagnosticEntry("lorentz", value, tol, value < tol, details=devs)


def injectivity(G):
    """Singular values of ``q -> vec(forward_csm(q))`` over real ``q``."""
    L = vec_linearization(G)
    s = np.linalg.svd(np.vstack([L.real, L.imag]), compute_uv=False)
    return s


@_timed
def check_injectivity(G, tol=TOLERANCES["injectivity"]):
    """Full column rank of the linearized forward map (discrete uniqueness)."""
    s = injectivity(G)
    M, N = G.shape
    ratio = float(s[-1] / s[0]) if N <= M * M else 0.0
    return DiagnosticEntry("injectivity", ratio, tol, N <= M * M and ratio > tol,
                           details={"sigma_min": s[-1], "sigma_max": s[0], "M": M, "N": N})


def null_vector(G):
    """Unit complex vector in the kernel of ``G`` (needs N > M)."""
    M, N = G.shape
    if N <= M:
        raise ValueError(f"kernel of G is trivial for N={N} <= M={M}")
    _, _, vh = np.linalg.svd(G.entries)
    return vh[-1].conj()


def correlated_source_ratio(G, v):
    S = np.outer(v, v.conj())
    C = G.entries @ S @ G.entries.conj().T
    return np.linalg.norm(C) / np.vdot(v, v).real


@_timed
def check_kernel_nonuniqueness(G, tol=TOLERANCES["kernel_nonuniqueness"]):
    """A correlated source ``v v*`` with ``v`` in ker G radiates nothing."""
    v = null_vector(G)
    ratio = correlated_source_ratio(G, v)
    gnorm = np.linalg.norm(G.entries, 2)
    null_res = np.linalg.norm(G.entries @ v) / np.linalg.norm(v)
    relative = ratio / gnorm**2
    diag_part = np.abs(v) ** 2
    radiated = np.linalg.norm(G.entries @ np.diag(diag_part) @ G.entries.conj().T) / gnorm**2
    ok = ratio < tol and relative < tol and null_res < 1e-12
    return DiagnosticEntry("kernel_nonuniqueness", ratio, tol, ok,
                           details={"null_residual": null_res, "relative_to_norm_G": relative,
                                    "diagonal_part_radiation": radiated})


def measurement_samples(array, shape=(6, 6, 2), thickness=0.1):
    """Midpoint lattice over the array's bounding box, thickened normal to it."""
    pos = array.positions
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    d = pos.shape[1]
    shape = shape[:d]
    lo = lo - 0.5 * thickness * (hi == lo)
    hi = hi + 0.5 * thickness * (hi == lo)
    edges = [np.linspace(a, b, n + 1) for a, b, n in zip(lo, hi, shape)]
    centres = [0.5 * (e[1:] + e[:-1]) for e in edges]
    mesh = np.meshgrid(*centres, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    weight = float(np.prod([(b - a) / n for a, b, n in zip(lo, hi, shape)]))
    return pts, np.full(len(pts), weight)


def hs_bound_terms(q, samples, weights, grid, flow):
    """``(||c_q||^2, ||q||^2 ||kappa||^2)`` by midpoint quadrature."""
    g = np.asarray(greens(samples[:, None, :], grid.points[None, :, :], flow))
    w = grid.cell_measures
    c = (g * (q * w)[None, :]) @ g.conj().T
    lhs = float(np.real(np.einsum("ij,i,j->", np.abs(c) ** 2, weights, weights)))
    g2 = np.abs(g) ** 2
    kappa = float(np.einsum("in,jn,i,j,n->", g2, g2, weights, weights, w))
    return lhs, float(np.sum(q * q * w)) * kappa


@_timed
def check_hs_bound(array, grid, flow, count=10, seed=0, tol=TOLERANCES["hs_bound"]):
    """``||c_q||^2 <= ||q||^2 ||kappa||^2`` for random and constant ``q``."""
    samples, weights = measurement_samples(array)
    rng = np.random.default_rng(seed)
    qs = [rng.uniform(0.0, 1.0, grid.size) for _ in range(count)] + [np.ones(grid.size)]
    worst = -np.inf
    gaps = []
    for q in qs:
        lhs, rhs = hs_bound_terms(q, samples, weights, grid, flow)
        worst = max(worst, (lhs - rhs) / rhs)
        gaps.append(1.0 - lhs / rhs)
    return DiagnosticEntry("hs_bound", worst, tol, worst <= tol,
                           details={"relative_gaps": gaps, "samples": len(samples)})


MC_LEVELS = (100, 400, 1600)


def mc_errors(q, G, seeds, levels=MC_LEVELS):
    """Relative Frobenius errors of snapshot CSMs; shape ``(len(seeds), len(levels))``."""
    exact = forward_csm(q, G).entries
    scale = np.linalg.norm(exact)
    out = np.zeros((len(seeds), len(levels)))
    for i, s in enumerate(seeds):
        offset = 0
        for j, L in enumerate(levels):
            est = estimate_csm(simulate_ensemble(q, G, s, L, first_index=offset)).entries
            out[i, j] = np.linalg.norm(est - exact) / scale
            offset += L
    return out


@_timed
def check_mc_convergence(q, G, seeds, levels=MC_LEVELS, tol=TOLERANCES["mc_convergence"]):
    """Median CSM estimation error halves when the snapshot count quadruples."""
    med = np.median(mc_errors(q, G, seeds, levels), axis=0)
    ratios = [float(med[j + 1] / med[j]) for j in range(len(levels) - 1)]
    lo, hi = tol
    ok = all(lo <= r <= hi for r in ratios) and med[-1] < med[0]
    return DiagnosticEntry("mc_convergence", ratios, tol, ok,
                           details={"levels": list(levels), "median_errors": med})


def run_all(array, grid, flow, q, seed=0, tolerances=None):
    """Run every check once on a scenario; ``tolerances`` overrides defaults."""
    tol = dict(TOLERANCES)
    tol.update(tolerances or {})
    G = propagation_matrix(array, grid, flow)
    wide = propagation_matrix(*random_scenario(8, 40, seed, flow if flow.dimension == 3 else None))
    seeds = [seed * 1000 + i for i in range(10)]
    report = DiagnosticReport(seed=seed)
    report.entries = [
        check_adjoint(seed=seed, tol=tol["adjoint"]),
        check_normal_equation(G, tol=tol["normal_equation"]),
        check_asymptotics(2, seed=seed, tol=tol["asymptotics_d2"]),
        check_asymptotics(3, seed=seed, tol=tol["asymptotics_d3"]),
        check_lorentz(seed=seed, tol=tol["lorentz"]),
        check_injectivity(G, tol=tol["injectivity"]),
        check_kernel_nonuniqueness(wide, tol=tol["kernel_nonuniqueness"]),
        check_hs_bound(array, grid, flow, seed=seed, tol=tol["hs_bound"]),
        check_mc_convergence(q, G, seeds, tol=tol["mc_convergence"]),
    ]
    return report

