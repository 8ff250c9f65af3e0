"""Scenario files: flow, geometry, true sources and run parameters.

A scenario is a sectioned ``key = value`` text file::

    [flow]
    mach = 0.15, 0.0, 0.0
    sound_speed = 343.0
    frequency = 8000.0

    [array]
    kind = spiral
    count = 16
    aperture = 1.0
    distance = 1.0

    [grid]
    lower = -0.2, -0.2, 0.0
    upper = 0.2, 0.2, 0.0
    spacing = 0.1, 0.1, 0.1

    [sources]
    indices = 6, 18
    powers = 1.0, 0.5

    [run]
    seed = 0
    snapshots = 1000
    noise = 0.0
    exact = false

Floats are written with ``repr`` so a write/read cycle is lossless. Explicit
array positions use ``positions = x y z; x y z; ...``; sources given by
``coords`` (same syntax) are snapped to the nearest focus point.
"""

import configparser
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AeromapError, ScenarioError
from .geometry import FocusGrid, MicArray, check_pairing, propagation_matrix
from .physics import FlowConfig

ARRAY_KINDS = ("spiral", "grid", "explicit")
_KEYS = {
    "flow": {"mach", "sound_speed", "frequency"},
    "array": {"kind", "count", "aperture", "distance", "positions"},
    "grid": {"lower", "upper", "spacing"},
    "sources": {"indices", "coords", "powers"},
    "run": {"seed", "snapshots", "noise", "exact"},
}


@dataclass(frozen=True)
class ArraySpec:
    kind: str = "spiral"
    count: int = 16
    aperture: float = 1.0
    distance: float = 1.0
    positions: tuple = ()

    def build(self, dimension):
        if self.kind == "explicit":
            pos = np.array(self.positions, dtype=float)
            if pos.ndim != 2 or pos.shape[1] != dimension:
                raise ScenarioError(f"explicit positions must have {dimension} coordinates each")
            return MicArray(pos)
        if self.count < 1:
            raise ScenarioError("array count must be positive")
        make = MicArray.spiral if self.kind == "spiral" else MicArray.grid
        return make(self.count, self.aperture, self.distance, dimension)


@dataclass(frozen=True)
class GridSpec:
    lower: tuple = (-0.2, -0.2, 0.0)
    upper: tuple = (0.2, 0.2, 0.0)
    spacing: tuple = (0.1, 0.1, 0.1)

    def build(self, dimension):
        if not (len(self.lower) == len(self.upper) == dimension and len(self.spacing) in (1, dimension)):
            raise ScenarioError(f"grid lower/upper/spacing must have {dimension} components")
        return FocusGrid.regular(self.lower, self.upper, self.spacing)


@dataclass(frozen=True)
class SourceSpec:
    indices: tuple = ()
    coords: tuple = ()
    powers: tuple = ()

    def powers_on(self, grid):
        """Dense power vector ``q`` on ``grid``."""
        if self.indices and self.coords:
            raise ScenarioError("give sources either by indices or by coords, not both")
        where = list(self.indices)
        if self.coords:
            pts = np.array(self.coords, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != grid.dimension:
                raise ScenarioError(f"source coords must have {grid.dimension} components")
            dist = np.linalg.norm(grid.points[None, :, :] - pts[:, None, :], axis=2)
            where = list(dist.argmin(axis=1))
            lo, hi = grid.box
            if np.any((pts < lo) | (pts > hi)):
                raise ScenarioError("source coordinates outside the focus region")
        if len(where) != len(self.powers):
            raise ScenarioError(f"{len(where)} source locations but {len(self.powers)} powers")
        q = np.zeros(grid.size)
        for n, p in zip(where, self.powers):
            if not 0 <= n < grid.size:
                raise ScenarioError(f"source index {n} outside grid of {grid.size} points")
            if not (np.isfinite(p) and p >= 0):
                raise ScenarioError("source powers must be finite and non-negative")
            q[n] += p
        return q


@dataclass(frozen=True)
class Scenario:
    flow: FlowConfig = field(default_factory=FlowConfig.default)
    array: ArraySpec = ArraySpec()
    grid: GridSpec = GridSpec()
    sources: SourceSpec = SourceSpec(indices=(6, 18), powers=(1.0, 0.5))
    seed: int = 0
    snapshots: int = 1000
    noise: float = 0.0
    exact: bool = False

    @classmethod
    def default(cls, dimension=3):
        """16-microphone spiral 1 m above a 5 x 5 (3-D) or 5-point (2-D) grid."""
        if dimension == 3:
            return cls()
        return cls(flow=FlowConfig.default(2),
                   grid=GridSpec((-0.2, 0.0), (0.2, 0.0), (0.1, 0.1)),
                   sources=SourceSpec(indices=(1, 3), powers=(1.0, 0.5)))

    @property
    def dimension(self):
        return self.flow.dimension

    def mic_array(self):
        return self.array.build(self.dimension)

    def focus_grid(self):
        return self.grid.build(self.dimension)

    def source_powers(self):
        return self.sources.powers_on(self.focus_grid())

    def propagation(self):
        return propagation_matrix(self.mic_array(), self.focus_grid(), self.flow)

    def validate(self):
        """Build the geometry once; raises :class:`ScenarioError` on any problem."""
        try:
            if self.array.kind not in ARRAY_KINDS:
                raise ScenarioError(f"array kind must be one of {ARRAY_KINDS}")
            if self.snapshots < 0 or not (np.isfinite(self.noise) and self.noise >= 0):
                raise ScenarioError("snapshots and noise must be non-negative")
            array, grid = self.mic_array(), self.focus_grid()
            check_pairing(array, grid, self.flow)
            self.sources.powers_on(grid)
        except ScenarioError:
            raise
        except (AeromapError, ValueError) as exc:
            raise ScenarioError(str(exc)) from exc
        return self

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _rows(text):
    return tuple(_floats(row) for row in text.split(";") if row.strip())


def _fmt_floats(values):
    return ", ".join(repr(float(v)) for v in values)


def _fmt_rows(rows):
    return "; ".join(" ".join(repr(float(v)) for v in row) for row in rows)


def dumps(scn):
    """Serialize a scenario to text."""
    lines = ["[flow]",
             f"mach = {_fmt_floats(scn.flow.mach)}",
             f"sound_speed = {float(scn.flow.sound_speed)!r}",
             f"frequency = {float(scn.flow.frequency)!r}",
             "", "[array]", f"kind = {scn.array.kind}"]
    if scn.array.kind == "explicit":
        lines.append(f"positions = {_fmt_rows(scn.array.positions)}")
    else:
        lines += [f"count = {int(scn.array.count)}",
                  f"aperture = {float(scn.array.aperture)!r}",
                  f"distance = {float(scn.array.distance)!r}"]
    lines += ["", "[grid]",
              f"lower = {_fmt_floats(scn.grid.lower)}",
              f"upper = {_fmt_floats(scn.grid.upper)}",
              f"spacing = {_fmt_floats(scn.grid.spacing)}",
              "", "[sources]"]
    if scn.sources.coords:
        lines.append(f"coords = {_fmt_rows(scn.sources.coords)}")
    else:
        lines.append(f"indices = {', '.join(str(int(i)) for i in scn.sources.indices)}")
    lines += [f"powers = {_fmt_floats(scn.sources.powers)}",
              "", "[run]",
              f"seed = {int(scn.seed)}",
              f"snapshots = {int(scn.snapshots)}",
              f"noise = {float(scn.noise)!r}",
              f"exact = {'true' if scn.exact else 'false'}"]
    return "\n".join(lines) + "\n"


def loads(text):
    """Parse scenario text; missing optional keys take the defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc
    for section in parser.sections():
        if section not in _KEYS:
            raise ScenarioError(f"unknown section [{section}]")
        unknown = set(parser[section]) - _KEYS[section]
        if unknown:
            raise ScenarioError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")
    if not parser.has_section("flow"):
        raise ScenarioError("scenario needs a [flow] section")
    get = lambda sec, key: parser.get(sec, key, fallback=None)
    try:
        mach = _floats(get("flow", "mach") or "")
        flow = FlowConfig(mach,
                          float(get("flow", "sound_speed") or FlowConfig.default().sound_speed),
                          float(get("flow", "frequency") or FlowConfig.default().frequency))
        base = Scenario.default(flow.dimension)
        kind = get("array", "kind") or base.array.kind
        array = ArraySpec(kind=kind,
                          count=int(get("array", "count") or base.array.count),
                          aperture=float(get("array", "aperture") or base.array.aperture),
                          distance=float(get("array", "distance") or base.array.distance),
                          positions=_rows(get("array", "positions") or ""))
        grid = GridSpec(*(_floats(get("grid", key)) if get("grid", key) else getattr(base.grid, key)
                          for key in ("lower", "upper", "spacing")))
        if parser.has_section("sources"):
            sources = SourceSpec(
                indices=tuple(int(v) for v in (get("sources", "indices") or "").replace(",", " ").split()),
                coords=_rows(get("sources", "coords") or ""),
                powers=_floats(get("sources", "powers") or ""))
        else:
            sources = base.sources
        run = parser["run"] if parser.has_section("run") else {}
        exact = run.get("exact", "false").strip().lower()
        if exact not in ("true", "false", "1", "0", "yes", "no"):
            raise ScenarioError(f"exact must be true or false, got {exact!r}")
        scn = Scenario(flow, array, grid, sources,
                       seed=int(run.get("seed", base.seed)),
                       snapshots=int(run.get("snapshots", base.snapshots)),
                       noise=float(run.get("noise", base.noise)),
                       exact=exact in ("true", "1", "yes"))
    except ScenarioError:
        raise
    except (AeromapError, ValueError, TypeError) as exc:
        raise ScenarioError(f"invalid scenario value: {exc}") from exc
    return scn.validate()


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump(scn, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(scn))
