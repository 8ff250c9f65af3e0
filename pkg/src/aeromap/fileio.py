"""Plain-text CSM and source-map files.

Both formats use ``%.17g`` decimals, so every double survives a round trip
bit for bit, and ``\\n`` line endings so repeated writes are byte-identical.
"""

import numpy as np

from .errors import FileFormatError
from .geometry import Csm

CSM_MAGIC = "# csm v1"
MAP_MAGIC = "# sourcemap v1"


def _g(v):
    return "%.17g" % v


def format_csm(csm):
    K = csm.entries
    M = K.shape[0]
    lines = [CSM_MAGIC, f"# M {M}", f"# freq {_g(csm.frequency)}", f"# snapshots {int(csm.snapshots)}"]
    for i in range(M):
        for j in range(M):
            z = K[i, j]
            lines.append(f"{i} {j} {_g(z.real)} {_g(z.imag)}")
    return "\n".join(lines) + "\n"


def write_csm(path, csm):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_csm(csm))


def _header(lines, key, cast, path):
    for lineno, line in enumerate(lines, 1):
        parts = line.split()
        if len(parts) == 3 and parts[0] == "#" and parts[1] == key:
            try:
                return cast(parts[2])
            except ValueError:
                raise FileFormatError(f"{path}:{lineno}: bad value for '{key}': {parts[2]!r}") from None
    raise FileFormatError(f"{path}: missing header '# {key}'")


def parse_csm(text, path="<csm>"):
    """Parse CSM text; Hermitian symmetry and PSD-ness are checked."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != CSM_MAGIC:
        raise FileFormatError(f"{path}:1: expected '{CSM_MAGIC}'")
    head = [ln for ln in lines if ln.startswith("#")]
    M = _header(head, "M", int, path)
    freq = _header(head, "freq", float, path)
    snaps = _header(head, "snapshots", int, path)
    if M < 1:
        raise FileFormatError(f"{path}: M must be positive")
    K = np.zeros((M, M), dtype=complex)
    seen = np.zeros((M, M), dtype=bool)
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FileFormatError(f"{path}:{lineno}: expected 'i j re im', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            re, im = float(parts[2]), float(parts[3])
        except ValueError:
            raise FileFormatError(f"{path}:{lineno}: cannot parse {line!r}") from None
        if not (0 <= i < M and 0 <= j < M):
            raise FileFormatError(f"{path}:{lineno}: index ({i}, {j}) out of range for M={M}")
        if seen[i, j]:
            raise FileFormatError(f"{path}:{lineno}: duplicate entry ({i}, {j})")
        if not (np.isfinite(re) and np.isfinite(im)):
            raise FileFormatError(f"{path}:{lineno}: non-finite entry")
        K[i, j] = complex(re, im)
        seen[i, j] = True
    if not seen.all():
        raise FileFormatError(f"{path}: {int((~seen).sum())} of {M * M} entries missing")
    return Csm(K, snapshots=snaps, frequency=freq)


def read_csm(path):
    try:
        with open(path, encoding="ascii") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise FileFormatError(f"{path}: not a text file ({exc})") from None
    return parse_csm(text, path)


def format_source_map(values, points, kind="raw"):
    """Header plus ``n x [y] [z] q`` lines; NaN values are written as ``nan``."""
    values = np.asarray(values, dtype=float)
    points = np.asarray(points, dtype=float)
    lines = [MAP_MAGIC, f"# N {len(values)}", f"# d {points.shape[1]}", f"# kind {kind}"]
    for n, (p, v) in enumerate(zip(points, values)):
        coords = " ".join(_g(c) for c in p)
        lines.append(f"{n} {coords} {'nan' if np.isnan(v) else _g(v)}")
    return "\n".join(lines) + "\n"


def write_source_map(path, values, points, kind="raw"):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_source_map(values, points, kind))


def parse_source_map(text, path="<map>"):
    """Return ``(values, points, kind)``."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAP_MAGIC:
        raise FileFormatError(f"{path}:1: expected '{MAP_MAGIC}'")
    head = [ln for ln in lines if ln.startswith("#")]
    N = _header(head, "N", int, path)
    d = _header(head, "d", int, path)
    kind = _header(head, "kind", str, path)
    rows = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != d + 2:
            raise FileFormatError(f"{path}:{lineno}: expected {d + 2} fields")
        try:
            n = int(parts[0])
            nums = [float(v) for v in parts[1:]]
        except ValueError:
            raise FileFormatError(f"{path}:{lineno}: cannot parse {line!r}") from None
        if n != len(rows):
            raise FileFormatError(f"{path}:{lineno}: expected index {len(rows)}, got {n}")
        rows.append(nums)
    if len(rows) != N:
        raise FileFormatError(f"{path}: header says N={N}, found {len(rows)} rows")
    data = np.array(rows, dtype=float).reshape(N, d + 1)
    return data[:, -1], data[:, :-1], kind


def read_source_map(path):
    with open(path, encoding="ascii") as fh:
        return parse_source_map(fh.read(), path)
