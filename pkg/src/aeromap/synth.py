"""Synthetic measurements: random uncorrelated sources to an estimated CSM.

Each snapshot draws from its own Philox stream keyed by the master seed with
the snapshot index placed in the high counter word, so snapshot ``l`` is
reproducible on its own and results do not depend on generation order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, DimensionError
from .geometry import Csm, _powers


def _generator(seed, snapshot_index):
    if snapshot_index < 0:
        raise ValueError("snapshot index must be non-negative")
    bitgen = np.random.Philox(key=int(seed), counter=[0, 0, 0, int(snapshot_index)])
    return np.random.Generator(bitgen)


def sample_amplitudes(q, seed, snapshot_index):
    """Circular complex Gaussian amplitudes with ``E|Pi_n|^2 = q_n``.

    Entry ``n`` is the ``n``-th complex draw of the ``(seed, snapshot_index)``
    stream, scaled by ``sqrt(q_n)``.
    """
    q = _powers(q, np.size(getattr(q, "values", q)))
    z = _generator(seed, snapshot_index).standard_normal((q.shape[0], 2))
    return np.sqrt(q) * (z[:, 0] + 1j * z[:, 1]) / np.sqrt(2.0)


def simulate_snapshot(q, G, seed, index):
    """Microphone pressures ``p = G Pi`` for one realization."""
    q = _powers(q, G.entries.shape[1])
    return G.entries @ sample_amplitudes(q, seed, index)


@dataclass(frozen=True, eq=False)
class SnapshotEnsemble:
    """``(L, M)`` stack of snapshots with the seed that generated them."""

    snapshots: np.ndarray
    seed: int
    frequency: float = float("nan")
    first_index: int = 0

    def __post_init__(self):
        p = np.asarray(self.snapshots, dtype=complex)
        if p.ndim != 2:
            raise DimensionError("snapshots must have shape (L, M)")
        object.__setattr__(self, "snapshots", p)

    def __len__(self):
        return self.snapshots.shape[0]


def simulate_ensemble(q, G, seed, count, first_index=0):
    """Generate ``count`` snapshots with indices ``first_index, first_index+1, ...``."""
    q = _powers(q, G.entries.shape[1])
    p = np.zeros((count, G.entries.shape[0]), dtype=complex)
    for i in range(count):
        p[i] = simulate_snapshot(q, G, seed, first_index + i)
    return SnapshotEnsemble(p, seed, G.flow.frequency, first_index)


def estimate_csm(ensemble):
    """Snapshot-averaged CSM ``(1/L) sum_l p_l p_l*``.

    Accumulates outer products in snapshot order so the result is
    bitwise reproducible.
    """
    p = ensemble.snapshots
    if p.shape[0] < 1:
        raise ValueError("cannot estimate a CSM from an empty ensemble")
    acc = np.zeros((p.shape[1], p.shape[1]), dtype=complex)
    for row in p:
        acc += np.outer(row, row.conj())
    acc /= p.shape[0]
    acc = 0.5 * (acc + acc.conj().T)
    return Csm(acc, snapshots=p.shape[0], frequency=ensemble.frequency, check=False)


def add_noise(C, sigma2):
    """Add uncorrelated sensor self-noise of power ``sigma2`` to every channel."""
    if not (np.isfinite(sigma2) and sigma2 >= 0):
        raise DomainError("noise power must be a finite non-negative number")
    entries = C.entries + sigma2 * np.eye(C.size)
    return Csm(entries, snapshots=C.snapshots, frequency=C.frequency, check=False)
