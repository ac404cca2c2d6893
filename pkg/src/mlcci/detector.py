"""Per-subcarrier joint maximum-likelihood detection of desired and CCI symbols.

For every data cell the receiver builds the replica ``sum_k h_k x_k`` for all
``M**(K+1)`` symbol hypotheses and keeps the one closest to the received
value. Hypotheses are enumerated lexicographically over constellation
indices with the desired symbol outermost; ties go to the lowest index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .modem import N_PILOT_ROWS, QPSK_POINTS, demap_qpsk


@dataclass(frozen=True)
class ReplicaCandidate:
    hypothesis: tuple
    replica: complex
    dist2: float


def hypothesis_table(n_links: int, m: int) -> np.ndarray:
    """Constellation index tuples, shape ``(m**n_links, n_links)``, enumeration order."""
    return np.array(list(itertools.product(range(m), repeat=n_links)), dtype=np.intp)


def enumerate_replicas(h_hats, constellation=QPSK_POINTS, y=None) -> list[ReplicaCandidate]:
    """All replicas for one subcarrier. ``dist2`` is NaN unless ``y`` is given."""
    h = np.asarray(h_hats, dtype=complex).reshape(-1)
    const = np.asarray(constellation, dtype=complex)
    if h.size < 2:
        raise ValueError("need the desired link and at least one interferer")
    if const.size < 2:
        raise ValueError("constellation needs at least 2 points")
    out = []
    for idx in hypothesis_table(h.size, const.size):
        sym = const[idx]
        rep = complex(np.dot(h, sym))
        d2 = float("nan") if y is None else abs(y - rep) ** 2
        out.append(ReplicaCandidate(tuple(complex(s) for s in sym), rep, d2))
    return out


def replica_matrix(h_hats: np.ndarray, constellation=QPSK_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Replicas for many cells at once.

    ``h_hats`` has shape ``(n_links, ...)``. Returns the hypothesis index table
    and replicas of shape ``(n_hyp, ...)``.
    """
    h = np.asarray(h_hats, dtype=complex)
    const = np.asarray(constellation, dtype=complex)
    table = hypothesis_table(h.shape[0], const.size)
    sym = const[table]  # (n_hyp, n_links)
    extra = (1,) * (h.ndim - 1)
    rep = sym[:, 0].reshape(-1, *extra) * h[0]
    # plain elementwise sum keeps exact ties exact (e.g. swapped symbols on equal channels)
    for k in range(1, h.shape[0]):
        rep = rep + sym[:, k].reshape(-1, *extra) * h[k]
    return table, rep


def mle_detect_cells(y: np.ndarray, h_hats: np.ndarray, constellation=QPSK_POINTS):
    """Vectorized joint ML decision.

    ``y`` has any shape S and ``h_hats`` shape ``(n_links,) + S`` (or anything
    broadcastable). Returns ``(indices, dist2)`` where ``indices`` has shape
    ``(n_links,) + S`` holding the chosen constellation index per link.
    """
    y = np.asarray(y, dtype=complex)
    table, rep = replica_matrix(h_hats, constellation)
    d2 = np.abs(y[None] - rep) ** 2
    best = np.argmin(d2, axis=0)  # first minimum -> lowest enumeration index
    dmin = np.take_along_axis(d2, best[None], axis=0)[0]
    return np.moveaxis(table[best], -1, 0), dmin


def mle_detect(y_l: complex, h_hats, constellation=QPSK_POINTS):
    """Decide one subcarrier. Returns ``(desired, interferers, dist2)`` as symbols."""
    const = np.asarray(constellation, dtype=complex)
    idx, d2 = mle_detect_cells(np.asarray(y_l), np.asarray(h_hats, dtype=complex),
                               const)
    sym = const[idx]
    return complex(sym[0]), tuple(complex(s) for s in sym[1:]), float(d2)


def detect_frame(rx_grid: np.ndarray, estimates) -> np.ndarray:
    """Detect every data cell of a received frame; returns the desired bits.

    ``estimates`` is a sequence of 64-point channel estimates (arrays or
    objects with ``h_hat``), desired link first, each held fixed over the
    frame's data rows. A ``(51, 64)`` array per link gives per-symbol
    responses instead (perfect-CSI mode).
    """
    h = np.stack([np.asarray(getattr(e, "h_hat", e)) for e in estimates])
    if h.ndim == 2:
        h = h[:, None, :]
    data = np.asarray(rx_grid)[N_PILOT_ROWS:]
    idx, _ = mle_detect_cells(data, h)
    return demap_qpsk(QPSK_POINTS[idx[0]])
