"""Least-squares channel estimation from the interleaved pilot preamble."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modem import N_PILOT_ROWS, PilotPattern


@dataclass(frozen=True)
class ChannelEstimate:
    bs_index: int
    h_hat: np.ndarray


def estimate_channel(rx_pilot_rows: np.ndarray, pilot_seq: np.ndarray,
                     pattern: PilotPattern, bs_index: int) -> ChannelEstimate:
    """Per-subcarrier LS estimate averaged over this BS's pilot observations.

    Each subcarrier is seen on two of the four pilot rows; the ratio-domain
    estimates ``y / x`` are averaged with equal weights.
    """
    y = np.asarray(rx_pilot_rows)[:N_PILOT_ROWS]
    x = np.asarray(pilot_seq)
    mask = pattern.mask(bs_index)
    if np.any(x[mask] == 0):
        raise ZeroDivisionError("zero pilot symbol on the pilot support")
    ratio = np.zeros(y.shape, dtype=complex)
    np.divide(y, x, out=ratio, where=mask)
    counts = mask.sum(axis=0)
    if np.any(counts == 0):
        raise ValueError("pilot pattern leaves subcarriers unobserved")
    return ChannelEstimate(bs_index, ratio.sum(axis=0) / counts)
