"""Theoretical BER with CCI, error accounting and power-control gain bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def theoretical_ber(m: int, sir_list, ebn0: float) -> float:
    """BER of square M-QAM with K co-channel interferers and AWGN.

    ``sir_list`` holds linear SIR values (one per interferer, may be empty or
    contain ``inf``); ``ebn0`` is linear and may be ``inf``. Interference is
    treated as additional Gaussian noise.
    """
    root = math.isqrt(m) if m > 0 else 0
    if m < 4 or root * root != m or m & (m - 1):
        raise ValueError(f"M must be a square power of two >= 4, got {m}")
    sirs = [float(s) for s in sir_list]
    if any(s <= 0 for s in sirs) or ebn0 <= 0:
        raise ValueError("SIR and Eb/N0 must be positive")
    inv = sum(1.0 / s for s in sirs) + 2.0 / (math.log2(m) * ebn0)
    lead = (1.0 / math.log2(root)) * (1.0 - 1.0 / root)
    return lead * (1.0 - 1.0 / math.sqrt((m - 1) / 3.0 * inv + 1.0))


@dataclass
class BerRecord:
    """Per-frame error counts and boost history of one trial."""

    bits_total: list[int] = field(default_factory=list)
    bits_error: list[int] = field(default_factory=list)
    boost_db: list[float] = field(default_factory=list)
    pr_db: list[float] = field(default_factory=list)

    def add_frame(self, n_bits: int, n_err: int, boost_db: float = 0.0,
                  pr_db: float = float("nan")) -> None:
        if not 0 <= n_err <= n_bits:
            raise ValueError("error count out of range")
        self.bits_total.append(int(n_bits))
        self.bits_error.append(int(n_err))
        self.boost_db.append(float(boost_db))
        self.pr_db.append(float(pr_db))

    def merge(self, other: "BerRecord") -> "BerRecord":
        return BerRecord(self.bits_total + other.bits_total,
                         self.bits_error + other.bits_error,
                         self.boost_db + other.boost_db,
                         self.pr_db + other.pr_db)

    @property
    def n_frames(self) -> int:
        return len(self.bits_total)

    @property
    def ber(self) -> float:
        total = sum(self.bits_total)
        return sum(self.bits_error) / total if total else float("nan")

    @property
    def boost_fraction(self) -> float:
        if not self.boost_db:
            return 0.0
        return sum(b > 0 for b in self.boost_db) / len(self.boost_db)

    @property
    def power_penalty_db(self) -> float:
        return power_penalty(self.boost_db) if self.boost_db else 0.0


class SizeMismatch(ValueError):
    pass


def count_bit_errors(tx_bits, rx_bits) -> int:
    tx = np.asarray(tx_bits)
    rx = np.asarray(rx_bits)
    if tx.shape != rx.shape:
        raise SizeMismatch(f"bit streams differ in length: {tx.size} vs {rx.size}")
    return int(np.count_nonzero(tx != rx))


def empirical_ber(tx_bits, rx_bits) -> BerRecord:
    """Single-frame record comparing two bit streams."""
    rec = BerRecord()
    rec.add_frame(np.size(tx_bits), count_bit_errors(tx_bits, rx_bits))
    return rec


def prob_sir_zero(h1, h2, window_db: float = 1.0) -> float:
    """Fraction of subcarriers whose instantaneous SIR is within ``window_db`` of 0 dB.

    Subcarriers where either response is zero are left out.
    """
    if window_db <= 0:
        raise ValueError("window_db must be positive")
    p1 = np.abs(np.asarray(h1)) ** 2
    p2 = np.abs(np.asarray(h2)) ** 2
    ok = (p1 > 0) & (p2 > 0)
    if not ok.any():
        return float("nan")
    sir = 10 * np.log10(p1[ok] / p2[ok])
    return float(np.mean(np.abs(sir) <= window_db))


def power_penalty(boost_history) -> float:
    """Average transmit power relative to nominal, in dB."""
    b = np.asarray(boost_history, dtype=float)
    if b.size == 0:
        raise ValueError("empty boost history")
    return float(10 * np.log10(np.mean(10 ** (b / 10))))


def sir_at_level(sir_db, ber, level: float) -> float:
    """SIR at which a BER curve reaches ``level``, log-linear interpolation.

    The curve is first replaced by its running minimum over increasing SIR, so
    Monte Carlo wiggles and rising stretches do not create extra crossings.
    NaN when the level lies outside the range the curve spans.
    """
    sir = np.asarray(sir_db, dtype=float)
    b = np.asarray(ber, dtype=float)
    order = np.argsort(sir)
    keep = b[order] > 0
    sir, b = sir[order][keep], b[order][keep]
    if level <= 0 or b.size == 0:
        return float("nan")
    env = np.minimum.accumulate(np.log10(b))
    lv = np.log10(level)
    if lv > env[0] or lv < env[-1]:
        return float("nan")
    k = int(np.argmax(env <= lv))
    if k == 0 or env[k] == lv:
        return float(sir[k])
    x0, x1 = sir[k - 1], sir[k]
    y0, y1 = env[k - 1], env[k]
    return float(x0 + (lv - y0) * (x1 - x0) / (y1 - y0))


def matched_shifts(sir_db, ber_pc_on, ber_pc_off):
    """Per-point SIR advantage of the PC-on curve.

    For every grid SIR ``s`` the PC-on BER at ``s`` is taken as the BER level,
    and the shift is the SIR the PC-off curve needs to reach that level minus
    ``s``. Levels the PC-off curve never reaches on the grid give NaN.
    """
    sir = np.asarray(sir_db, dtype=float)
    on = np.asarray(ber_pc_on, dtype=float)
    return np.array([sir_at_level(sir, ber_pc_off, b) - s for s, b in zip(sir, on)])


def effective_gain(sir_db, ber_pc_on, ber_pc_off, penalty_db: float = 0.0) -> float:
    """Mean SIR shift of PC-on over PC-off at matched BER, net of the power penalty.

    NaN (unmeasurable) when no grid point yields a matched level.
    """
    shifts = matched_shifts(sir_db, ber_pc_on, ber_pc_off)
    shifts = shifts[np.isfinite(shifts)]
    if shifts.size == 0:
        return float("nan")
    return float(np.mean(shifts) - penalty_db)
