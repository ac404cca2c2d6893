"""QPSK mapping, frame assembly and OFDM (de)modulation.

A frame is a ``(55, 64)`` complex array: four pilot rows followed by 51 data
rows. Both transforms are unitary, so energy is the same in the time and the
frequency domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FFT_SIZE = 64
GI_SAMPLES = 16
N_PILOT_ROWS = 4
N_DATA_ROWS = 51
N_ROWS = N_PILOT_ROWS + N_DATA_ROWS
SYMBOL_SAMPLES = FFT_SIZE + GI_SAMPLES
FRAME_SAMPLES = N_ROWS * SYMBOL_SAMPLES
SAMPLE_RATE_HZ = 20e6
BITS_PER_SYMBOL = 2
DATA_BITS_PER_FRAME = N_DATA_ROWS * FFT_SIZE * BITS_PER_SYMBOL

_SQRT2 = np.sqrt(2.0)

# Index i = 2*b0 + b1 -> point. Neighbours differ in exactly one bit.
QPSK_POINTS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / _SQRT2


class FrameSizeError(ValueError):
    """Raised when an input does not have the length a frame requires."""


def map_bits_to_qpsk(bits) -> np.ndarray:
    """Gray-map bit pairs to unit-energy QPSK points.

    ``bits`` has an even length; bit ``2i`` picks the sign of the real part
    and bit ``2i+1`` the sign of the imaginary part (0 -> +, 1 -> -).
    """
    b = np.asarray(bits, dtype=np.int8).reshape(-1)
    if b.size % 2:
        raise FrameSizeError(f"need an even number of bits, got {b.size}")
    b = b.reshape(-1, 2)
    return ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) / _SQRT2


def demap_qpsk(symbols) -> np.ndarray:
    """Hard-decision inverse of :func:`map_bits_to_qpsk`.

    A component exactly on a decision axis (value 0) decides bit 0.
    """
    s = np.asarray(symbols, dtype=complex).reshape(-1)
    out = np.empty((s.size, 2), dtype=np.int8)
    out[:, 0] = s.real < 0
    out[:, 1] = s.imag < 0
    return out.reshape(-1)


def qpsk_indices_to_symbols(idx) -> np.ndarray:
    return QPSK_POINTS[np.asarray(idx)]


@dataclass(frozen=True)
class PilotPattern:
    """Subcarrier support of each BS on each pilot row.

    ``support[bs - 1, row]`` is a boolean mask over the 64 subcarriers. With
    1-based subcarrier numbering, BS 1 uses odd subcarriers on odd (1-based)
    pilot rows and even subcarriers on even rows; BS 2 uses the complement.
    """

    support: np.ndarray

    @classmethod
    def interleaved(cls, n_sc: int = FFT_SIZE) -> "PilotPattern":
        sc = np.arange(1, n_sc + 1)
        support = np.zeros((2, N_PILOT_ROWS, n_sc), dtype=bool)
        for row in range(N_PILOT_ROWS):
            odd_row = (row + 1) % 2 == 1
            bs1 = (sc % 2 == 1) if odd_row else (sc % 2 == 0)
            support[0, row] = bs1
            support[1, row] = ~bs1
        support.setflags(write=False)
        return cls(support)

    def subcarriers(self, bs_index: int, row: int) -> np.ndarray:
        """0-based subcarrier indices used by ``bs_index`` (1 or 2) on ``row``."""
        return np.flatnonzero(self.mask(bs_index)[row])

    def mask(self, bs_index: int) -> np.ndarray:
        if bs_index not in (1, 2):
            raise ValueError(f"bs_index must be 1 or 2, got {bs_index}")
        return self.support[bs_index - 1]


def random_pilots(rng: np.random.Generator, n_sc: int = FFT_SIZE) -> np.ndarray:
    """Pseudo-random unit-energy QPSK pilot values, one per (pilot row, subcarrier)."""
    return QPSK_POINTS[rng.integers(0, 4, size=(N_PILOT_ROWS, n_sc))]


def build_frame(data_bits, pilot_seq: np.ndarray, bs_index: int,
                pattern: PilotPattern) -> np.ndarray:
    """Assemble one ``(55, 64)`` frequency-domain frame for one BS.

    Pilot rows carry ``pilot_seq`` on this BS's pattern subcarriers and zero
    elsewhere, so the other BS's pilots are seen interference-free.
    """
    bits = np.asarray(data_bits)
    if bits.size != DATA_BITS_PER_FRAME:
        raise FrameSizeError(
            f"expected {DATA_BITS_PER_FRAME} data bits, got {bits.size}")
    pilot_seq = np.asarray(pilot_seq, dtype=complex)
    if pilot_seq.shape != (N_PILOT_ROWS, FFT_SIZE):
        raise FrameSizeError(f"pilot_seq must be {(N_PILOT_ROWS, FFT_SIZE)}")
    grid = np.zeros((N_ROWS, FFT_SIZE), dtype=complex)
    grid[:N_PILOT_ROWS] = np.where(pattern.mask(bs_index), pilot_seq, 0)
    grid[N_PILOT_ROWS:] = map_bits_to_qpsk(bits).reshape(N_DATA_ROWS, FFT_SIZE)
    return grid


def apply_power_boost(grid: np.ndarray, boost_db: float) -> np.ndarray:
    if boost_db == 0:
        return grid
    return grid * 10 ** (boost_db / 20)


def ofdm_modulate(grid: np.ndarray, gi: int = GI_SAMPLES) -> np.ndarray:
    """Unitary IFFT per row, cyclic guard interval prepended, rows concatenated."""
    grid = np.asarray(grid)
    t = np.fft.ifft(grid, axis=-1, norm="ortho")
    return np.concatenate([t[:, -gi:], t], axis=-1).reshape(-1)


def ofdm_demodulate(signal: np.ndarray, n_fft: int = FFT_SIZE,
                    gi: int = GI_SAMPLES) -> np.ndarray:
    signal = np.asarray(signal)
    block = n_fft + gi
    if signal.ndim != 1 or signal.size % block or signal.size == 0:
        raise FrameSizeError(
            f"signal length {signal.size} is not a multiple of {block}")
    blocks = signal.reshape(-1, block)[:, gi:]
    return np.fft.fft(blocks, axis=-1, norm="ortho")
