"""Rayleigh fading, multipath propagation, interferer scaling and AWGN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modem import BITS_PER_SYMBOL, FFT_SIZE, GI_SAMPLES, SYMBOL_SAMPLES

SPEED_OF_LIGHT = 2.99792458e8
SYMBOL_DURATION_S = SYMBOL_SAMPLES / 20e6
N_OSCILLATORS = 64


class ChannelConfigError(ValueError):
    pass


def doppler_frequency(speed_kmh: float, carrier_hz: float) -> float:
    """Maximum Doppler shift in Hz."""
    if speed_kmh < 0:
        raise ChannelConfigError(f"speed must be >= 0, got {speed_kmh}")
    return speed_kmh / 3.6 / SPEED_OF_LIGHT * carrier_hz


def normalized_powers(profile) -> np.ndarray:
    """Linear path powers from ``(delay, power_db)`` pairs, summing to 1."""
    p = 10 ** (np.array([pdb for _, pdb in profile], dtype=float) / 10)
    return p / p.sum()


@dataclass
class ChannelRealization:
    """Tap trajectories of one BS->MS link.

    ``taps`` has shape ``(n_symbols, n_paths)``; one value per OFDM symbol.
    """

    delays: np.ndarray
    avg_power: np.ndarray
    taps: np.ndarray
    speed_kmh: float
    carrier_hz: float

    @property
    def n_symbols(self) -> int:
        return self.taps.shape[0]

    def scaled(self, factor: complex) -> "ChannelRealization":
        return ChannelRealization(self.delays, self.avg_power, self.taps * factor,
                                  self.speed_kmh, self.carrier_hz)

    def segment(self, start: int, stop: int) -> "ChannelRealization":
        """Symbols ``start:stop`` as a new realization (shares tap storage)."""
        return ChannelRealization(self.delays, self.avg_power,
                                  self.taps[start:stop], self.speed_kmh,
                                  self.carrier_hz)

    @classmethod
    def static(cls, taps, delays) -> "ChannelRealization":
        """Time-invariant channel with fixed complex ``taps``, for one symbol."""
        taps = np.atleast_1d(np.asarray(taps, dtype=complex))
        delays = np.atleast_1d(np.asarray(delays, dtype=int))
        power = np.abs(taps) ** 2
        total = power.sum()
        return cls(delays, power / total if total else power, taps[None, :],
                   0.0, 0.0)


def sos_rayleigh(rng: np.random.Generator, fd_hz: float, n_symbols: int,
                 t_sym: float = SYMBOL_DURATION_S,
                 n_osc: int = N_OSCILLATORS) -> np.ndarray:
    """Unit-power Rayleigh process with a Clarke/Jakes Doppler spectrum.

    Sum-of-sinusoids with arrival angles spread evenly over a quarter circle
    and a random rotation, plus independent random phases for the in-phase
    and quadrature branches. The real part of the autocorrelation tends to
    J0(2 pi fd tau).
    """
    theta = rng.uniform(-np.pi, np.pi)
    n = np.arange(1, n_osc + 1)
    alpha = (2 * np.pi * n - np.pi + theta) / (4 * n_osc)
    phi = rng.uniform(-np.pi, np.pi, n_osc)
    psi = rng.uniform(-np.pi, np.pi, n_osc)
    w = 2 * np.pi * fd_hz
    t = np.arange(n_symbols) * t_sym
    re = np.zeros(n_symbols)
    im = np.zeros(n_symbols)
    for k in range(n_osc):
        re += np.cos(w * np.cos(alpha[k]) * t + phi[k])
        im += np.cos(w * np.sin(alpha[k]) * t + psi[k])
    return (re + 1j * im) / np.sqrt(n_osc)


def generate_fading(seed, speed_kmh: float, carrier_hz: float,
                    n_symbols: int, profile) -> ChannelRealization:
    """Independent Doppler-faded tap per path, sampled once per OFDM symbol.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts, including a
    ``Generator`` (consumed in place).
    """
    rng = np.random.default_rng(seed)
    if n_symbols < 1:
        raise ChannelConfigError("n_symbols must be >= 1")
    profile = list(profile)
    if not profile:
        raise ChannelConfigError("empty channel profile")
    delays = np.array([int(d) for d, _ in profile])
    if np.any(delays < 0) or np.any(delays >= GI_SAMPLES):
        raise ChannelConfigError(
            f"path delays must lie in [0, {GI_SAMPLES}), got {delays.tolist()}")
    power = normalized_powers(profile)
    fd = doppler_frequency(speed_kmh, carrier_hz)
    taps = np.stack([np.sqrt(p) * sos_rayleigh(rng, fd, n_symbols) for p in power],
                    axis=1)
    return ChannelRealization(delays, power, taps, speed_kmh, carrier_hz)


def transfer_function(ch: ChannelRealization, symbol_index=None,
                      n_fft: int = FFT_SIZE) -> np.ndarray:
    """Per-subcarrier response ``H[l] = sum_p tap_p * exp(-2j pi l d_p / N)``.

    With ``symbol_index=None`` returns all symbols, shape ``(n_symbols, N)``.
    """
    l = np.arange(n_fft)
    steer = np.exp(-2j * np.pi * np.outer(ch.delays, l) / n_fft)
    taps = ch.taps if symbol_index is None else ch.taps[symbol_index]
    return taps @ steer


def propagate(signal: np.ndarray, ch: ChannelRealization,
              symbol_samples: int = SYMBOL_SAMPLES) -> np.ndarray:
    """Multipath with integer delays, tap held constant per OFDM symbol.

    Each delayed copy draws its leading samples from the previous symbol, i.e.
    inter-symbol leakage lands in the guard interval.
    """
    signal = np.asarray(signal, dtype=complex)
    n_sym = signal.size // symbol_samples
    if n_sym * symbol_samples != signal.size or n_sym != ch.n_symbols:
        raise ChannelConfigError(
            f"signal has {signal.size} samples, channel covers {ch.n_symbols} symbols")
    out = np.zeros((n_sym, symbol_samples), dtype=complex)
    for p, d in enumerate(ch.delays):
        shifted = np.concatenate([np.zeros(d, dtype=complex), signal[:signal.size - d]])
        out += ch.taps[:, p:p + 1] * shifted.reshape(n_sym, symbol_samples)
    return out.reshape(-1)


def scale_interferer(signal: np.ndarray, sir_db: float) -> np.ndarray:
    return np.asarray(signal) * 10 ** (-sir_db / 20)


def noise_variance(ebn0_db: float, bits_per_symbol: int = BITS_PER_SYMBOL) -> float:
    """Complex noise variance per cell for unit data-symbol energy."""
    return 1.0 / (bits_per_symbol * 10 ** (ebn0_db / 10))


def add_awgn(grid: np.ndarray, ebn0_db: float, seed) -> np.ndarray:
    """Add circular complex Gaussian noise at the FFT output.

    Eb/N0 is referenced to the used subcarriers; guard-interval energy is not
    counted.
    """
    if np.isinf(ebn0_db) and ebn0_db > 0:
        return grid
    rng = np.random.default_rng(seed)
    s = np.sqrt(noise_variance(ebn0_db) / 2)
    shape = np.shape(grid)
    return grid + s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
