"""Power-ratio metric, threshold lookup and the one-bit closed power loop."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

BOOST_DB = 3.0

DEFAULT_SIR_ROWS = tuple(range(-20, 40, 5))
DEFAULT_SPEEDS = (10.0, 28.0, 120.0)
# PR thresholds in dB; rows follow DEFAULT_SIR_ROWS, columns DEFAULT_SPEEDS.
DEFAULT_THRESHOLDS = (
    (-20, -20, -15),
    (-15, -15, -10),
    (-10, -7, -7),
    (2, -4, -4),
    (2, 0, 0),
    (5, 5, 4),
    (10, 10, 10),
    (12, 15, 15),
    (14, 18, 18),
    (17, 20, 22),
    (20, 22, 24),
    (22, 24, 26),
)


class UndefinedPowerRatio(ZeroDivisionError):
    """Interferer estimate carries no energy."""


def compute_pr(h1_hat, h2_hat) -> float:
    """Desired-to-interferer estimated channel power ratio in dB, all subcarriers."""
    p1 = float(np.sum(np.abs(np.asarray(h1_hat)) ** 2))
    p2 = float(np.sum(np.abs(np.asarray(h2_hat)) ** 2))
    if p2 <= 0:
        raise UndefinedPowerRatio("interferer channel estimate has zero energy")
    if p1 <= 0:
        return -np.inf
    return 10 * np.log10(p1 / p2)


@dataclass(frozen=True)
class ThresholdTable:
    sir_db: np.ndarray
    speeds_kmh: np.ndarray
    thresholds_db: np.ndarray

    @classmethod
    def default(cls) -> "ThresholdTable":
        return cls(np.array(DEFAULT_SIR_ROWS, dtype=float),
                   np.array(DEFAULT_SPEEDS, dtype=float),
                   np.array(DEFAULT_THRESHOLDS, dtype=float))

    @classmethod
    def from_text(cls, text: str) -> "ThresholdTable":
        """Parse a whitespace table: a header ``<label> speed...`` then ``sir thr...`` rows.

        Blank lines and ``#`` comments are ignored.
        """
        lines = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if len(lines) < 2:
            raise ValueError("threshold table needs a header and at least one row")
        header = lines[0][1:]
        speeds = np.array([float(s.lower().removesuffix("kmh").removesuffix("km/h"))
                           for s in header])
        rows = np.array([[float(v) for v in ln] for ln in lines[1:]])
        if rows.shape[1] != speeds.size + 1:
            raise ValueError("threshold rows must have one value per speed column")
        order = np.argsort(rows[:, 0], kind="stable")
        rows = rows[order]
        return cls(rows[:, 0], speeds, rows[:, 1:])

    @classmethod
    def load(cls, path) -> "ThresholdTable":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        head = "sir_db " + " ".join(f"{s:g}" for s in self.speeds_kmh)
        body = [" ".join(f"{v:g}" for v in (s, *row))
                for s, row in zip(self.sir_db, self.thresholds_db)]
        return "\n".join([head, *body]) + "\n"

    def lookup(self, avg_sir_db: float, speed_kmh: float) -> float:
        # argmin returns the first minimum, i.e. ties go to the lower SIR / speed
        i = int(np.argmin(np.abs(self.sir_db - avg_sir_db)))
        j = int(np.argmin(np.abs(self.speeds_kmh - speed_kmh)))
        return float(self.thresholds_db[i, j])


def lookup_threshold(avg_sir_db: float, speed_kmh: float,
                     table: ThresholdTable | None = None) -> float:
    return (table or ThresholdTable.default()).lookup(avg_sir_db, speed_kmh)


def decide_feedback(pr_db: float, threshold_db: float) -> int:
    return int(pr_db < threshold_db)


def pcu_next_boost(feedback_bit: int) -> float:
    if feedback_bit not in (0, 1):
        raise ValueError(f"feedback bit must be 0 or 1, got {feedback_bit}")
    return BOOST_DB if feedback_bit else 0.0


@dataclass
class PowerControlState:
    """MS-side decision plus the BS-side boost pending for the next frame."""

    threshold: float
    last_pr: float = float("nan")
    feedback_bit: int = 0
    pending_boost_db: float = 0.0

    def update(self, pr_db: float) -> int:
        """Record this frame's PR; returns the feedback bit sent to the PCU."""
        self.last_pr = pr_db
        self.feedback_bit = decide_feedback(pr_db, self.threshold)
        self.pending_boost_db = pcu_next_boost(self.feedback_bit)
        return self.feedback_bit
