"""Configuration, the frame-by-frame trial loop, sweeps and CSV output."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import analysis, channel, detector, estimator, modem
from .power_control import (PowerControlState, ThresholdTable, UndefinedPowerRatio,
                            compute_pr)

log = logging.getLogger(__name__)

PROFILES = {
    "single": ((0, 0.0),),
    "twopath": ((0, 0.0), (6, -8.0)),
}

# substream ids; order is part of the reproducibility contract
_STREAMS = ("fading_desired", "fading_interferer", "noise", "data_desired",
            "data_interferer", "pilots")


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    carrier_hz: float = 2e9
    bandwidth_hz: float = 20e6
    fft_size: int = 64
    gi_samples: int = 16
    modulation: str = "QPSK"
    n_cells: int = 2
    speed_kmh: float = 10.0
    ebn0_db: float = 18.0
    sir_grid_db: tuple = (-5.0, 0.0, 5.0, 10.0)
    channel_profile: tuple = PROFILES["single"]
    frames_per_trial: int = 2000
    trials: int = 1
    base_seed: int = 1
    pc_enabled: bool = True
    pc_compare: bool = False
    pr_window_db: float = 1.0
    threshold_table_path: str | None = None
    perfect_csi: bool = False

    def validate(self) -> None:
        if self.fft_size != modem.FFT_SIZE or self.gi_samples != modem.GI_SAMPLES:
            raise ConfigError("only the 64-point FFT with a 16-sample GI is supported")
        if self.modulation.upper() != "QPSK":
            raise ConfigError(f"unsupported modulation {self.modulation!r}")
        if self.n_cells != 2:
            raise ConfigError("exactly two cells (one interferer) are simulated")
        if self.bandwidth_hz <= 0 or self.carrier_hz <= 0:
            raise ConfigError("bandwidth and carrier must be positive")
        if self.speed_kmh < 0:
            raise ConfigError("speed must be non-negative")
        if self.frames_per_trial < 1 or self.trials < 1:
            raise ConfigError("frames_per_trial and trials must be >= 1")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be non-negative")
        if not self.sir_grid_db:
            raise ConfigError("sir_grid_db is empty")
        if self.pr_window_db <= 0:
            raise ConfigError("pr_window_db must be positive")
        if not self.channel_profile:
            raise ConfigError("channel_profile is empty")
        for d, _ in self.channel_profile:
            if not 0 <= int(d) < self.gi_samples:
                raise ConfigError(f"path delay {d} outside the guard interval")
        if self.threshold_table_path and not Path(self.threshold_table_path).is_file():
            raise ConfigError(f"threshold table {self.threshold_table_path} not found")

    @property
    def symbol_duration_s(self) -> float:
        return (self.fft_size + self.gi_samples) / self.bandwidth_hz

    def threshold_table(self) -> ThresholdTable:
        if self.threshold_table_path:
            return ThresholdTable.load(self.threshold_table_path)
        return ThresholdTable.default()


def parse_profile(text: str) -> tuple:
    """``single``, ``twopath``, a path to a profile file, or ``"0:0, 6:-8"``."""
    text = text.strip()
    if text in PROFILES:
        return PROFILES[text]
    p = Path(text)
    if ":" not in text and p.is_file():
        text = ",".join(ln.split("#", 1)[0].strip().replace(" ", ":", 1)
                        for ln in p.read_text().splitlines()
                        if ln.split("#", 1)[0].strip())
    try:
        pairs = []
        for item in text.replace(";", ",").split(","):
            if not item.strip():
                continue
            d, pdb = item.split(":")
            pairs.append((int(d), float(pdb)))
    except ValueError as e:
        raise ConfigError(f"bad channel profile {text!r}") from e
    if not pairs:
        raise ConfigError("empty channel profile")
    return tuple(pairs)


def _parse_bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _coerce(name: str, value: str):
    if name == "sir_grid_db":
        return tuple(float(x) for x in value.replace(";", ",").split(",") if x.strip())
    if name == "channel_profile":
        return parse_profile(value)
    if name == "threshold_table_path":
        return value.strip() or None
    if name in ("pc_enabled", "pc_compare", "perfect_csi"):
        return _parse_bool(value)
    kind = {f.name: f.type for f in fields(SimConfig)}[name]
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value)
    return value.strip()


def config_from_mapping(values: dict, base: SimConfig | None = None) -> SimConfig:
    known = {f.name for f in fields(SimConfig)}
    updates = {}
    for k, v in values.items():
        if k not in known:
            raise ConfigError(f"unknown config key {k!r}")
        try:
            updates[k] = _coerce(k, v) if isinstance(v, str) else v
        except ValueError as e:
            raise ConfigError(f"bad value for {k}: {v!r}") from e
    return replace(base or SimConfig(), **updates)


def load_config(path) -> SimConfig:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        values[k.strip()] = v.strip()
    return config_from_mapping(values)


def dump_config(cfg: SimConfig) -> str:
    out = []
    for k, v in asdict(cfg).items():
        if k == "sir_grid_db":
            v = ", ".join(f"{x:g}" for x in v)
        elif k == "channel_profile":
            v = ", ".join(f"{d}:{p:g}" for d, p in v)
        elif v is None:
            v = ""
        out.append(f"{k} = {v}")
    return "\n".join(out) + "\n"


def _sir_key(sir_db: float) -> int:
    if math.isinf(sir_db):
        return 2**40 + (sir_db > 0)
    k = int(round(sir_db * 1000))
    return 2 * k if k >= 0 else -2 * k - 1


def trial_streams(seed: int, sir_db: float) -> dict[str, np.random.Generator]:
    """Independent generators per random quantity of one (seed, SIR) trial.

    The PC setting is deliberately absent so PC-on and PC-off runs see the
    same fading, noise and data.
    """
    ss = np.random.SeedSequence([int(seed), _sir_key(sir_db)])
    return {name: np.random.default_rng(child)
            for name, child in zip(_STREAMS, ss.spawn(len(_STREAMS)))}


@dataclass(frozen=True)
class ResultRow:
    sir_db: float
    speed_kmh: float
    ebn0_db: float
    pc_enabled: bool
    ber: float
    ber_theory: float
    boost_fraction: float
    power_penalty_db: float
    frames: int
    seed: int


CSV_COLUMNS = tuple(f.name for f in fields(ResultRow))


@dataclass
class TrialResult:
    row: ResultRow
    record: analysis.BerRecord
    feedback: list[int] = field(default_factory=list)
    prob_sir_zero: list[float] = field(default_factory=list)


def theory_for(sir_db: float, ebn0_db: float) -> float:
    sirs = [] if math.isinf(sir_db) and sir_db > 0 else [10 ** (sir_db / 10)]
    ebn0 = math.inf if math.isinf(ebn0_db) and ebn0_db > 0 else 10 ** (ebn0_db / 10)
    return analysis.theoretical_ber(4, sirs, ebn0)


def simulate_trial(cfg: SimConfig, sir_db: float, seed: int,
                   pc_enabled: bool | None = None) -> TrialResult:
    """Run ``cfg.frames_per_trial`` consecutive frames for one SIR point.

    Frame k's feedback sets frame k+1's transmit boost. Fading runs
    continuously across frames.
    """
    cfg.validate()
    pc = cfg.pc_enabled if pc_enabled is None else pc_enabled
    rng = trial_streams(seed, sir_db)
    n_frames = cfg.frames_per_trial
    n_sym = n_frames * modem.N_ROWS
    ch1 = channel.generate_fading(rng["fading_desired"], cfg.speed_kmh, cfg.carrier_hz,
                                  n_sym, cfg.channel_profile)
    ch2 = channel.generate_fading(rng["fading_interferer"], cfg.speed_kmh,
                                  cfg.carrier_hz, n_sym, cfg.channel_profile)
    if cfg.symbol_duration_s != channel.SYMBOL_DURATION_S:
        raise ConfigError("fading time base assumes a 20 MHz sample rate")
    pattern = modem.PilotPattern.interleaved()
    pilots1 = modem.random_pilots(rng["pilots"])
    pilots2 = modem.random_pilots(rng["pilots"])
    interf_gain = 0.0 if math.isinf(sir_db) and sir_db > 0 else 10 ** (-sir_db / 20)

    state = PowerControlState(threshold=cfg.threshold_table().lookup(sir_db, cfg.speed_kmh))
    record = analysis.BerRecord()
    feedback, p0 = [], []
    for k in range(n_frames):
        boost = state.pending_boost_db if pc else 0.0
        sl = slice(k * modem.N_ROWS, (k + 1) * modem.N_ROWS)
        seg1, seg2 = ch1.segment(sl.start, sl.stop), ch2.segment(sl.start, sl.stop)

        bits1 = rng["data_desired"].integers(0, 2, modem.DATA_BITS_PER_FRAME, dtype=np.int8)
        bits2 = rng["data_interferer"].integers(0, 2, modem.DATA_BITS_PER_FRAME, dtype=np.int8)
        g1 = modem.apply_power_boost(modem.build_frame(bits1, pilots1, 1, pattern), boost)
        g2 = modem.build_frame(bits2, pilots2, 2, pattern)

        rx = channel.propagate(modem.ofdm_modulate(g1), seg1)
        if interf_gain:
            rx = rx + channel.scale_interferer(
                channel.propagate(modem.ofdm_modulate(g2), seg2), sir_db)
        y = channel.add_awgn(modem.ofdm_demodulate(rx), cfg.ebn0_db, rng["noise"])

        if cfg.perfect_csi:
            h1 = channel.transfer_function(seg1) * 10 ** (boost / 20)
            h2 = channel.transfer_function(seg2) * interf_gain
            pr_h1, pr_h2 = h1[:modem.N_PILOT_ROWS].mean(0), h2[:modem.N_PILOT_ROWS].mean(0)
            det_h = [h1[modem.N_PILOT_ROWS:], h2[modem.N_PILOT_ROWS:]]
        else:
            pilot_rows = y[:modem.N_PILOT_ROWS]
            pr_h1 = estimator.estimate_channel(pilot_rows, pilots1, pattern, 1).h_hat
            pr_h2 = estimator.estimate_channel(pilot_rows, pilots2, pattern, 2).h_hat
            det_h = [pr_h1, pr_h2]

        try:
            pr = compute_pr(pr_h1, pr_h2)
        except UndefinedPowerRatio:
            pr = math.inf
        if pc:
            feedback.append(state.update(pr))
        p0.append(analysis.prob_sir_zero(pr_h1, pr_h2, cfg.pr_window_db)
                  if np.any(pr_h2) else 0.0)

        rx_bits = detector.detect_frame(y, det_h)
        record.add_frame(bits1.size, analysis.count_bit_errors(bits1, rx_bits),
                         boost, pr)

    row = ResultRow(
        sir_db=float(sir_db), speed_kmh=float(cfg.speed_kmh), ebn0_db=float(cfg.ebn0_db),
        pc_enabled=bool(pc), ber=record.ber, ber_theory=theory_for(sir_db, cfg.ebn0_db),
        boost_fraction=record.boost_fraction, power_penalty_db=record.power_penalty_db,
        frames=n_frames, seed=int(seed))
    return TrialResult(row, record, feedback, p0)


def run_trial(cfg: SimConfig, sir_db: float, seed: int,
              pc_enabled: bool | None = None) -> ResultRow:
    return simulate_trial(cfg, sir_db, seed, pc_enabled).row


def sweep_tasks(cfg: SimConfig) -> list[tuple[float, bool, int]]:
    modes = (True, False) if cfg.pc_compare else (cfg.pc_enabled,)
    return [(float(s), pc, cfg.base_seed + t)
            for s in cfg.sir_grid_db for pc in modes for t in range(cfg.trials)]


def _task(args):
    cfg, sir, pc, seed = args
    return run_trial(cfg, sir, seed, pc)


def row_sort_key(r: ResultRow):
    return (r.sir_db, not r.pc_enabled, r.seed)


def sweep(cfg: SimConfig, jobs: int = 1, tasks=None) -> list[ResultRow]:
    """All (SIR, PC mode, trial) combinations, sorted by SIR, PC on first, seed."""
    cfg.validate()
    tasks = sweep_tasks(cfg) if tasks is None else tasks
    work = [(cfg, s, pc, seed) for s, pc, seed in tasks]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_task, work))
    else:
        rows = []
        for w in work:
            rows.append(_task(w))
            log.info("sir=%g pc=%s seed=%d ber=%.3e", w[1], w[2], w[3], rows[-1].ber)
    return sorted(rows, key=row_sort_key)


def _fmt(name: str, v) -> str:
    if name in ("ber", "ber_theory"):
        return f"{v:.16e}"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(c, getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        out.append(ResultRow(
            sir_db=float(rec["sir_db"]), speed_kmh=float(rec["speed_kmh"]),
            ebn0_db=float(rec["ebn0_db"]), pc_enabled=rec["pc_enabled"] == "1",
            ber=float(rec["ber"]), ber_theory=float(rec["ber_theory"]),
            boost_fraction=float(rec["boost_fraction"]),
            power_penalty_db=float(rec["power_penalty_db"]),
            frames=int(rec["frames"]), seed=int(rec["seed"])))
    return out


def trace_csv(result: TrialResult) -> str:
    """Per-frame trace: index, PR, feedback sent, boost applied, frame BER."""
    rec = result.record
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("frame", "pr_db", "feedback", "boost_db", "frame_ber", "prob_sir_zero"))
    for k in range(rec.n_frames):
        fb = result.feedback[k] if k < len(result.feedback) else 0
        w.writerow((k, repr(rec.pr_db[k]), fb, repr(rec.boost_db[k]),
                    f"{rec.bits_error[k] / rec.bits_total[k]:.16e}",
                    repr(result.prob_sir_zero[k])))
    return buf.getvalue()


def aggregate(rows) -> dict[tuple[float, bool], dict]:
    """Pool trials per (SIR, PC mode): BER over all bits, penalty over all frames."""
    groups: dict[tuple[float, bool], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.sir_db, r.pc_enabled), []).append(r)
    out = {}
    for key, rs in groups.items():
        frames = np.array([r.frames for r in rs], dtype=float)
        ber = float(np.sum(frames * [r.ber for r in rs]) / frames.sum())
        lin = np.sum(frames * 10 ** (np.array([r.power_penalty_db for r in rs]) / 10))
        out[key] = {"ber": ber, "frames": int(frames.sum()),
                    "power_penalty_db": float(10 * np.log10(lin / frames.sum())),
                    "boost_fraction": float(np.sum(frames * [r.boost_fraction for r in rs])
                                            / frames.sum())}
    return out


def cell_edge_gain(rows, lo: float = -5.0, hi: float = 10.0) -> dict:
    """PC gain over the cell-edge SIR range from paired PC-on/PC-off rows."""
    agg = aggregate(rows)
    sirs = sorted({s for s, _ in agg if lo <= s <= hi and (s, True) in agg and (s, False) in agg})
    if not sirs:
        raise ValueError("no SIR point has both PC-on and PC-off results")
    on = np.array([agg[(s, True)]["ber"] for s in sirs])
    off = np.array([agg[(s, False)]["ber"] for s in sirs])
    frames = np.array([agg[(s, True)]["frames"] for s in sirs], dtype=float)
    pen_lin = np.array([10 ** (agg[(s, True)]["power_penalty_db"] / 10) for s in sirs])
    penalty = float(10 * np.log10(np.sum(frames * pen_lin) / frames.sum()))
    shifts = analysis.matched_shifts(sirs, on, off)
    ok = np.isfinite(shifts)
    shift = float(np.mean(shifts[ok])) if ok.any() else float("nan")
    return {"sir_db": sirs, "ber_on": on.tolist(), "ber_off": off.tolist(),
            "shifts_db": shifts.tolist(), "penalty_db": penalty,
            "shift_db": shift, "gain_db": shift - penalty}
