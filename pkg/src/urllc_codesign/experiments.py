"""Experiment runners: sweeps over horizon, delay bound, bandwidth and cell size.

Each runner returns a list of rows and, given a path, writes them as CSV.
Delays in the output are in milliseconds and bandwidths in Hz. Points that
have no feasible operating point are kept with ``status`` set to
``infeasible:<constraint>`` and empty numeric cells.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

from .codesign import (
    CoDesignSolution,
    DeviceScenario,
    InfeasibleError,
    capacity_known_distribution,
    capacity_worst_case,
    evaluate_point,
    exhaustive_solution,
    min_overall_error,
    no_prediction,
)
from .config import ConfigError, ExperimentConfig, ms_to_slots, snap_slots
from .prediction import evaluate_trace

__all__ = [
    "ResultRow",
    "CapacityRow",
    "TraceRow",
    "run_sweep_horizon",
    "run_tradeoff",
    "run_capacity",
    "run_trace",
    "write_rows",
    "format_rows",
]

_PROB_FIELDS = ("eps_prediction", "eps_queue", "eps_tx", "eps_overall")


@dataclass(frozen=True)
class ResultRow:
    sweep_value: float
    scheme: str
    status: str
    eps_prediction: Optional[float] = None
    eps_queue: Optional[float] = None
    eps_tx: Optional[float] = None
    eps_overall: Optional[float] = None
    horizon: Optional[float] = None  # ms
    queue_delay: Optional[float] = None  # ms
    tx_delay: Optional[float] = None  # ms
    repetitions: Optional[int] = None
    bandwidth: Optional[float] = None  # Hz

    def validate(self):
        if self.status != "ok":
            return
        for name in _PROB_FIELDS:
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"row at {self.sweep_value}: {name}={p} outside [0, 1]")
        total = self.eps_prediction + self.eps_queue + self.eps_tx
        if abs(total - self.eps_overall) > 1e-12:
            raise ValueError(f"row at {self.sweep_value}: components sum to {total}, overall {self.eps_overall}")

    @classmethod
    def from_solution(cls, value, scheme, sol: CoDesignSolution, slot_ms: float) -> "ResultRow":
        return cls(
            sweep_value=value,
            scheme=scheme,
            status="ok",
            eps_prediction=sol.eps_prediction,
            eps_queue=sol.eps_queue,
            eps_tx=sol.eps_tx,
            eps_overall=sol.eps_overall,
            horizon=sol.horizon * slot_ms,
            queue_delay=sol.queue_delay * slot_ms,
            tx_delay=sol.tx_delay * slot_ms,
            repetitions=sol.repetitions,
            bandwidth=sol.bandwidth,
        )

    @classmethod
    def infeasible(cls, value, scheme, exc: InfeasibleError) -> "ResultRow":
        return cls(sweep_value=value, scheme=scheme, status=f"infeasible:{exc.constraint.replace(' ', '_')}")


@dataclass(frozen=True)
class CapacityRow:
    sweep_value: int  # number of devices
    mode: str
    status: str
    total_bandwidth: Optional[float] = None  # Hz, worst-case mode
    exceedance_prob: Optional[float] = None  # known-distribution mode
    b_total: Optional[float] = None  # Hz
    draws: Optional[int] = None
    seed: Optional[int] = None

    def validate(self):
        if self.exceedance_prob is not None and not (0.0 <= self.exceedance_prob <= 1.0):
            raise ValueError(f"row at N={self.sweep_value}: exceedance {self.exceedance_prob} outside [0, 1]")


@dataclass(frozen=True)
class TraceRow:
    sweep_value: float  # horizon, ms
    horizon_slots: int
    threshold: float
    samples: int
    error_prob: float

    def validate(self):
        if not (0.0 <= self.error_prob <= 1.0):
            raise ValueError(f"row at {self.sweep_value}: error_prob {self.error_prob} outside [0, 1]")


def _fmt(name, value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    if name.startswith("eps_") or name.endswith("_prob"):
        return f"{value:.9e}"
    return repr(float(value)) if math.isfinite(value) else str(value)


def format_rows(rows: Sequence) -> str:
    if not rows:
        raise ValueError("no rows to write")
    cols = [f.name for f in fields(rows[0])]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        row.validate()
        w.writerow([_fmt(c, getattr(row, c)) for c in cols])
    return buf.getvalue()


def write_rows(rows: Sequence, path) -> Path:
    """Validate and write rows as UTF-8 CSV."""
    text = format_rows(rows)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _map(func: Callable, items, workers: int):
    # rows come back in input order whatever the completion order
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(func, items))
    return [func(x) for x in items]


def _require(cfg: ExperimentConfig, *variables):
    if cfg.sweep.variable not in variables:
        raise ConfigError(f"sweep.variable: this experiment needs one of {variables}, got {cfg.sweep.variable!r}")


def _slots(ms, cfg, what):
    slots = ms_to_slots(ms, cfg.slot_ms)
    k = round(slots)
    if abs(slots - k) > 1e-9 * max(1.0, abs(slots)):
        raise ConfigError(f"sweep.grid: {what} {ms} ms is not a whole number of slots")
    return k


def _with_d_max(scenario: DeviceScenario, d_max_slots: float) -> DeviceScenario:
    return scenario.replace(delay_budget=replace(scenario.delay_budget, d_max=d_max_slots))


def _finish(rows, cfg, out):
    out = out if out is not None else cfg.output_path
    if out is not None:
        write_rows(rows, out)
    return rows


def run_sweep_horizon(cfg: ExperimentConfig, out=None, *, workers: Optional[int] = None) -> list:
    """Error components versus prediction horizon at the scenario bandwidth."""
    _require(cfg, "horizon")
    s = cfg.scenario
    bandwidth = s.link.bandwidth
    if max(cfg.sweep.grid) > s.horizon_cap * cfg.slot_ms:
        raise ConfigError("sweep.grid: horizons beyond scenario.horizon_cap_ms")

    def point(ms):
        t = _slots(ms, cfg, "horizon")
        try:
            return ResultRow.from_solution(ms, "codesign", evaluate_point(s, t, bandwidth), cfg.slot_ms)
        except InfeasibleError as exc:
            return ResultRow.infeasible(ms, "codesign", exc)

    return _finish(_map(point, cfg.sweep.grid, workers or cfg.workers), cfg, out)


def run_tradeoff(cfg: ExperimentConfig, out=None, *, workers: Optional[int] = None) -> list:
    """Co-design against the no-prediction baseline.

    Over ``d_max`` (ms) at the scenario bandwidth, or over ``bandwidth`` (MHz)
    at the scenario delay bound; the bandwidth sweep adds the exhaustive
    optimum as a third scheme.
    """
    _require(cfg, "d_max", "bandwidth")
    s = cfg.scenario

    def solve(label, fn, value):
        try:
            return ResultRow.from_solution(value, label, fn(), cfg.slot_ms)
        except InfeasibleError as exc:
            return ResultRow.infeasible(value, label, exc)

    if cfg.sweep.variable == "d_max":
        def point(ms):
            sc = _with_d_max(s, snap_slots(ms, cfg.slot_ms))
            b = s.link.bandwidth
            return [
                solve("codesign", lambda: min_overall_error(sc, b)[1], ms),
                solve("no_prediction", lambda: no_prediction(sc, b), ms),
            ]
    else:
        def point(mhz):
            b = mhz * 1e6
            return [
                solve("codesign", lambda: min_overall_error(s, b)[1], mhz),
                solve("no_prediction", lambda: no_prediction(s, b), mhz),
                solve("exhaustive", lambda: exhaustive_solution(s, b), mhz),
            ]

    rows = [r for pair in _map(point, cfg.sweep.grid, workers or cfg.workers) for r in pair]
    return _finish(rows, cfg, out)


def run_capacity(cfg: ExperimentConfig, out=None, *, workers: Optional[int] = None, seed: Optional[int] = None) -> list:
    """Total bandwidth (worst case) or exceedance probability versus cell size."""
    _require(cfg, "n_devices")
    s = cfg.scenario
    seed = cfg.rng_seed if seed is None else seed
    workers = workers or cfg.workers
    grid = []
    for v in cfg.sweep.grid:
        if v != int(v) or v < 1:
            raise ConfigError(f"sweep.grid: device counts must be positive integers, got {v}")
        grid.append(int(v))
    rows = []
    if cfg.sweep.mode == "worst_case":
        try:
            per_device = capacity_worst_case(s, 1)
        except InfeasibleError as exc:
            rows = [CapacityRow(n, "worst_case", f"infeasible:{exc.constraint.replace(' ', '_')}") for n in grid]
        else:
            rows = [CapacityRow(n, "worst_case", "ok", total_bandwidth=n * per_device) for n in grid]
    else:
        b_total = cfg.sweep.b_total_mhz * 1e6
        cache: dict = {}
        for n in grid:
            p = capacity_known_distribution(
                s, n, b_total, cfg.sweep.distance_range_m, cfg.sweep.draws, seed,
                workers=workers, _cache=cache,
            )
            rows.append(CapacityRow(n, "known_distribution", "ok", exceedance_prob=p,
                                    b_total=b_total, draws=cfg.sweep.draws, seed=seed))
    return _finish(rows, cfg, out)


def run_trace(locations, horizons_ms: Sequence[float], threshold: float, slot_ms: float = 1.0, out=None) -> list:
    """Empirical prediction error of a recorded location trace per horizon."""
    locations = list(locations)
    rows = []
    for ms in horizons_ms:
        t = ms_to_slots(ms, slot_ms)
        if abs(t - round(t)) > 1e-9 * max(1.0, t):
            raise ConfigError(f"horizon {ms} ms is not a whole number of {slot_ms} ms samples")
        t = int(round(t))
        p = evaluate_trace(locations, t, threshold, slot_ms * 1e-3)
        rows.append(TraceRow(ms, t, threshold, len(locations) - t, p))
    if out is not None:
        write_rows(rows, out)
    return rows
