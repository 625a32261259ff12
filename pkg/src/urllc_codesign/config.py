"""Experiment configuration in human units and its conversion to model units.

Configs are TOML. Human units (dBm, dB, ms, MHz, packets/s, metres) are
converted once here; everything downstream works in slots, watts, Hz and
linear gains. ``configs/default.toml`` documents every key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import tomli

from .codesign import DelayBudget, DeviceScenario
from .phy import LinkModel, PathLossModel, large_scale_gain
from .prediction import build_constant_accel_model
from .queueing import TrafficModel
from .specfun import DomainError

__all__ = [
    "ConfigError",
    "SweepConfig",
    "ExperimentConfig",
    "dbm_to_watt",
    "watt_to_dbm",
    "db_to_linear",
    "linear_to_db",
    "ms_to_slots",
    "slots_to_ms",
    "snap_slots",
    "load_config",
    "parse_config",
    "default_config",
    "default_scenario",
    "DEFAULT_CONFIG_PATH",
]

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[2] / "configs" / "default.toml"


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * math.log10(watt) + 30.0


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(lin):
    return 10.0 * math.log10(lin)


def ms_to_slots(ms, slot_ms):
    return ms / slot_ms


def slots_to_ms(slots, slot_ms):
    return slots * slot_ms


def snap_slots(ms, slot_ms):
    """ms -> slots, snapped to the nearest integer when within rounding noise."""
    slots = ms_to_slots(ms, slot_ms)
    k = round(slots)
    return float(k) if abs(slots - k) <= 1e-9 * max(1.0, abs(slots)) else slots


def _integer_slots(ms, slot_ms, where):
    slots = ms_to_slots(ms, slot_ms)
    k = round(slots)
    if abs(slots - k) > 1e-9 * max(1.0, abs(slots)):
        raise ConfigError(f"{where}: {ms} ms is not a whole number of {slot_ms} ms slots")
    return int(k)


# key -> (type, default)
_SCENARIO_KEYS = {
    "reliability_target": (float, 1e-5),
    "arrival_rate_pps": (float, 100.0),
    "d_max_ms": (float, 0.0),
    "d_core_ms": (float, 10.0),
    "decode_factor": (float, 0.0),
    "horizon_cap_ms": (float, 200.0),
    "bandwidth_cap_mhz": (float, 20.0),
    "repetition_cap": (int, 20),
    "subcarrier_khz": (float, 15.0),
}
_LINK_KEYS = {
    "bandwidth_mhz": (float, 0.44),
    "tx_power_dbm": (float, 23.0),
    "noise_psd_dbm_hz": (float, -174.0),
    "n_antennas": (int, 32),
    "payload_bits": (int, 160),
    "slot_ms": (float, 0.1),
    "copy_ms": (float, 0.5),
    "snr_loss_db": (float, 0.0),
    "data_fraction": (float, 1.0),
    "distance_m": (float, 200.0),
    "shadowing_db": ((float, str), "worst"),
}
_PATH_LOSS_KEYS = {
    "fixed_loss_db": (float, 35.3),
    "distance_exponent_db": (float, 37.6),
    "shadowing_std_db": (float, 8.0),
    "availability_target": (float, 1e-5),
}
_PREDICTION_KEYS = {
    "accel_noise_std": (float, 0.01),
    "initial_error_std": (list, [0.01, 0.2, 0.1]),
    "thresholds": (list, [0.1, math.inf, math.inf]),
}
_SWEEP_KEYS = {
    "variable": (str, "horizon"),
    "grid": (list, None),
    "start": (float, None),
    "stop": (float, None),
    "step": (float, None),
    "mode": (str, "worst_case"),
    "draws": (int, 10_000),
    "b_total_mhz": (float, 10.0),
    "distance_range_m": (list, [50.0, 200.0]),
}
_VALIDATION_KEYS = {
    "tolerance_scale": (float, 1.0),
}
_TOP_KEYS = {"seed", "output", "scenario", "sweep", "validation", "workers"}

SWEEP_VARIABLES = ("horizon", "d_max", "n_devices", "bandwidth")
CAPACITY_MODES = ("worst_case", "known_distribution")


def _section(raw: dict, keys: dict, where: str) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a table")
    unknown = set(raw) - set(keys)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}; allowed: {sorted(keys)}")
    out = {}
    for key, (typ, default) in keys.items():
        if key not in raw:
            out[key] = default
            continue
        val = raw[key]
        types = typ if isinstance(typ, tuple) else (typ,)
        if float in types and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if isinstance(val, bool) or not isinstance(val, types):
            names = " or ".join(t.__name__ for t in types)
            raise ConfigError(f"{where}.{key}: expected {names}, got {val!r}")
        out[key] = val
    return out


def _float_list(values, where, length=None):
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a list of numbers, got {values!r}") from None
    if length is not None and len(out) != length:
        raise ConfigError(f"{where}: expected {length} values, got {len(out)}")
    return out


@dataclass(frozen=True)
class SweepConfig:
    variable: str
    grid: tuple  # human units: horizon/d_max in ms, bandwidth in MHz, n_devices count
    mode: str = "worst_case"
    draws: int = 10_000
    b_total_mhz: float = 10.0
    distance_range_m: tuple = (50.0, 200.0)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    scenario: DeviceScenario
    sweep: SweepConfig
    rng_seed: int
    output_path: Optional[Path]
    slot_ms: float
    human: dict = field(repr=False)  # the validated human-unit values, for reporting
    tolerance_scale: float = 1.0
    workers: int = 1


def _build_scenario(sc: dict, link: dict, pl: dict, pred: dict) -> DeviceScenario:
    slot_ms = link["slot_ms"]
    if not slot_ms > 0:
        raise ConfigError("scenario.link.slot_ms: must be positive")
    try:
        path_loss = PathLossModel(**pl)
        shadow = link["shadowing_db"]
        if isinstance(shadow, str):
            if shadow != "worst":
                raise ConfigError(f"scenario.link.shadowing_db: expected a number or 'worst', got {shadow!r}")
            shadow = path_loss.worst_shadowing_db
        gain = large_scale_gain(path_loss, link["distance_m"], shadow)
        copy_slots = _integer_slots(link["copy_ms"], slot_ms, "scenario.link.copy_ms")
        link_model = LinkModel(
            bandwidth=link["bandwidth_mhz"] * 1e6,
            tx_power=dbm_to_watt(link["tx_power_dbm"]),
            noise_psd=dbm_to_watt(link["noise_psd_dbm_hz"]),
            large_scale_gain=min(gain, 1.0),
            n_antennas=link["n_antennas"],
            payload_bits=link["payload_bits"],
            slot_duration=slot_ms * 1e-3,
            copy_duration=copy_slots,
            snr_loss=db_to_linear(link["snr_loss_db"]),
            data_fraction=link["data_fraction"],
        )
        state = build_constant_accel_model(
            slot_ms * 1e-3,
            pred["accel_noise_std"],
            _float_list(pred["thresholds"], "scenario.prediction.thresholds", 3),
            _float_list(pred["initial_error_std"], "scenario.prediction.initial_error_std", 3),
        )
        return DeviceScenario(
            state_model=state,
            traffic=TrafficModel(sc["arrival_rate_pps"] * slot_ms * 1e-3),
            link=link_model,
            delay_budget=DelayBudget(
                d_max=snap_slots(sc["d_max_ms"], slot_ms),
                d_core=snap_slots(sc["d_core_ms"], slot_ms),
                decode_factor=sc["decode_factor"],
            ),
            reliability_target=sc["reliability_target"],
            horizon_cap=_integer_slots(sc["horizon_cap_ms"], slot_ms, "scenario.horizon_cap_ms"),
            bandwidth_cap=sc["bandwidth_cap_mhz"] * 1e6,
            repetition_cap=sc["repetition_cap"],
            bandwidth_step=sc["subcarrier_khz"] * 1e3,
            path_loss=path_loss,
        )
    except DomainError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def _sweep_grid(sw: dict) -> tuple:
    if sw["grid"] is not None:
        if any(sw[k] is not None for k in ("start", "stop", "step")):
            raise ConfigError("sweep: give either grid or start/stop/step, not both")
        return tuple(_float_list(sw["grid"], "sweep.grid"))
    if any(sw[k] is None for k in ("start", "stop", "step")):
        raise ConfigError("sweep: needs grid or all of start, stop, step")
    start, stop, step = sw["start"], sw["stop"], sw["step"]
    if not step > 0 or stop < start:
        raise ConfigError("sweep: need step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    # integer multiples of step avoid accumulated drift
    return tuple(round(start + i * step, 12) for i in range(n))


def parse_config(raw: dict, *, source: str = "<config>") -> ExperimentConfig:
    """Validate a parsed TOML document and build the model-unit objects."""
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown top-level key(s) {sorted(unknown)}")
    scen_raw = dict(raw.get("scenario", {}))
    nested = {name: scen_raw.pop(name, {}) for name in ("link", "path_loss", "prediction")}
    sc = _section(scen_raw, _SCENARIO_KEYS, "scenario")
    link = _section(nested["link"], _LINK_KEYS, "scenario.link")
    pl = _section(nested["path_loss"], _PATH_LOSS_KEYS, "scenario.path_loss")
    pred = _section(nested["prediction"], _PREDICTION_KEYS, "scenario.prediction")
    sw = _section(raw.get("sweep", {"grid": [link["bandwidth_mhz"]], "variable": "bandwidth"}), _SWEEP_KEYS, "sweep")
    val = _section(raw.get("validation", {}), _VALIDATION_KEYS, "validation")
    if sw["variable"] not in SWEEP_VARIABLES:
        raise ConfigError(f"sweep.variable: expected one of {SWEEP_VARIABLES}, got {sw['variable']!r}")
    if sw["mode"] not in CAPACITY_MODES:
        raise ConfigError(f"sweep.mode: expected one of {CAPACITY_MODES}, got {sw['mode']!r}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not (0 <= seed < 2 ** 64):
        raise ConfigError(f"seed: expected a 64-bit non-negative integer, got {seed!r}")
    workers = raw.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError(f"workers: expected a positive integer, got {workers!r}")
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError(f"output: expected a path string, got {output!r}")
    if val["tolerance_scale"] < 0:
        raise ConfigError("validation.tolerance_scale: must be >= 0")
    scenario = _build_scenario(sc, link, pl, pred)
    sweep = SweepConfig(
        variable=sw["variable"],
        grid=_sweep_grid(sw),
        mode=sw["mode"],
        draws=sw["draws"],
        b_total_mhz=sw["b_total_mhz"],
        distance_range_m=tuple(_float_list(sw["distance_range_m"], "sweep.distance_range_m", 2)),
    )
    return ExperimentConfig(
        scenario=scenario,
        sweep=sweep,
        rng_seed=seed,
        output_path=None if output is None else Path(output),
        slot_ms=link["slot_ms"],
        human={"scenario": sc, "link": link, "path_loss": pl, "prediction": pred},
        tolerance_scale=val["tolerance_scale"],
        workers=workers,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        # the decoder message already carries "(at line L, column C)"
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return parse_config(raw, source=str(path))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def default_config(**sweep) -> ExperimentConfig:
    """Built-in defaults (identical to configs/default.toml's scenario)."""
    raw: dict[str, Any] = {}
    if sweep:
        raw["sweep"] = sweep
    return parse_config(raw, source="<defaults>")


def default_scenario(**overrides) -> DeviceScenario:
    """Default scenario with human-unit overrides, e.g. ``n_antennas=64``.

    Keys are looked up in the scenario, link, path_loss and prediction
    sections in that order.
    """
    raw: dict[str, Any] = {"scenario": {"link": {}, "path_loss": {}, "prediction": {}}}
    for key, val in overrides.items():
        for name, keys in (("scenario", _SCENARIO_KEYS), ("link", _LINK_KEYS),
                           ("path_loss", _PATH_LOSS_KEYS), ("prediction", _PREDICTION_KEYS)):
            if key in keys:
                target = raw["scenario"] if name == "scenario" else raw["scenario"][name]
                target[key] = val
                break
        else:
            raise ConfigError(f"unknown scenario key {key!r}")
    return parse_config(raw).scenario
