"""Flat ``section.key = value`` run configuration.

A configuration file is a list of assignments, one per line, ``#`` starting a
comment::

    channel.mu = 1.45
    run.blocks = 25

Every key has a typed default; the full default set is the ``paper-table1``
profile. Unknown keys and unparsable values are rejected.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from .confidence import IntervalMethod
from .digitization import DigitizationSpec
from .errors import ConfigError
from .security import SecurityBudget
from .simulator import ChannelModel

__all__ = ["DEFAULT_PROFILE", "PROFILES", "RunConfig", "load_config", "parse_config_text", "format_config"]

DEFAULT_PROFILE = "paper-table1"

_DEFAULT_PROFILE_TEXT = """\
# Transmitter, channel and trusted receiver (mean photon number units)
channel.mu = 1.45
channel.eta = 0.35
channel.u = 6.3e-3
channel.tau = 0.69
channel.t = 25.71e-3
channel.noise_reference = input
channel.symbol_rate = 1e8

# Digitization: d bits per quadrature over range_sigmas standard deviations
dig.d = 6
dig.range_sigmas = 7
dig.digitize_tx = true
dig.digitize_rx = false

# Failure probabilities
budget.eps_h = 1e-10
budget.eps_s = 1e-10
budget.eps_ent = 1e-10
budget.eps_pe = 1e-10
budget.eps_cal = 1e-10
budget.eps_ir = 1e-12
budget.eps_qrng = 2e-6

# Information reconciliation; leak_bits = auto derives the leak from beta and
# the SNR the code operates at (snr = estimate takes it from the data)
ir.fer = 0.0036
ir.beta = 0.916
ir.leak_bits = auto
ir.snr = 0.323

# Calibration: m simulated symbols per record; m_declared (if > 0) sets the
# sample count behind the shot-noise interval
calibration.enabled = true
calibration.m = 1000000
calibration.m_declared = 1000000000

# Simulation and estimation
run.n_total = 10000000
run.blocks = 25
run.seed = 20210901
run.interval_method = beta
run.output_path = cvqkd-run
run.workers = 1
pipeline.n_nominal = 0
pipeline.bound_x = false
pipeline.chi_override = none

# Sweeps and interval tables; block_symbols is the symbol count credited per
# block in a sweep (0 credits the real block size)
sweep.k_values = all
sweep.block_symbols = 40000000
intervals.eps = 1e-10
intervals.n_min = 1e4
intervals.n_max = 1e9
intervals.rows = 50
"""

PROFILES = {DEFAULT_PROFILE: _DEFAULT_PROFILE_TEXT}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def _parse_optional_float(text: str) -> float | None:
    low = text.strip().lower()
    if low in ("none", "auto", "estimate", ""):
        return None
    return _parse_float(text)


def _parse_k_values(text: str) -> list[int] | None:
    low = text.strip().lower()
    if low == "all":
        return None
    values = []
    for part in low.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            values.extend(range(int(a), int(b) + 1))
        elif part:
            values.append(int(part))
    if not values or values != sorted(values) or len(set(values)) != len(values) or values[0] < 1:
        raise ValueError("k_values must be ascending positive integers")
    return values


def _parse_method(text: str) -> IntervalMethod:
    return IntervalMethod.parse(text.strip())


def _parse_str(text: str) -> str:
    return text.strip()


_SCHEMA = {
    "channel.mu": _parse_float,
    "channel.eta": _parse_float,
    "channel.u": _parse_float,
    "channel.tau": _parse_float,
    "channel.t": _parse_float,
    "channel.noise_reference": _parse_str,
    "channel.symbol_rate": _parse_float,
    "dig.d": _parse_int,
    "dig.range_sigmas": _parse_float,
    "dig.digitize_tx": _parse_bool,
    "dig.digitize_rx": _parse_bool,
    "budget.eps_h": _parse_float,
    "budget.eps_s": _parse_float,
    "budget.eps_ent": _parse_float,
    "budget.eps_pe": _parse_float,
    "budget.eps_cal": _parse_float,
    "budget.eps_ir": _parse_float,
    "budget.eps_qrng": _parse_float,
    "ir.fer": _parse_float,
    "ir.beta": _parse_float,
    "ir.leak_bits": _parse_optional_float,
    "ir.snr": _parse_optional_float,
    "calibration.enabled": _parse_bool,
    "calibration.m": _parse_int,
    "calibration.m_declared": _parse_int,
    "run.n_total": _parse_int,
    "run.blocks": _parse_int,
    "run.seed": _parse_int,
    "run.interval_method": _parse_method,
    "run.output_path": _parse_str,
    "run.workers": _parse_int,
    "pipeline.n_nominal": _parse_int,
    "pipeline.bound_x": _parse_bool,
    "pipeline.chi_override": _parse_optional_float,
    "sweep.k_values": _parse_k_values,
    "sweep.block_symbols": _parse_int,
    "intervals.eps": _parse_float,
    "intervals.n_min": _parse_float,
    "intervals.n_max": _parse_float,
    "intervals.rows": _parse_int,
}


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Split config text into raw ``{key: value}`` strings (later lines win)."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``values`` holds every key with its typed value."""

    values: Mapping[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def channel(self) -> ChannelModel:
        v = self.values
        return ChannelModel(
            eta=v["channel.eta"], u=v["channel.u"], tau=v["channel.tau"], t=v["channel.t"],
            mu=v["channel.mu"], noise_reference=v["channel.noise_reference"],
        )

    @property
    def dig(self) -> DigitizationSpec:
        return DigitizationSpec(self.values["dig.d"], self.values["dig.range_sigmas"])

    @property
    def budget(self) -> SecurityBudget:
        v = self.values
        return SecurityBudget(**{name: v[f"budget.{name}"] for name in (
            "eps_h", "eps_s", "eps_ent", "eps_pe", "eps_cal", "eps_ir", "eps_qrng")})

    @property
    def method(self) -> IntervalMethod:
        return self.values["run.interval_method"]

    @property
    def p_success(self) -> float:
        return 1.0 - self.values["ir.fer"]

    @property
    def block_size(self) -> int:
        return self.values["run.n_total"] // self.values["run.blocks"]

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        merged = dict(self.values)
        merged.update(overrides)
        return _validate(merged, "<overrides>")

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly view with every key expanded."""
        out = {}
        for key in sorted(self.values):
            value = self.values[key]
            if isinstance(value, IntervalMethod):
                value = value.value
            elif key == "sweep.k_values" and value is None:
                value = "all"
            elif value is None:
                value = {"ir.leak_bits": "auto", "ir.snr": "estimate"}.get(key, "none")
            out[key] = value
        return out


def _validate(values: dict[str, Any], origin: str) -> RunConfig:
    cfg = RunConfig(values)
    try:
        cfg.channel
        cfg.dig
        cfg.budget
    except ValueError as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    v = values
    checks = [
        (0.0 <= v["ir.fer"] < 1.0, "ir.fer must lie in [0, 1)"),
        (0.0 < v["ir.beta"] <= 1.0, "ir.beta must lie in (0, 1]"),
        (v["ir.leak_bits"] is None or v["ir.leak_bits"] >= 0.0, "ir.leak_bits must be nonnegative"),
        (v["ir.snr"] is None or v["ir.snr"] > 0.0, "ir.snr must be positive"),
        (v["run.n_total"] >= 2, "run.n_total must be >= 2"),
        (v["run.blocks"] >= 1, "run.blocks must be >= 1"),
        (v["run.n_total"] % max(v["run.blocks"], 1) == 0, "run.n_total must be divisible by run.blocks"),
        (v["run.workers"] >= 1, "run.workers must be >= 1"),
        (v["calibration.m"] >= 1000, "calibration.m must be >= 1000"),
        (v["calibration.m_declared"] >= 0, "calibration.m_declared must be >= 0"),
        (v["pipeline.n_nominal"] >= 0, "pipeline.n_nominal must be >= 0"),
        (v["pipeline.chi_override"] is None or v["pipeline.chi_override"] >= 0.0, "pipeline.chi_override must be >= 0"),
        (v["sweep.block_symbols"] >= 0, "sweep.block_symbols must be >= 0"),
        (0.0 < v["intervals.eps"] < 1.0, "intervals.eps must lie in (0, 1)"),
        (2 <= v["intervals.n_min"] <= v["intervals.n_max"], "intervals.n_min/n_max must satisfy 2 <= n_min <= n_max"),
        (v["intervals.rows"] >= 1, "intervals.rows must be >= 1"),
        (v["channel.symbol_rate"] > 0.0, "channel.symbol_rate must be positive"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(f"{origin}: {message}")
    k_values = v["sweep.k_values"]
    if k_values is not None and k_values[-1] > v["run.blocks"]:
        raise ConfigError(f"{origin}: sweep.k_values exceeds run.blocks")
    return cfg


def _typed(raw: Mapping[str, str], origin: str) -> dict[str, Any]:
    out = {}
    for key, text in raw.items():
        try:
            out[key] = _SCHEMA[key](text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{origin}: bad value for {key}: {exc}") from None
    return out


def load_config(source: str | os.PathLike | None = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Build a configuration from a profile name or file plus ``KEY=VALUE`` overrides.

    The ``paper-table1`` defaults are always applied first; a file only
    needs to list the keys it changes.
    """
    raw = parse_config_text(PROFILES[DEFAULT_PROFILE], DEFAULT_PROFILE)
    if source is not None and str(source) != DEFAULT_PROFILE:
        if str(source) in PROFILES:
            text, origin = PROFILES[str(source)], str(source)
        else:
            path = Path(source)
            try:
                text = path.read_text()
            except OSError as exc:
                raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
            origin = str(path)
        raw.update(parse_config_text(text, origin))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"override: unknown key {key!r}")
        raw[key] = value
    return _validate(_typed(raw, "config"), "config")


def format_config(cfg: RunConfig) -> str:
    """Render a configuration back to the flat text format."""
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, list):
            value = ",".join(str(k) for k in value)
        lines.append(f"{key} = {value}\n")
    return "".join(lines)
