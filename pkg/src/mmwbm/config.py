"""Simulation configuration: schema, defaults, YAML loading and dumping.

Angles are in degrees in the file; the codebook and channel modules take
degrees at their construction boundary and convert once.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .array import ArrayGeometry
from .beam_mgmt import SCHEMES
from .channel import ClusterParams
from .codebook import DEFAULT_LEVELS, LevelSpec, build_codebook


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class ArrayConfig:
    n_h: int = 16
    n_v: int = 16
    spacing: float = 0.5
    n_aips: int = 2
    n_ue: int = 4

    @property
    def aip(self) -> ArrayGeometry:
        return ArrayGeometry.ura(self.n_h, self.n_v, self.spacing)

    @property
    def ue(self) -> ArrayGeometry:
        return ArrayGeometry.ula(self.n_ue, self.spacing)


@dataclass(frozen=True)
class SimConfig:
    tx_snr_db: tuple = (-1.0, 0.0)
    gamma_th_db_grid: tuple = (14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0, 30.0, 32.0)
    n_trials: int = 2000
    n_ttis_per_trial: int = 10
    schemes: tuple = SCHEMES
    drift_deg_std: float = 3.0
    master_seed: int = 12345
    max_init_cts: int | None = None
    # per-TTI threshold offsets (dB), cycled; empty means a constant threshold
    threshold_schedule_db: tuple = ()
    wide_beam_pruning: bool = False
    prune_backoff_db: float = 3.0
    workers: int = 1
    array: ArrayConfig = field(default_factory=ArrayConfig)
    channel: ClusterParams = field(default_factory=ClusterParams)
    codebook: tuple = field(default_factory=lambda: tuple(DEFAULT_LEVELS))

    def __post_init__(self):
        validate(self)

    def level_specs(self) -> tuple[LevelSpec, ...]:
        return tuple(self.codebook)

    def build_codebook(self):
        return build_codebook(self.array.aip, self.level_specs())

    def threshold_offset_db(self, tti: int) -> float:
        sched = self.threshold_schedule_db
        return float(sched[tti % len(sched)]) if sched else 0.0


def validate(cfg: SimConfig) -> None:
    if not isinstance(cfg.n_trials, int) or cfg.n_trials < 1:
        raise ConfigError("n_trials must be an integer >= 1", "n_trials")
    if not isinstance(cfg.n_ttis_per_trial, int) or cfg.n_ttis_per_trial < 1:
        raise ConfigError("n_ttis_per_trial must be an integer >= 1", "n_ttis_per_trial")
    if not cfg.tx_snr_db:
        raise ConfigError("tx_snr_db must be a nonempty list", "tx_snr_db")
    if not cfg.gamma_th_db_grid:
        raise ConfigError("gamma_th_db_grid must be a nonempty list", "gamma_th_db_grid")
    if not cfg.schemes:
        raise ConfigError("schemes must be a nonempty list", "schemes")
    for s in cfg.schemes:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}; expected one of {', '.join(SCHEMES)}", "schemes")
    if cfg.drift_deg_std < 0:
        raise ConfigError("drift_deg_std must be >= 0", "drift_deg_std")
    if cfg.max_init_cts is not None and cfg.max_init_cts < 1:
        raise ConfigError("max_init_cts must be >= 1", "max_init_cts")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1", "workers")
    if not cfg.codebook:
        raise ConfigError("codebook needs at least one level", "codebook")


# ---------------------------------------------------------------------------
# (de)serialization

_LIST_FIELDS = ("tx_snr_db", "gamma_th_db_grid", "schemes", "threshold_schedule_db")


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'} must be a mapping", prefix or None)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        key = f"{prefix}.{unknown[0]}" if prefix else unknown[0]
        raise ConfigError(f"unknown key {key!r}", key)
    return names


def _as_tuple(value, key):
    if isinstance(value, (list, tuple)):
        return tuple(value)
    raise ConfigError(f"{key} must be a list", key)


def config_from_dict(data: dict) -> SimConfig:
    _build(SimConfig, data, "")
    kw = dict(data)
    for key in _LIST_FIELDS:
        if key in kw:
            kw[key] = _as_tuple(kw[key], key)
    try:
        if "array" in kw:
            _build(ArrayConfig, kw["array"], "array")
            kw["array"] = ArrayConfig(**kw["array"])
        if "channel" in kw:
            _build(ClusterParams, kw["channel"], "channel")
            ch = dict(kw["channel"])
            for k, v in ch.items():
                if k.endswith("_range_deg"):
                    ch[k] = _as_tuple(v, f"channel.{k}")
            kw["channel"] = ClusterParams(**ch)
        if "codebook" in kw:
            levels = []
            for i, lv in enumerate(_as_tuple(kw["codebook"], "codebook")):
                _build(LevelSpec, lv, f"codebook[{i}]")
                levels.append(LevelSpec(lv["count"], tuple(lv["span_deg"]), lv.get("width")))
            kw["codebook"] = tuple(levels)
        return SimConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def config_to_dict(cfg: SimConfig) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "codebook":
            v = [{"count": s.count, "span_deg": list(s.span_deg), "width": s.width} for s in v]
        elif dataclasses.is_dataclass(v):
            v = {k: list(x) if isinstance(x, tuple) else x for k, x in dataclasses.asdict(v).items()}
        elif isinstance(v, tuple):
            v = list(v)
        out[f.name] = v
    return out


def load_config(path) -> SimConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"cannot parse {path}: {getattr(exc, 'problem', exc)}", line=line) from None
    return config_from_dict(data or {})


def dump_config(cfg: SimConfig, path=None) -> str:
    text = yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text
