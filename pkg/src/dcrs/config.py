"""Declarative experiment configuration: YAML loading, validation, digests."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment scenario: geometry, codebook recipe, sweep, seeds.

    The master seed is mandatory; there is deliberately no wall-clock
    default, so every run is reproducible from its config alone.
    """

    scenario: str
    m: int
    n_rx: int
    t: int
    master_seed: int
    codebook: dict[str, Any] = field(default_factory=dict)
    snr_start: float = 0.0
    snr_stop: float = 20.0
    snr_step: float = 5.0
    trials: int = 20_000
    stderr_target: float | None = None
    estimator: str = "dcrs"
    est_mode: str = "ZF"
    kappa: float = 1.0
    qam_order: int = 16
    beta_source: str = "measured"
    nmse_trials: int | None = None
    n_rs_slots: int = 4
    n_data_slots: int = 10

    def __post_init__(self):
        if self.m < 1 or self.n_rx < 1 or self.t < self.m:
            raise ConfigError(
                f"need 1 <= M <= T and N >= 1, got M={self.m}, N={self.n_rx}, "
                f"T={self.t}"
            )
        if not isinstance(self.master_seed, int):
            raise ConfigError("master_seed must be an integer")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.snr_step <= 0 or not all(
            math.isfinite(v) for v in (self.snr_start, self.snr_stop, self.snr_step)
        ):
            raise ConfigError("SNR grid must be finite with positive step")
        if self.snr_stop < self.snr_start:
            raise ConfigError("snr_stop must be >= snr_start")
        if self.estimator not in ("dcrs", "training"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.est_mode not in ("ZF", "MMSE"):
            raise ConfigError(f"unknown estimator mode {self.est_mode!r}")
        if self.beta_source not in ("measured", "bound", "pcsi"):
            raise ConfigError(f"unknown beta_source {self.beta_source!r}")
        if self.kappa < 0:
            raise ConfigError("kappa must be nonnegative")

    @property
    def snr_grid(self) -> list[float]:
        n = int(math.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9))
        return [float(self.snr_start + k * self.snr_step) for k in range(n + 1)]

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **kw) -> "ExperimentConfig":
        d = asdict(self)
        d.update(kw)
        return ExperimentConfig(**d)


_KNOWN_KEYS = {
    "scenario", "m", "n_rx", "t", "master_seed", "codebook",
    "snr", "trials", "stderr_target", "estimator", "kappa",
    "qam_order", "beta_source", "nmse_trials", "frame",
}


def config_from_mapping(raw: dict[str, Any]) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("scenario", "m", "n_rx", "t", "master_seed"):
        if key not in raw:
            raise ConfigError(f"missing required config key {key!r}")
    snr = raw.get("snr", {})
    est = raw.get("estimator", {})
    if isinstance(est, str):
        est = {"kind": est}
    frame = raw.get("frame", {})
    try:
        return ExperimentConfig(
            scenario=str(raw["scenario"]),
            m=int(raw["m"]),
            n_rx=int(raw["n_rx"]),
            t=int(raw["t"]),
            master_seed=raw["master_seed"],
            codebook=dict(raw.get("codebook", {})),
            snr_start=float(snr.get("start", 0.0)),
            snr_stop=float(snr.get("stop", 20.0)),
            snr_step=float(snr.get("step", 5.0)),
            trials=int(raw.get("trials", 20_000)),
            stderr_target=(None if raw.get("stderr_target") is None
                           else float(raw["stderr_target"])),
            estimator=str(est.get("kind", "dcrs")),
            est_mode=str(est.get("mode", "ZF")),
            kappa=float(raw.get("kappa", 1.0)),
            qam_order=int(raw.get("qam_order", 16)),
            beta_source=str(raw.get("beta_source", "measured")),
            nmse_trials=(None if raw.get("nmse_trials") is None
                         else int(raw["nmse_trials"])),
            n_rs_slots=int(frame.get("n_rs_slots", 4)),
            n_data_slots=int(frame.get("n_data_slots", 10)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return config_from_mapping(raw)
