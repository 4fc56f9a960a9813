"""Experiment configuration: YAML files plus flag overrides.

The schema is documented in the README; every report embeds the resolved
configuration and master seed so runs are replayable byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .access import AccessStructure, validate_access_structure
from .errors import ConfigError
from .sources import (
    JointSource,
    TestChannel,
    bsc_channel,
    identity_channel,
    independent_channel,
    make_bss_source,
    make_layered_channel,
)


@dataclass
class ExperimentConfig:
    """Resolved experiment parameters."""

    source_cfg: dict
    channel_cfg: dict
    access_cfg: dict
    n: int = 10
    beta: float = 0.25
    profile_method: str = "monte-carlo"
    profile_samples: int = 100_000
    epsilon: float = 0.1
    delta: float = 0.2
    t: int = 1
    security_delta: float = 0.02
    trials: int = 100
    seed: int | None = None
    out_dir: str = "out"
    mode: str = ""
    sweep_cfg: dict = field(default_factory=dict)
    leakage_cfg: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.seed is None:
            raise ConfigError("a master seed is mandatory")
        if self.profile_method not in ("monte-carlo", "exact"):
            raise ConfigError(f"unknown profiling method {self.profile_method!r}")

    # -- model construction --------------------------------------------------

    def build_source(self) -> JointSource:
        cfg = self.source_cfg
        preset = cfg.get("preset", "bss")
        if preset == "bss":
            return make_bss_source(int(cfg["participants"]), cfg["flip_probs"])
        if preset == "explicit":
            pmf = np.asarray(cfg["pmf"], dtype=float)
            return JointSource(pmf, tuple(pmf.shape[1:]))
        raise ConfigError(f"unknown source preset {preset!r}")

    def build_channel(self) -> TestChannel:
        cfg = self.channel_cfg
        kind = cfg.get("kind", "identity")
        if kind == "identity":
            return identity_channel()
        if kind == "bsc":
            return bsc_channel(float(cfg["flip_prob"]))
        if kind == "independent":
            return independent_channel()
        if kind == "layered":
            q_v = float(cfg["v_from_x"])
            q_u = float(cfg["u_from_v"])
            flip = lambda q: np.array([[1 - q, q], [q, 1 - q]])
            return make_layered_channel(flip(q_v), flip(q_u))
        raise ConfigError(f"unknown channel kind {kind!r}")

    def build_access(self) -> AccessStructure:
        cfg = self.access_cfg
        participants = int(self.source_cfg.get("participants", len(self.source_cfg.get("flip_probs", []))))
        if "qualified" not in cfg:
            raise ConfigError("access.qualified is required")
        unq = cfg.get("unqualified")
        return validate_access_structure(participants, cfg["qualified"], unq)

    def resolved(self) -> dict:
        return {
            "source": self.source_cfg,
            "channel": self.channel_cfg,
            "access": self.access_cfg,
            "polar": {"n": self.n, "beta": self.beta},
            "profiling": {"method": self.profile_method, "samples": self.profile_samples},
            "plan": {"epsilon": self.epsilon, "delta": self.delta},
            "secret": {"t": self.t, "security_delta": self.security_delta},
            "trials": self.trials,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "mode": self.mode,
            "sweep": self.sweep_cfg,
            "leakage": self.leakage_cfg,
        }


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    """Load a YAML config file and apply CLI flag overrides."""
    data: dict = {}
    if path:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")

    cfg = ExperimentConfig(
        source_cfg=data.get("source", {"preset": "bss", "participants": 2,
                                       "flip_probs": [0.15, 0.15]}),
        channel_cfg=data.get("channel", {"kind": "identity"}),
        access_cfg=data.get("access", {"qualified": [[1, 2]]}),
        n=int(data.get("polar", {}).get("n", 10)),
        beta=float(data.get("polar", {}).get("beta", 0.25)),
        profile_method=data.get("profiling", {}).get("method", "monte-carlo"),
        profile_samples=int(data.get("profiling", {}).get("samples", 100_000)),
        epsilon=float(data.get("plan", {}).get("epsilon", 0.1)),
        delta=float(data.get("plan", {}).get("delta", 0.2)),
        t=int(data.get("secret", {}).get("t", 1)),
        security_delta=float(data.get("secret", {}).get("security_delta", 0.02)),
        trials=int(data.get("trials", 100)),
        seed=data.get("seed"),
        out_dir=data.get("out_dir", "out"),
        mode=data.get("mode", ""),
        sweep_cfg=data.get("sweep", {}),
        leakage_cfg=data.get("leakage", {}),
        raw=data,
    )
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown override {key!r}")
        setattr(cfg, key, val)
    cfg.validate()
    return cfg
