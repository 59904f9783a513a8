"""YAML configuration: schema-validated, versioned, Table-1 defaults.

The default profile reproduces the reference dual-layer system, so a write
command with no overrides simulates the standard operating point.  Unknown
keys anywhere in the document are rejected.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from . import constants
from .errors import ConfigError
from .llb import LlbParams
from .media import LayerStats

SCHEMA_VERSION = 1

_LAYER_KEYS = {"Ms0_mean", "Tc_mean", "sigma_Tc", "Ku0_mean", "sigma_Ku",
               "thickness", "grain_diameter_mean", "sigma_volume"}
_HEAD_KEYS = {"Tw", "Hw", "fwhm_T", "fwhm_H", "head_width", "u_hat", "d",
              "delta_d", "ramp_time"}
_MEDIA_KEYS = {"track_length", "track_width", "layers"}
_RUN_KEYS = {"velocity", "bit_length", "dt", "equilibration_time",
             "cooldown_time", "seed", "repeats"}
_LLB_KEYS = {"damping", "eta", "beta_me", "epsilon_m", "chi_field",
             "tau_clamp", "gamma_e", "t_env", "active_window", "t_activate",
             "settle_time", "chunk_steps"}
_ANALYSIS_KEYS = {"grid_spacing", "repeats", "window_mode", "normalize_mz",
                  "segment_cells", "edge_exclusion"}
_OUTPUT_KEYS = {"directory", "trajectory_grain_ids", "formats"}
_TOP_KEYS = {"schema", "media", "heads", "run", "llb", "analysis", "output"}


@dataclass
class HeadConfig:
    Tw: float
    Hw: float
    fwhm_T: float = 20.0
    fwhm_H: float = 20.0
    head_width: float = 20.0
    u_hat: tuple = (0.0, 0.0, 1.0)
    d: float = 1.0
    delta_d: float = 0.0
    ramp_time: float = 0.1


@dataclass
class MediaConfig:
    track_length: float = constants.TRACK_LENGTH_DEFAULT
    track_width: float = constants.TRACK_WIDTH_DEFAULT
    layers: list[LayerStats] = field(default_factory=list)


@dataclass
class RunConfig:
    velocity: float = constants.VELOCITY_DEFAULT
    bit_length: float = constants.BIT_LENGTH_DEFAULT
    dt: float = constants.DT_DEFAULT
    equilibration_time: float = 1.0
    cooldown_time: float = 1.0
    seed: int = 1
    repeats: int = 1


@dataclass
class AnalysisConfig:
    grid_spacing: float = 0.5
    repeats: int = 10
    window_mode: str = "segment"
    normalize_mz: bool = True
    segment_cells: int = 3
    edge_exclusion: float | None = None


@dataclass
class OutputConfig:
    directory: str = "out"
    trajectory_grain_ids: list = field(default_factory=list)
    formats: list = field(default_factory=lambda: ["csv"])


@dataclass
class Config:
    media: MediaConfig
    heads: list[HeadConfig]
    run: RunConfig
    llb_params: LlbParams
    analysis: AnalysisConfig
    output: OutputConfig

    def to_dict(self) -> dict:
        doc = {
            "schema": SCHEMA_VERSION,
            "media": {
                "track_length": self.media.track_length,
                "track_width": self.media.track_width,
                "layers": [
                    {k: getattr(s, k) for k in sorted(_LAYER_KEYS)}
                    for s in self.media.layers
                ],
            },
            "heads": [
                {**{k: getattr(h, k) for k in sorted(_HEAD_KEYS - {"u_hat"})},
                 "u_hat": list(h.u_hat)}
                for h in self.heads
            ],
            "run": {k: getattr(self.run, k) for k in sorted(_RUN_KEYS)},
            "llb": {
                "damping": self.llb_params.damping,
                "eta": self.llb_params.eta,
                "beta_me": self.llb_params.beta_me,
                "epsilon_m": self.llb_params.epsilon_m,
                "chi_field": self.llb_params.chi_field,
                "tau_clamp": self.llb_params.tau_clamp,
                "gamma_e": self.llb_params.gamma_e,
                "t_env": self.llb_params.t_env,
                "active_window": self.llb_params.active_window,
                "t_activate": self.llb_params.t_activate,
                "settle_time": self.llb_params.settle_time,
                "chunk_steps": self.llb_params.chunk_steps,
            },
            "analysis": {k: getattr(self.analysis, k)
                         for k in sorted(_ANALYSIS_KEYS)},
            "output": {
                "directory": self.output.directory,
                "trajectory_grain_ids": [list(g) for g in
                                         self.output.trajectory_grain_ids],
                "formats": list(self.output.formats),
            },
        }
        return doc


def _check_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def default_config() -> Config:
    media = MediaConfig(layers=[LayerStats(**constants.TOP_LAYER),
                                LayerStats(**constants.BOTTOM_LAYER)])
    heads = [HeadConfig(**constants.HEAD_BOTTOM),
             HeadConfig(**constants.HEAD_TOP)]
    return Config(media=media, heads=heads, run=RunConfig(),
                  llb_params=LlbParams(), analysis=AnalysisConfig(),
                  output=OutputConfig())


def from_dict(doc: dict) -> Config:
    _check_keys(doc, _TOP_KEYS, "config")
    if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {doc.get('schema')}")
    cfg = default_config()

    media = doc.get("media", {})
    _check_keys(media, _MEDIA_KEYS, "media")
    if "track_length" in media:
        cfg.media.track_length = float(media["track_length"])
    if "track_width" in media:
        cfg.media.track_width = float(media["track_width"])
    if "layers" in media:
        layers = []
        for i, ls in enumerate(media["layers"]):
            _check_keys(ls, _LAYER_KEYS, f"media.layers[{i}]")
            layers.append(LayerStats(**{k: float(v) for k, v in ls.items()}))
        cfg.media.layers = layers

    if "heads" in doc:
        heads = []
        for i, hd in enumerate(doc["heads"]):
            _check_keys(hd, _HEAD_KEYS, f"heads[{i}]")
            kw = dict(hd)
            if "u_hat" in kw:
                kw["u_hat"] = tuple(float(v) for v in kw["u_hat"])
            heads.append(HeadConfig(**kw))
        cfg.heads = heads

    run = doc.get("run", {})
    _check_keys(run, _RUN_KEYS, "run")
    for k, v in run.items():
        setattr(cfg.run, k, int(v) if k in ("seed", "repeats") else float(v))

    llb = doc.get("llb", {})
    _check_keys(llb, _LLB_KEYS, "llb")
    for k, v in llb.items():
        if k in ("active_window",):
            setattr(cfg.llb_params, k, bool(v))
        elif k in ("chunk_steps",):
            setattr(cfg.llb_params, k, int(v))
        else:
            setattr(cfg.llb_params, k, float(v))
    cfg.llb_params.dt = cfg.run.dt

    ana = doc.get("analysis", {})
    _check_keys(ana, _ANALYSIS_KEYS, "analysis")
    for k, v in ana.items():
        if k == "window_mode":
            cfg.analysis.window_mode = str(v)
        elif k == "normalize_mz":
            cfg.analysis.normalize_mz = bool(v)
        elif k in ("repeats", "segment_cells"):
            setattr(cfg.analysis, k, int(v))
        elif k == "edge_exclusion":
            cfg.analysis.edge_exclusion = None if v is None else float(v)
        else:
            setattr(cfg.analysis, k, float(v))

    out = doc.get("output", {})
    _check_keys(out, _OUTPUT_KEYS, "output")
    if "directory" in out:
        cfg.output.directory = str(out["directory"])
    if "trajectory_grain_ids" in out:
        ids = []
        for pair in out["trajectory_grain_ids"]:
            if len(pair) != 2:
                raise ConfigError("trajectory_grain_ids entries are [layer, id]")
            ids.append((int(pair[0]), int(pair[1])))
        cfg.output.trajectory_grain_ids = ids
    if "formats" in out:
        cfg.output.formats = [str(f) for f in out["formats"]]

    validate(cfg)
    return cfg


def validate(cfg: Config) -> Config:
    if not cfg.media.layers:
        raise ConfigError("media.layers must not be empty")
    for s in cfg.media.layers:
        s.validate()
    if cfg.media.track_length <= 0 or cfg.media.track_width <= 0:
        raise ConfigError("track dimensions must be positive")
    if not cfg.heads:
        raise ConfigError("heads must not be empty")
    tws = [h.Tw for h in cfg.heads]
    if any(nxt >= prev for prev, nxt in zip(tws[:-1], tws[1:])):
        raise ConfigError(
            "writing temperatures must be strictly descending in pass order "
            f"(Tw(1) > Tw(2) > ... > Tw(N)); got {tws}")
    if len(cfg.heads) != len(cfg.media.layers):
        raise ConfigError("need exactly one head per layer")
    if cfg.run.velocity <= 0 or cfg.run.bit_length <= 0 or cfg.run.dt <= 0:
        raise ConfigError("run.velocity, run.bit_length, run.dt must be positive")
    cfg.llb_params.validate()
    if cfg.analysis.grid_spacing <= 0 or cfg.analysis.grid_spacing > 1.0:
        raise ConfigError("analysis.grid_spacing must be in (0, 1] nm")
    return cfg


def load_config(path) -> Config:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if doc is None:
        doc = {}
    return from_dict(doc)


def dump_config(cfg: Config, path=None) -> str:
    text = yaml.safe_dump(cfg.to_dict(), sort_keys=True,
                          default_flow_style=None, width=100)
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    return text
