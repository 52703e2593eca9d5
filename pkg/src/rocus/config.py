"""Experiment configuration: a nested YAML document plus CLI/env overrides.

Schema (all keys optional except ``behavior.id``)::

    controller: ds            # ds | rrt
    behavior:
      id: straight_dev        # any key of rocus.behaviors.BEHAVIORS
      mode: matching          # matching | maximal
      target: 0.0             # matching target b*
      sign: 1                 # maximal: +1 maximise, -1 minimise
      alpha: 0.01
    sampler:
      n_samples: 5000
      burn_in: 1000
      thin: 1
      seed: 0
      n_prior: 1000
      reject_failed_rollouts: false
    baseline:
      enabled: true
      n: 2000
      k: 20
    render:
      max_trajectories: 50
    output_dir: runs

``ROCUS_SEED`` in the environment overrides ``sampler.seed``.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .behaviors import BEHAVIORS
from .sampler import BehaviorSpec, SamplerConfig

SEED_ENV = "ROCUS_SEED"


class ConfigError(ValueError):
    def __init__(self, msg: str, source: str | None = None, line: int | None = None):
        loc = source or "<config>"
        if line is not None:
            loc = f"{loc}:{line}"
        super().__init__(f"{loc}: {msg}")
        self.source, self.line = source, line


@dataclass
class BaselineConfig:
    enabled: bool = True
    n: int = 2000
    k: int = 20


@dataclass
class RenderConfig:
    max_trajectories: int = 50


@dataclass
class ExperimentConfig:
    behavior: BehaviorSpec
    controller: str = "ds"
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    output_dir: str = "runs"

    def to_dict(self) -> dict:
        b = asdict(self.behavior)
        b["id"] = b.pop("behavior_id")
        return {
            "controller": self.controller,
            "behavior": b,
            "sampler": asdict(self.sampler),
            "baseline": asdict(self.baseline),
            "render": asdict(self.render),
            "output_dir": self.output_dir,
        }


def _key_lines(node, prefix=()) -> dict:
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (k.value,)
            out[path] = k.start_mark.line + 1
            out.update(_key_lines(v, path))
    return out


def _build(cls, data, section: str, lines, source, rename=None):
    rename = rename or {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section}' must be a mapping", source, lines.get((section,)))
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for k, v in data.items():
        name = rename.get(k, k)
        if name not in names:
            raise ConfigError(f"unknown key '{section}.{k}'", source, lines.get((section, k)))
        kwargs[name] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid '{section}': {exc}", source, lines.get((section,))) from None


def config_from_dict(doc: dict, source: str | None = None, lines: dict | None = None) -> ExperimentConfig:
    lines = lines or {}
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a mapping", source, 1)
    known = {"controller", "behavior", "sampler", "baseline", "render", "output_dir"}
    for k in doc:
        if k not in known:
            raise ConfigError(f"unknown key '{k}'", source, lines.get((k,)))
    controller = doc.get("controller", "ds")
    if controller not in ("ds", "rrt"):
        raise ConfigError(f"controller must be 'ds' or 'rrt', got {controller!r}", source, lines.get(("controller",)))
    bdoc = doc.get("behavior") or {}
    bid = bdoc.get("id") if isinstance(bdoc, dict) else None
    if bid not in BEHAVIORS:
        raise ConfigError(
            f"unknown behavior id {bid!r}; choose from {sorted(BEHAVIORS)}", source,
            lines.get(("behavior", "id"), lines.get(("behavior",))),
        )
    spec = _build(BehaviorSpec, bdoc, "behavior", lines, source, rename={"id": "behavior_id"})
    sampler = _build(SamplerConfig, doc.get("sampler"), "sampler", lines, source)
    seed = os.environ.get(SEED_ENV)
    if seed is not None:
        try:
            sampler.seed = int(seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {seed!r}", SEED_ENV) from None
    baseline = _build(BaselineConfig, doc.get("baseline"), "baseline", lines, source)
    if baseline.k > baseline.n:
        raise ConfigError("baseline.k must not exceed baseline.n", source, lines.get(("baseline", "k")))
    render = _build(RenderConfig, doc.get("render"), "render", lines, source)
    return ExperimentConfig(spec, controller, sampler, baseline, render, str(doc.get("output_dir", "runs")))


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}", source,
                          mark.line + 1 if mark else None) from None
    return config_from_dict(doc or {}, source, _key_lines(node))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
