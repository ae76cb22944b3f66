"""Flat ``key=value`` configuration shared by all subcommands.

Blank lines and ``#`` comments are ignored. Every key is optional; unknown
keys are rejected and values are checked against the same invariants the
library enforces, with the offending key named in the error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from pathlib import Path

from .hsmd import BACKEND_ALIASES, BsBackendState, HsmdConfig
from .lif import LifParams
from .mhsnn import ResumeParams


class ConfigError(ValueError):
    pass


# key -> (section, attribute, type)
_KEYS = {
    **{k: ("lif", k, float) for k in ("c_m", "r_m", "e_l", "v_reset", "v_min", "v_th", "tau_m", "t_ref")},
    "c_p2c": ("hsmd", "c_p2c", float),
    "w_l2_l3": ("hsmd", "w_l2_l3", float),
    "w_l2_l4": ("hsmd", "w_l2_l4", float),
    "w_l3_l4": ("hsmd", "w_l3_l4", float),
    "steps_per_frame": ("hsmd", "steps_per_frame", int),
    "dt": ("hsmd", "dt", float),
    "mask_threshold": ("hsmd", "mask_threshold", float),
    "filter_u": ("hsmd", "filter_u", int),
    "filter_v": ("hsmd", "filter_v", int),
    "mode": ("hsmd", "mode", str),
    "backend": ("tool", "backend", str),
    "alpha": ("bs", "alpha", float),
    "diff_threshold": ("bs", "diff_threshold", float),
    "k_sigma": ("bs", "k_sigma", float),
    "init_variance": ("bs", "init_variance", float),
    "min_variance": ("bs", "min_variance", float),
    "resume_a_d": ("resume", "a_d", float),
    "resume_a_l": ("resume", "a_l", float),
    "resume_tau_d": ("resume", "tau_d", float),
    "resume_tau_l": ("resume", "tau_l", float),
    "resume_a_bias": ("resume", "a_bias", float),
    "resume_lr": ("resume", "lr", float),
    "iterations": ("tool", "iterations", int),
    "schedule": ("tool", "schedule", str),
    "window": ("tool", "window", int),
    "warmup_frames": ("tool", "warmup_frames", int),
    "input": ("tool", "input", str),
    "output": ("tool", "output", str),
    "weights": ("tool", "weights", str),
    "jobs": ("tool", "jobs", int),
}


@dataclass
class ToolConfig:
    lif: LifParams = field(default_factory=LifParams)
    hsmd: HsmdConfig = field(default_factory=HsmdConfig)
    bs: dict = field(default_factory=dict)
    resume: ResumeParams = field(default_factory=ResumeParams)
    backend: str = "frame_diff"
    iterations: int = 10000
    schedule: str = "concurrent"
    window: int = 1
    warmup_frames: int = 2
    input: str | None = None
    output: str | None = None
    weights: str | None = None
    jobs: int = 1

    def make_backend(self) -> BsBackendState:
        return BsBackendState(kind=self.backend, **self.bs)


def known_keys() -> list[str]:
    return sorted(_KEYS)


def _convert(key: str, raw: str):
    typ = _KEYS[key][2]
    try:
        if typ is int:
            if not re.fullmatch(r"[+-]?\d+", raw):
                raise ValueError
            return int(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from None


def parse_text(text: str, source: str = "<config>") -> dict[str, object]:
    values: dict[str, object] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return values


def _blame(exc: Exception, keys) -> str:
    msg = str(exc)
    named = [k for k in keys if re.search(rf"\b{re.escape(_KEYS[k][1])}\b", msg)]
    return f"invalid {', '.join(named) or 'value'}: {msg}"


def build(values: dict[str, object]) -> ToolConfig:
    """Validate ``values`` (already typed) into a :class:`ToolConfig`."""
    for key in values:
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")
    sections: dict[str, dict] = {"lif": {}, "hsmd": {}, "bs": {}, "resume": {}, "tool": {}}
    for key, val in values.items():
        section, attr, _ = _KEYS[key]
        sections[section][attr] = val
    try:
        lif = LifParams(**sections["lif"])
    except ValueError as exc:
        raise ConfigError(_blame(exc, [k for k in values if _KEYS[k][0] == "lif"])) from None
    try:
        hsmd = HsmdConfig(lif=lif, **sections["hsmd"])
    except ValueError as exc:
        raise ConfigError(_blame(exc, [k for k in values if _KEYS[k][0] in ("hsmd", "lif")])) from None
    tool = sections["tool"]
    backend = BACKEND_ALIASES.get(tool.get("backend", "frame_diff"), tool.get("backend", "frame_diff"))
    try:
        BsBackendState(kind=backend, **sections["bs"])
    except ValueError as exc:
        raise ConfigError(_blame(exc, [k for k in values if _KEYS[k][0] in ("bs", "tool")])) from None
    try:
        resume = ResumeParams(**sections["resume"])
    except ValueError as exc:
        raise ConfigError(_blame(exc, [k for k in values if _KEYS[k][0] == "resume"])) from None
    checks = {
        "iterations": lambda v: v >= 0,
        "window": lambda v: v >= 1,
        "warmup_frames": lambda v: v >= 0,
        "jobs": lambda v: v >= 1,
        "schedule": lambda v: v in ("concurrent", "sequential"),
    }
    for key, ok in checks.items():
        if key in tool and not ok(tool[key]):
            raise ConfigError(f"invalid {key}: {tool[key]!r}")
    tool["backend"] = backend
    return ToolConfig(lif=lif, hsmd=hsmd, bs=sections["bs"], resume=resume, **tool)


def parse_config(path=None, overrides: dict | None = None) -> ToolConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides``."""
    values: dict[str, object] = {}
    if path is not None:
        p = Path(path)
        values.update(parse_text(p.read_text(), str(p)))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _convert(key, val) if isinstance(val, str) and _KEYS[key][2] is not str else val
    return build(values)


def dump(cfg: ToolConfig) -> str:
    """Render every key with its current value, in sorted order."""
    lines = []
    for key in known_keys():
        section, attr, _ = _KEYS[key]
        obj = cfg if section == "tool" else getattr(cfg, section)
        if section == "bs":
            default = {f.name: f.default for f in fields(BsBackendState)}
            val = obj.get(attr, default[attr])
        else:
            val = getattr(obj, attr)
        if val is not None:
            lines.append(f"{key}={val}")
    return "\n".join(lines) + "\n"
