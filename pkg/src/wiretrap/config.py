"""Strict JSON run configuration.

Every key carries its SI unit as a suffix (``_m``, ``_T``, ``_A``, ``_K``,
``_rad``, ...). Unknown keys are rejected with their full dotted path.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .core import ParticleSpec, particle_preset
from .errors import ConfigError
from .fieldsolver import BiasField
from .geometry import (
    TRAP_PRESETS,
    ChipLayout,
    RibbonSegment,
    SuperconductorSpec,
    default_substrate,
    preset_bias,
    preset_layout,
)
from .potentials import GRAVITY_DIRECTIONS, KINDS_SS, PotentialOptions

AXES = {"x": 0, "y": 1, "z": 2}

_PARTICLE_KEYS = {
    "preset": "preset",
    "radius_m": "radius",
    "density_kg_m3": "density",
    "chi_v": "chi_v",
    "eps_r": "eps_r",
    "d_perm_Cm": "d_perm",
    "theta_e_rad": "theta_e",
    "theta_m_rad": "theta_m",
    "m_override_J_T": "m_override",
}
_SC_KEYS = {
    "Tc_K": "Tc",
    "Hc1_0_T": "Hc1_0",
    "T_op_K": "T_op",
    "lambda_L_m": "lambda_L",
    "thickness_m": "thickness",
    "parallel_factor": "parallel_factor",
}
_WIRE_KEYS = {"start_m", "end_m", "width_m", "current_A"}
_TRAP_KEYS = {"wires", "feeds"}
_TERM_KEYS = {"plate_dd", "plate_cp", "plate_mm", "chip_gravity"}
_REGION_KEYS = {"lo_m", "hi_m"}
_PROFILE_KEYS = {"quantity", "axis", "start_m", "stop_m", "points", "through_m"}
_CROSS_KEYS = {"kind_a", "kind_b", "factor", "r_min_m", "r_max_m", "points", "angles_rad", "B_local_T"}
_SWEEP_KEYS = {"parameter", "values"}
SWEEP_PARAMETERS = {"current": "current_A", "bias": "bias_T", "chip_half_width": "chip_half_width_m",
                    "temperature": "T_op_K"}
_TOP_KEYS = {
    "trap", "current_A", "bias_T", "ioffe_T", "orientation", "chip_half_width_m", "particle",
    "superconductor", "images", "terms", "x_guess_m", "hold", "region", "meissner_region",
    "profile", "crossover", "sweep",
}


def _check_keys(obj: Any, allowed, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path or 'config'} must be a JSON object")
    for k in obj:
        if k not in allowed:
            where = f"{path}.{k}" if path else k
            raise ConfigError(f"unknown key {where!r}")
    return obj


def _num(v, path: str, positive: bool = False, integer: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path} must be a number")
    if not math.isfinite(v):
        raise ConfigError(f"{path} must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{path} must be positive")
    if integer:
        if int(v) != v:
            raise ConfigError(f"{path} must be an integer")
        return int(v)
    return float(v)


def _vec3(v, path: str) -> tuple[float, float, float]:
    if not isinstance(v, list) or len(v) != 3:
        raise ConfigError(f"{path} must be a list of three numbers")
    return tuple(_num(c, f"{path}[{i}]") for i, c in enumerate(v))


def _bool(v, path: str) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{path} must be true or false")
    return v


@dataclass(frozen=True)
class ProfileSpec:
    quantity: str = "field"
    axis: str = "z"
    start: float = 11e-6
    stop: float = 40e-6
    points: int = 59
    through: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class CrossoverSpec:
    kind_a: str = "GR"
    kind_b: str = "CP"
    factor: float = 10.0
    r_min: float = 1e-6
    r_max: float = 1.0
    points: int = 121
    angles: tuple[float, float, float] | None = None
    B_local: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    trap: Any = "Z1mm"
    current: float = 12.0
    bias: tuple[float, float, float] | None = None
    ioffe: float = 0.0
    orientation: Any = "V"
    chip_half_width: float = 10e-6
    particle: ParticleSpec = field(default_factory=ParticleSpec)
    superconductor: SuperconductorSpec = field(default_factory=SuperconductorSpec)
    images: bool = True
    terms: PotentialOptions | None = None
    x_guess: tuple[float, float, float] | None = None
    hold: tuple[int, ...] = ()
    region: tuple[tuple[float, float, float], tuple[float, float, float]] | None = None
    meissner_region: str = "trap"
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    crossover: CrossoverSpec = field(default_factory=CrossoverSpec)
    sweep_parameter: str | None = None
    sweep_values: tuple[float, ...] = ()

    def layout(self) -> ChipLayout:
        sc = self.superconductor
        if isinstance(self.trap, str):
            return preset_layout(self.trap, self.current, self.chip_half_width, sc=sc)
        wires, feeds = self.trap
        lay = ChipLayout(tuple(wires), sc=sc, substrate=default_substrate(self.chip_half_width),
                         chip_half_width=self.chip_half_width, feeds=feeds, name="custom")
        return lay

    def bias_field(self) -> BiasField:
        if self.bias is not None:
            b = self.bias
        elif isinstance(self.trap, str):
            b = (0.0, -preset_bias(self.trap), 0.0)
        else:
            b = (0.0, 0.0, 0.0)
        return BiasField(b, (self.ioffe, 0.0, 0.0))

    def options(self) -> PotentialOptions:
        t = self.terms or PotentialOptions()
        return replace(t, gravity=self.orientation)

    def with_value(self, parameter: str, value: float) -> "RunConfig":
        """Copy with one sweep parameter replaced."""
        if parameter == "current":
            return replace(self, current=value)
        if parameter == "bias":
            b = np.asarray(self.bias_field().B_bias)
            n = np.linalg.norm(b)
            direction = b / n if n > 0 else np.array([0.0, -1.0, 0.0])
            return replace(self, bias=tuple(float(c) for c in value * direction))
        if parameter == "chip_half_width":
            return replace(self, chip_half_width=value)
        if parameter == "temperature":
            return replace(self, superconductor=replace(self.superconductor, T_op=value))
        raise ConfigError(f"unknown sweep parameter {parameter!r}; choose from {sorted(SWEEP_PARAMETERS)}")


def _parse_particle(v) -> ParticleSpec:
    if isinstance(v, str):
        return particle_preset(v)
    _check_keys(v, _PARTICLE_KEYS, "particle")
    kw = {}
    for k, val in v.items():
        if k == "preset":
            continue
        if k == "m_override_J_T" and val is None:
            kw["m_override"] = None
            continue
        kw[_PARTICLE_KEYS[k]] = _num(val, f"particle.{k}")
    return particle_preset(v.get("preset", "diamond"), **kw)


def _parse_sc(v) -> SuperconductorSpec:
    _check_keys(v, _SC_KEYS, "superconductor")
    return SuperconductorSpec(**{_SC_KEYS[k]: _num(val, f"superconductor.{k}") for k, val in v.items()})


def _parse_trap(v, half_width: float):
    if isinstance(v, str):
        if v not in TRAP_PRESETS:
            raise ConfigError(f"unknown trap preset {v!r}; choose from {sorted(TRAP_PRESETS)}")
        return v
    _check_keys(v, _TRAP_KEYS, "trap")
    if "wires" not in v or not isinstance(v["wires"], list):
        raise ConfigError("trap.wires must be a list")
    wires = []
    for i, w in enumerate(v["wires"]):
        p = f"trap.wires[{i}]"
        _check_keys(w, _WIRE_KEYS, p)
        missing = _WIRE_KEYS - set(w)
        if missing:
            raise ConfigError(f"{p} is missing {sorted(missing)}")
        wires.append(RibbonSegment(_vec3(w["start_m"], f"{p}.start_m"), _vec3(w["end_m"], f"{p}.end_m"),
                                   _num(w["width_m"], f"{p}.width_m", positive=True),
                                   _num(w["current_A"], f"{p}.current_A")))
    return (tuple(wires), _bool(v.get("feeds", True), "trap.feeds"))


def parse_config(data: dict) -> RunConfig:
    _check_keys(data, _TOP_KEYS, "")
    kw: dict[str, Any] = {}
    if "chip_half_width_m" in data:
        kw["chip_half_width"] = _num(data["chip_half_width_m"], "chip_half_width_m", positive=True)
    if "trap" in data:
        kw["trap"] = _parse_trap(data["trap"], kw.get("chip_half_width", 10e-6))
    if "current_A" in data:
        kw["current"] = _num(data["current_A"], "current_A")
    if "bias_T" in data:
        b = data["bias_T"]
        kw["bias"] = (0.0, -_num(b, "bias_T"), 0.0) if not isinstance(b, list) else _vec3(b, "bias_T")
    if "ioffe_T" in data:
        kw["ioffe"] = _num(data["ioffe_T"], "ioffe_T")
    if "orientation" in data:
        o = data["orientation"]
        if isinstance(o, str):
            if o not in GRAVITY_DIRECTIONS:
                raise ConfigError(f"orientation must be one of {sorted(GRAVITY_DIRECTIONS)} or a vector")
            kw["orientation"] = o
        else:
            kw["orientation"] = _vec3(o, "orientation")
    if "particle" in data:
        kw["particle"] = _parse_particle(data["particle"])
    if "superconductor" in data:
        kw["superconductor"] = _parse_sc(data["superconductor"])
    if "images" in data:
        kw["images"] = _bool(data["images"], "images")
    if "terms" in data:
        t = _check_keys(data["terms"], _TERM_KEYS, "terms")
        kw["terms"] = PotentialOptions(**{k: _bool(v, f"terms.{k}") for k, v in t.items()})
    if "x_guess_m" in data:
        kw["x_guess"] = _vec3(data["x_guess_m"], "x_guess_m")
    if "hold" in data:
        h = data["hold"]
        if not isinstance(h, list) or any(a not in AXES for a in h):
            raise ConfigError("hold must be a list drawn from 'x', 'y', 'z'")
        kw["hold"] = tuple(sorted(AXES[a] for a in h))
        if kw["hold"] and "x_guess" not in kw:
            raise ConfigError("hold requires x_guess_m")
    if "region" in data:
        r = _check_keys(data["region"], _REGION_KEYS, "region")
        if set(r) != _REGION_KEYS:
            raise ConfigError("region needs both lo_m and hi_m")
        lo, hi = _vec3(r["lo_m"], "region.lo_m"), _vec3(r["hi_m"], "region.hi_m")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigError("region.lo_m must be below region.hi_m on every axis")
        kw["region"] = (lo, hi)
    if "meissner_region" in data:
        if data["meissner_region"] not in ("trap", "chip"):
            raise ConfigError("meissner_region must be 'trap' or 'chip'")
        kw["meissner_region"] = data["meissner_region"]
    if "profile" in data:
        kw["profile"] = _parse_profile(data["profile"])
    if "crossover" in data:
        kw["crossover"] = _parse_crossover(data["crossover"])
    if "sweep" in data:
        s = _check_keys(data["sweep"], _SWEEP_KEYS, "sweep")
        if s.get("parameter") not in SWEEP_PARAMETERS:
            raise ConfigError(f"sweep.parameter must be one of {sorted(SWEEP_PARAMETERS)}")
        vals = s.get("values", [])
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.values must be a non-empty list")
        kw["sweep_parameter"] = s["parameter"]
        kw["sweep_values"] = tuple(_num(v, f"sweep.values[{i}]") for i, v in enumerate(vals))
    cfg = RunConfig(**kw)
    cfg.layout()  # validate geometry eagerly
    return cfg


def _parse_profile(v) -> ProfileSpec:
    _check_keys(v, _PROFILE_KEYS, "profile")
    kw = {}
    if "quantity" in v:
        if v["quantity"] not in ("field", "potential"):
            raise ConfigError("profile.quantity must be 'field' or 'potential'")
        kw["quantity"] = v["quantity"]
    if "axis" in v:
        if v["axis"] not in AXES:
            raise ConfigError("profile.axis must be x, y or z")
        kw["axis"] = v["axis"]
    for k, name in (("start_m", "start"), ("stop_m", "stop")):
        if k in v:
            kw[name] = _num(v[k], f"profile.{k}")
    if "points" in v:
        kw["points"] = _num(v["points"], "profile.points", positive=True, integer=True)
    if "through_m" in v:
        kw["through"] = _vec3(v["through_m"], "profile.through_m")
    return ProfileSpec(**kw)


def _parse_crossover(v) -> CrossoverSpec:
    _check_keys(v, _CROSS_KEYS, "crossover")
    kw = {}
    for k in ("kind_a", "kind_b"):
        if k in v:
            if v[k] not in KINDS_SS:
                raise ConfigError(f"crossover.{k} must be one of {KINDS_SS}")
            kw[k] = v[k]
    if "factor" in v:
        kw["factor"] = _num(v["factor"], "crossover.factor", positive=True)
    if "r_min_m" in v:
        kw["r_min"] = _num(v["r_min_m"], "crossover.r_min_m", positive=True)
    if "r_max_m" in v:
        kw["r_max"] = _num(v["r_max_m"], "crossover.r_max_m", positive=True)
    if "points" in v:
        kw["points"] = _num(v["points"], "crossover.points", positive=True, integer=True)
    if "angles_rad" in v and v["angles_rad"] is not None:
        kw["angles"] = _vec3(v["angles_rad"], "crossover.angles_rad")
    if "B_local_T" in v:
        kw["B_local"] = _num(v["B_local_T"], "crossover.B_local_T")
    spec = CrossoverSpec(**kw)
    if spec.kind_a == spec.kind_b:
        raise ConfigError("crossover.kind_a and crossover.kind_b must differ")
    if spec.r_min >= spec.r_max:
        raise ConfigError("crossover.r_min_m must be below r_max_m")
    return spec


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(data)
