"""Superconductor operating limits, shielding estimates and interaction dominance."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import bisect

from .core import CONST, ParticleSpec, mass_of
from .errors import DomainError, NoCrossingError
from .fieldsolver import BiasField, FieldModel
from .geometry import ChipLayout, SuperconductorSpec
from .potentials import (
    PotentialOptions,
    SpherePairConfig,
    diamagnetic_energy,
    gravity_sphere_chip,
    sphere_plate_potential,
    sphere_sphere_potential,
)


@dataclass(frozen=True)
class ConstraintMargin:
    name: str
    limit: float
    observed: float
    margin: float  # limit / observed; inf when nothing is observed

    @property
    def passed(self) -> bool:
        return self.margin >= 1.0

    @classmethod
    def of(cls, name: str, limit: float, observed: float) -> "ConstraintMargin":
        margin = limit / observed if observed > 0 else math.inf
        return cls(name, float(limit), float(observed), float(margin))

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "limit": self.limit,
            "observed": self.observed,
            "margin": self.margin if math.isfinite(self.margin) else None,
            "pass": self.passed,
        }


def hc1_at_temperature(sc: SuperconductorSpec) -> float:
    """Lower critical field (T) at the operating temperature, parabolic law."""
    if not 0 <= sc.T_op < sc.Tc:
        raise DomainError("need 0 <= T_op < Tc")
    return sc.Hc1_0 * (1.0 - (sc.T_op / sc.Tc) ** 2)


def _plane_frame(sc: SuperconductorSpec):
    n = np.asarray(sc.normal)
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = a - (a @ n) * n
    u /= np.linalg.norm(u)
    return u, np.cross(n, u), n


def meissner_sample_points(layout: ChipLayout, region: str = "trap", spacing: float | None = None) -> np.ndarray:
    """Points on the screen mid-plane where the applied field is checked.

    ``trap``: a square patch of half-size 5 d/2 centered under the trap
    (the interior wires). ``chip``: strips 5 d/2 wide around every wire,
    extended past the wire ends so bends and corners are covered.
    """
    sc = layout.sc
    h = layout.chip_half_width
    step = spacing or h / 10.0
    origin = np.asarray(sc.normal) * sc.mid_plane_z
    if region == "trap":
        interior = [s for chain in layout.chains() for s in chain[1:-1]] or list(layout.wires)
        if interior:
            ends = np.array([p for s in interior for p in (s.p_start, s.p_end)])
            c = ends.mean(axis=0)
        else:
            c = origin
        c = c - (sc.height(c)) * np.asarray(sc.normal)
        u, v, _ = _plane_frame(sc)
        k = np.arange(-50, 51) * (5.0 * h / 50.0) if spacing is None else np.arange(-5 * h, 5 * h + step / 2, step)
        A, B = np.meshgrid(k, k, indexing="ij")
        return c + A.reshape(-1, 1) * u + B.reshape(-1, 1) * v
    if region == "chip":
        pts = []
        for w in layout.wires:
            t, lat = w.direction, w.lateral
            p0 = np.asarray(w.p_start) - h * np.asarray(sc.normal)
            n_along = int(min(2000, math.ceil((w.length + 10 * h) / (2 * step)))) + 1
            s = np.linspace(-5 * h, w.length + 5 * h, n_along)
            q = np.linspace(-5 * h, 5 * h, 41)
            S, Q = np.meshgrid(s, q, indexing="ij")
            pts.append(p0 + S.reshape(-1, 1) * t + Q.reshape(-1, 1) * lat)
        if not pts:
            return origin[None, :]
        return np.concatenate(pts)
    raise DomainError(f"unknown Meissner region {region!r}")


def meissner_check(layout: ChipLayout, bias: BiasField, sc: SuperconductorSpec | None = None,
                   region: str = "trap") -> list[ConstraintMargin]:
    """Perpendicular and parallel field limits on the screen.

    The perpendicular test uses the wire field alone (no images, no bias):
    that is the flux the screen has to expel. The parallel test adds the
    bias to the wire field's in-plane part.
    """
    sc = sc or layout.sc
    hc1 = hc1_at_temperature(sc)
    pts = meissner_sample_points(layout, region)
    wires_only = FieldModel(layout, BiasField(), with_images=False, check=False)
    Bw = wires_only.B(pts)
    n = np.asarray(sc.normal)
    b_perp = np.abs(Bw @ n)
    Bt = Bw + bias.total
    Bt_inplane = Bt - np.outer(Bt @ n, n)
    b_par = np.linalg.norm(Bt_inplane, axis=1)
    return [
        ConstraintMargin.of("meissner_perpendicular", hc1, float(b_perp.max(initial=0.0))),
        ConstraintMargin.of("meissner_parallel", sc.parallel_factor * hc1, float(b_par.max(initial=0.0))),
    ]


def perpendicular_threshold(layout: ChipLayout, bias: BiasField, lo: float = 2e-6, hi: float = 30e-6,
                            region: str = "trap", rtol: float = 1e-4) -> float:
    """Chip half-width below which the perpendicular field exceeds Hc1."""
    def excess(h):
        m = meissner_check(layout.with_half_width(h), bias, region=region)[0]
        return m.observed - m.limit

    if excess(lo) <= 0 or excess(hi) > 0:
        raise NoCrossingError("perpendicular margin does not change sign inside the bracket")
    return bisect(excess, lo, hi, xtol=rtol * lo)


def shielding_efficiency(sc: SuperconductorSpec) -> float:
    """Attenuation exp(thickness / lambda_L) of a thin film."""
    if sc.lambda_L <= 0 or sc.thickness < 0:
        raise DomainError("need lambda_L > 0 and thickness >= 0")
    return math.exp(sc.thickness / sc.lambda_L)


def required_shielding(cfg: SpherePairConfig, r: float | None = None) -> float:
    """|V_MM| / V_GR between the two spheres at distance r."""
    c = cfg if r is None else cfg.at(r)
    return abs(sphere_sphere_potential("MM", c)) / abs(sphere_sphere_potential("GR", c))


def crossover_distance(kind_a: str, kind_b: str, factor: float, cfg: SpherePairConfig,
                       lo: float = 1e-6, hi: float = 1.0, rtol: float = 1e-4) -> float:
    """Distance where |V_a| = factor |V_b|, by bisection in log r over [lo, hi]."""
    if kind_a == kind_b:
        raise NoCrossingError("identical potentials never cross")

    def gap(logr):
        c = cfg.at(math.exp(logr))
        va = abs(sphere_sphere_potential(kind_a, c))
        vb = factor * abs(sphere_sphere_potential(kind_b, c))
        if va == 0 or vb == 0:
            raise NoCrossingError(f"{kind_a if va == 0 else kind_b} potential vanishes")
        return math.log(va) - math.log(vb)

    a, b = math.log(lo), math.log(hi)
    ga, gb = gap(a), gap(b)
    if ga * gb > 0:
        raise NoCrossingError(f"|{kind_a}| - {factor:g}|{kind_b}| keeps its sign on [{lo:g}, {hi:g}] m")
    # xtol in log r is a relative tolerance in r
    return math.exp(bisect(gap, a, b, xtol=0.1 * rtol))


def cp_crossover_closed_form(p: ParticleSpec, factor: float = 10.0) -> float:
    """r where G m^2 / r = factor |V_CP| for two identical spheres."""
    a = (p.eps_r - 1) / (p.eps_r + 2)
    num = factor * 23.0 * CONST.hbar * CONST.c / (4.0 * math.pi) * a * a * p.radius**6
    return (num / (CONST.G * mass_of(p) ** 2)) ** (1.0 / 6.0)


def crossover_scan(kind_a: str, kind_b: str, cfg: SpherePairConfig, rs: Sequence[float]) -> np.ndarray:
    """Rows (r, V_a, V_b)."""
    rows = [(r, sphere_sphere_potential(kind_a, cfg.at(r)), sphere_sphere_potential(kind_b, cfg.at(r))) for r in rs]
    return np.array(rows, dtype=float).reshape(-1, 3)


def dominance_table(layout: ChipLayout, bias: BiasField, p: ParticleSpec, x_eq,
                    options: PotentialOptions | None = None, with_images: bool = True) -> dict:
    """Magnitude of each screen interaction relative to the diamagnetic energy at x_eq."""
    x_eq = np.asarray(x_eq, dtype=float)
    B = float(FieldModel(layout, bias, with_images).B_mag(x_eq))
    z0 = float(layout.sc.height(x_eq))
    dia = diamagnetic_energy(p, B)
    slab = layout.substrate
    c = np.asarray(slab.center)
    gr = gravity_sphere_chip(p, slab, float(x_eq[2] - c[2]), (x_eq[0] - c[0], x_eq[1] - c[1]))
    vals = {
        "diamagnetic": dia,
        "casimir_polder": sphere_plate_potential("CP", p, z0),
        "electric_dipole": sphere_plate_potential("DD", p, z0),
        "magnetic_dipole": sphere_plate_potential("MM", p, z0, local_B=B),
        "gravity_chip": gr,
    }
    return {k: (abs(v) / dia if dia > 0 else math.inf) for k, v in vals.items()}
