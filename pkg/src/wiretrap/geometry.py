"""Chip layouts: ribbon wires, the superconducting screen and the substrate slab.

Coordinates follow the chip convention used everywhere in the package: the
origin sits on the superconductor mid-plane, the wires lie in the plane
``z = chip_half_width`` and the trapped particle lives above them.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError

Vec = tuple[float, float, float]

# Densities (kg/m^3) used by the default substrate stack.
SIN_DENSITY = 3170.0
NB_DENSITY = 8570.0

_POINT_TOL = 1e-12  # m; endpoints closer than this are the same node


def _vec(v) -> Vec:
    a = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"non-finite vector {v!r}")
    return (float(a[0]), float(a[1]), float(a[2]))


def _unit(v) -> Vec:
    a = np.asarray(v, dtype=float)
    n = np.linalg.norm(a)
    if n == 0:
        raise ConfigError("zero-length direction vector")
    return _vec(a / n)


@dataclass(frozen=True)
class RibbonSegment:
    """Straight, zero-height ribbon carrying a uniform sheet current.

    Current flows from ``p_start`` to ``p_end``; ``plane_normal`` is the
    normal of the ribbon face.
    """

    p_start: Vec
    p_end: Vec
    width: float
    current: float
    plane_normal: Vec = (0.0, 0.0, 1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_start", _vec(self.p_start))
        object.__setattr__(self, "p_end", _vec(self.p_end))
        object.__setattr__(self, "plane_normal", _vec(self.plane_normal))
        if not self.width > 0:
            raise ConfigError(f"ribbon width must be positive, got {self.width!r}")
        if not math.isfinite(self.current):
            raise ConfigError("ribbon current must be finite")
        if self.length <= 0:
            raise ConfigError("ribbon has zero length")
        n = np.asarray(self.plane_normal)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ConfigError("plane_normal must be a unit vector")
        if abs(n @ self.direction) > 1e-9:
            raise ConfigError("plane_normal must be perpendicular to the ribbon axis")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.p_end, self.p_start)))

    @property
    def direction(self) -> np.ndarray:
        d = np.subtract(self.p_end, self.p_start)
        return d / np.linalg.norm(d)

    @property
    def lateral(self) -> np.ndarray:
        """In-plane unit vector across the width."""
        return np.cross(self.plane_normal, self.direction)


@dataclass(frozen=True)
class SuperconductorSpec:
    """Thin-film screen; defaults describe a 1 um Nb film at 4.2 K."""

    Tc: float = 9.25
    Hc1_0: float = 0.170
    T_op: float = 4.2
    lambda_L: float = 41e-9
    thickness: float = 1e-6
    parallel_factor: float = 1.5
    mid_plane_z: float = 0.0
    normal: Vec = (0.0, 0.0, 1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "normal", _unit(self.normal))
        if not 0 <= self.T_op < self.Tc:
            raise ConfigError(f"need 0 <= T_op < Tc, got T_op={self.T_op}, Tc={self.Tc}")
        if not self.Hc1_0 > 0:
            raise ConfigError("Hc1_0 must be positive")
        if not self.lambda_L > 0:
            raise ConfigError("lambda_L must be positive")
        if not self.thickness > 0:
            raise ConfigError("film thickness must be positive")
        if not 1.0 <= self.parallel_factor <= 1.69:
            raise ConfigError("parallel_factor must lie in [1, 1.69]")

    def reflect(self, points) -> np.ndarray:
        """Mirror points across the mid-plane."""
        pts = np.asarray(points, dtype=float)
        n = np.asarray(self.normal)
        dist = pts @ n - self.mid_plane_z
        return pts - 2.0 * dist[..., None] * n

    def height(self, points) -> np.ndarray:
        """Signed distance of points from the mid-plane."""
        return np.asarray(points, dtype=float) @ np.asarray(self.normal) - self.mid_plane_z


@dataclass(frozen=True)
class Slab:
    """Rectangular chip body centered on ``center``; lateral extent length x width."""

    length: float
    width: float
    thickness: float
    density: float
    center: Vec = (0.0, 0.0, 0.0)
    layers: tuple[tuple[str, float, float], ...] = field(default=())

    def __post_init__(self) -> None:
        if min(self.length, self.width) <= 0 or self.thickness < 0 or self.density < 0:
            raise ConfigError("slab needs positive lateral size and non-negative thickness/density")

    @property
    def volume(self) -> float:
        return self.length * self.width * self.thickness

    @property
    def mass(self) -> float:
        return self.density * self.volume


def default_substrate(chip_half_width: float = 10e-6, lateral: float = 2e-3) -> Slab:
    """Two SiN layers sandwiching a 1 um Nb film, total thickness 2 * chip_half_width."""
    nb = 1e-6
    total = 2.0 * chip_half_width
    sin_each = max(total - nb, 0.0) / 2.0
    layers = (("SiN", sin_each, SIN_DENSITY), ("Nb", nb, NB_DENSITY), ("SiN", sin_each, SIN_DENSITY))
    mass_per_area = sum(t * rho for _, t, rho in layers)
    density = mass_per_area / total if total > 0 else 0.0
    return Slab(lateral, lateral, total, density, layers=layers)


@dataclass(frozen=True)
class ChipLayout:
    """Ordered ribbon wires above a superconducting screen.

    Consecutive wires that share an endpoint form one current path. With
    ``feeds`` set, the two open ends of every path continue straight off the
    chip to infinity (the external supply), so the current is conserved and
    the field is curl-free everywhere outside the conductors.
    """

    wires: tuple[RibbonSegment, ...]
    sc: SuperconductorSpec = field(default_factory=SuperconductorSpec)
    substrate: Slab = field(default_factory=default_substrate)
    chip_half_width: float = 10e-6
    feeds: bool = True
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "wires", tuple(self.wires))
        if not self.chip_half_width > 0:
            raise ConfigError("chip_half_width must be positive")
        check_planarity(self)
        check_no_overlap(self.wires)

    def chains(self) -> list[list[RibbonSegment]]:
        """Split the wire list into connected current paths."""
        out: list[list[RibbonSegment]] = []
        for seg in self.wires:
            if out and _joins(out[-1][-1], seg):
                out[-1].append(seg)
            else:
                out.append([seg])
        return out

    def with_current(self, current: float) -> "ChipLayout":
        """Same geometry with every wire current scaled to ``current`` (sign kept)."""
        ref = max((abs(w.current) for w in self.wires), default=0.0)
        scale = current / ref if ref else 0.0
        return replace(self, wires=tuple(replace(w, current=w.current * scale) for w in self.wires))

    def with_half_width(self, chip_half_width: float) -> "ChipLayout":
        """Move the wire plane (and regrow the substrate) to a new half-width."""
        n = np.asarray(self.sc.normal)
        shift = (chip_half_width - self.chip_half_width) * n
        wires = tuple(
            replace(w, p_start=tuple(np.add(w.p_start, shift)), p_end=tuple(np.add(w.p_end, shift)))
            for w in self.wires
        )
        sub = default_substrate(chip_half_width, self.substrate.length)
        return replace(self, wires=wires, chip_half_width=chip_half_width, substrate=sub)

    @property
    def current(self) -> float:
        return max((abs(w.current) for w in self.wires), default=0.0)


def _joins(a: RibbonSegment, b: RibbonSegment) -> bool:
    # A shared filament bundle needs matching cross-section and current.
    return (
        _same_point(a.p_end, b.p_start)
        and a.width == b.width
        and a.current == b.current
        and a.plane_normal == b.plane_normal
        and 1.0 + float(a.lateral @ b.lateral) > 1e-9
    )


def _same_point(a, b) -> bool:
    return bool(np.max(np.abs(np.subtract(a, b))) <= _POINT_TOL)


def check_planarity(layout: ChipLayout) -> None:
    tol = 1e-9 * max(layout.chip_half_width, 1e-9)
    for w in layout.wires:
        for p in (w.p_start, w.p_end):
            h = float(layout.sc.height(p))
            if abs(h - layout.chip_half_width) > tol:
                raise ConfigError(
                    f"wire endpoint {p} lies {h:.3e} m from the screen, expected {layout.chip_half_width:.3e}"
                )


def check_no_overlap(wires: Sequence[RibbonSegment]) -> None:
    """Reject collinear centerlines that share more than an endpoint."""
    for a, b in itertools.combinations(wires, 2):
        da, db = a.direction, b.direction
        if np.linalg.norm(np.cross(da, db)) > 1e-12:
            continue
        off = np.subtract(b.p_start, a.p_start)
        if np.linalg.norm(off - (off @ da) * da) > _POINT_TOL:
            continue
        s0, s1 = sorted((np.subtract(b.p_start, a.p_start) @ da, np.subtract(b.p_end, a.p_start) @ da))
        overlap = min(s1, a.length) - max(s0, 0.0)
        if overlap > _POINT_TOL:
            raise ConfigError("two wire centerlines overlap")


def make_three_bar_trap(
    L_lead: float,
    L_center: float,
    w: float,
    I: float,
    z_plane: float,
    start_lead: int = -1,
    end_lead: int = 1,
    *,
    sc: SuperconductorSpec | None = None,
    feeds: bool = True,
    name: str = "",
) -> ChipLayout:
    """Central bar along x with one lead at each end running along +/-y.

    ``start_lead``/``end_lead`` give the y side (+1 or -1) on which the lead
    at x = +L_center/2 and x = -L_center/2 extends. Current enters through
    the first lead and flows along -x in the bar, so above the bar the wire
    field points along +y and a bias along -y cancels it.
    """
    if min(L_lead, L_center, w) <= 0:
        raise ConfigError("all lengths must be positive")
    if L_center < w:
        raise ConfigError(f"L_center={L_center} is shorter than the wire width {w}")
    if start_lead not in (-1, 1) or end_lead not in (-1, 1):
        raise ConfigError("lead sides must be +1 or -1")
    a = L_center / 2.0
    p0 = (a, start_lead * L_lead, z_plane)
    p1 = (a, 0.0, z_plane)
    p2 = (-a, 0.0, z_plane)
    p3 = (-a, end_lead * L_lead, z_plane)
    wires = (
        RibbonSegment(p0, p1, w, I),
        RibbonSegment(p1, p2, w, I),
        RibbonSegment(p2, p3, w, I),
    )
    sc = sc or SuperconductorSpec()
    return ChipLayout(
        wires,
        sc=sc,
        substrate=default_substrate(z_plane - sc.mid_plane_z),
        chip_half_width=z_plane - sc.mid_plane_z,
        feeds=feeds,
        name=name,
    )


def make_z_trap(L_lead: float, L_center: float, w: float, I: float, z_plane: float, **kw) -> ChipLayout:
    """z (short) or Z (long) trap: leads leave the bar on opposite sides."""
    return make_three_bar_trap(L_lead, L_center, w, I, z_plane, -1, 1, **kw)


def make_u_trap(L_lead: float, L_center: float, w: float, I: float, z_plane: float, **kw) -> ChipLayout:
    """u trap: both leads run toward -y."""
    return make_three_bar_trap(L_lead, L_center, w, I, z_plane, -1, -1, **kw)


def image_layout(layout: ChipLayout) -> tuple[RibbonSegment, ...]:
    """Mirror wires of the Meissner screen: reflected across the mid-plane, current negated."""
    return reflect_wires(layout.wires, layout.sc)


def reflect_wires(wires: Iterable[RibbonSegment], sc: SuperconductorSpec) -> tuple[RibbonSegment, ...]:
    n = np.asarray(sc.normal)
    out = []
    for w in wires:
        ps, pe = sc.reflect(np.array([w.p_start, w.p_end]))
        pn = np.asarray(w.plane_normal)
        pn = pn - 2.0 * (pn @ n) * n
        out.append(RibbonSegment(tuple(ps), tuple(pe), w.width, -w.current, tuple(pn)))
    return tuple(out)


def substrate_slab(layout: ChipLayout) -> Slab:
    return layout.substrate


# Reference geometry: 5 um wide wires, 5 mm leads, 12 A, wire plane 10 um above the screen.
TRAP_PRESETS = {
    "z30": dict(kind="z", L_center=30e-6, bias=0.20),
    "u30": dict(kind="u", L_center=30e-6, bias=0.20),
    "Z1mm": dict(kind="z", L_center=1e-3, bias=0.25),
}


def preset_layout(
    name: str,
    current: float = 12.0,
    chip_half_width: float = 10e-6,
    L_lead: float = 5e-3,
    width: float = 5e-6,
    sc: SuperconductorSpec | None = None,
) -> ChipLayout:
    try:
        spec = TRAP_PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown trap preset {name!r}; choose from {sorted(TRAP_PRESETS)}") from None
    sc = sc or SuperconductorSpec()
    maker = make_z_trap if spec["kind"] == "z" else make_u_trap
    return maker(L_lead, spec["L_center"], width, current, sc.mid_plane_z + chip_half_width, sc=sc, name=name)


def preset_bias(name: str) -> float:
    """Default bias field magnitude (T) for a preset."""
    return TRAP_PRESETS[name]["bias"]


def rotate_layout(layout: ChipLayout, R) -> ChipLayout:
    """Rigidly rotate wires and screen about the origin (the substrate box keeps its axes)."""
    R = np.asarray(R, dtype=float)
    if not np.allclose(R @ R.T, np.eye(3), atol=1e-12) or np.linalg.det(R) < 0:
        raise ConfigError("R must be a proper rotation matrix")
    wires = tuple(
        replace(w, p_start=tuple(R @ w.p_start), p_end=tuple(R @ w.p_end), plane_normal=tuple(R @ w.plane_normal))
        for w in layout.wires
    )
    sc = replace(layout.sc, normal=tuple(R @ np.asarray(layout.sc.normal)))
    return replace(layout, wires=wires, sc=sc)
