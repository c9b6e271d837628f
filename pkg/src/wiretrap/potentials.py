"""Interaction energies of a levitated sphere and the assembled trap landscape.

Sign conventions: the diamagnetic energy is positive, |chi| V B^2 / (2 mu0),
so equilibria are minima of the total energy. Sphere-sphere and sphere-plate
expressions keep the signs of their textbook forms (Casimir-Polder and image
electric dipole attractive, image magnetic dipole repulsive); sphere-sphere
gravity is returned as the positive magnitude G m1 m2 / r, while the
sphere-chip gravity is a bound (negative) energy.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .core import (
    CONST,
    ParticleSpec,
    induced_electric_dipole,
    magnetic_moment_magnitude,
    mass_of,
    polarizability_volume,
)
from .errors import ConfigError, ConvergenceError, DomainError
from .fieldsolver import BiasField, FieldModel, grid_points, write_rows_csv
from .geometry import ChipLayout, Slab

KINDS_SS = ("DD", "CP", "MM", "GR")
KINDS_SP = ("DD", "CP", "MM")

GRAVITY_DIRECTIONS = {
    "V": (0.0, -1.0, 0.0),  # chip standing vertically, bias axis along gravity
    "H": (0.0, 0.0, -1.0),  # chip lying flat, particle above it
    "none": (0.0, 0.0, 0.0),
}


def gravity_direction(orientation) -> np.ndarray:
    """Unit vector of g for an orientation name, or a user vector (normalized)."""
    if isinstance(orientation, str):
        try:
            return np.array(GRAVITY_DIRECTIONS[orientation])
        except KeyError:
            raise ConfigError(f"orientation must be one of {sorted(GRAVITY_DIRECTIONS)} or a vector") from None
    v = np.asarray(orientation, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if not np.isfinite(n):
        raise ConfigError("gravity vector must be finite")
    return v / n if n > 0 else v


@dataclass(frozen=True)
class SpherePairConfig:
    """Two spheres at center distance ``r``.

    ``angles`` = (theta_a, theta_b, phi) orients the dipoles relative to the
    line of centers; ``None`` selects the collinear head-to-tail arrangement,
    which maximizes |V| for both dipole channels. ``B_local`` sets the field
    that induces the magnetic moments when no override is given.
    """

    particle_a: ParticleSpec
    particle_b: ParticleSpec
    r: float
    angles: tuple[float, float, float] | None = None
    B_local: float = 0.0

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise DomainError(f"separation must be positive, got {self.r!r}")

    def at(self, r: float) -> "SpherePairConfig":
        return SpherePairConfig(self.particle_a, self.particle_b, r, self.angles, self.B_local)

    @property
    def overlapping(self) -> bool:
        return self.r <= self.particle_a.radius + self.particle_b.radius


def _dipole_geometry(angles) -> float:
    """(u1.u2 - 3 (u1.r)(u2.r)) for unit dipoles; -2 for head-to-tail."""
    if angles is None:
        return -2.0
    ta, tb, phi = angles
    dot = math.cos(ta) * math.cos(tb) + math.sin(ta) * math.sin(tb) * math.cos(phi)
    return dot - 3.0 * math.cos(ta) * math.cos(tb)


def sphere_sphere_potential(kind: str, cfg: SpherePairConfig) -> float:
    r = cfg.r
    if not r > 0:
        raise DomainError("r must be positive")
    a, b = cfg.particle_a, cfg.particle_b
    if kind == "DD":
        return a.d_perm * b.d_perm * _dipole_geometry(cfg.angles) / (4.0 * math.pi * CONST.eps0 * r**3)
    if kind == "MM":
        m1 = magnetic_moment_magnitude(a, cfg.B_local)
        m2 = magnetic_moment_magnitude(b, cfg.B_local)
        return CONST.mu0 / (4.0 * math.pi) * m1 * m2 * _dipole_geometry(cfg.angles) / r**3
    if kind == "CP":
        # identical-material form; mixed pairs use the geometric mean of the factors
        fa = (a.eps_r - 1) / (a.eps_r + 2)
        fb = (b.eps_r - 1) / (b.eps_r + 2)
        return -23.0 * CONST.hbar * CONST.c / (4.0 * math.pi) * fa * fb * a.radius**3 * b.radius**3 / r**7
    if kind == "GR":
        return CONST.G * mass_of(a) * mass_of(b) / r
    raise ConfigError(f"unknown sphere-sphere kind {kind!r}; choose from {KINDS_SS}")


def sphere_plate_potential(kind: str, p: ParticleSpec, z0: float, local_B: float = 0.0, local_E: float = 0.0) -> float:
    """Sphere in front of a perfectly screening plate at distance z0.

    The electric dipole magnitude is d_perm plus the dipole induced by a
    local field ``local_E`` (taken parallel to the permanent one).
    """
    if not z0 > 0:
        raise DomainError(f"z0 must be positive, got {z0!r}")
    if kind == "DD":
        d = p.d_perm + float(np.linalg.norm(induced_electric_dipole(p, local_E)))
        return -(d * d) / (4.0 * math.pi * CONST.eps0 * 8.0 * z0**3) * (1.0 + math.cos(p.theta_e) ** 2)
    if kind == "CP":
        return -3.0 * CONST.hbar * CONST.c / (8.0 * math.pi) * polarizability_volume(p) / z0**4
    if kind == "MM":
        m = magnetic_moment_magnitude(p, abs(local_B))
        return CONST.mu0 * m * m / (4.0 * math.pi * z0**3) * (1.0 + math.cos(p.theta_m) ** 2)
    raise ConfigError(f"unknown sphere-plate kind {kind!r}; choose from {KINDS_SP}")


def _plate_terms(p: ParticleSpec, z0: np.ndarray, B_mag: np.ndarray):
    # vectorized copies of sphere_plate_potential for the landscape model
    dd = -(p.d_perm**2) / (4.0 * math.pi * CONST.eps0 * 8.0 * z0**3) * (1.0 + math.cos(p.theta_e) ** 2)
    cp = -3.0 * CONST.hbar * CONST.c / (8.0 * math.pi) * polarizability_volume(p) / z0**4
    m = magnetic_moment_magnitude(p, B_mag)
    mm = CONST.mu0 * m * m / (4.0 * math.pi * z0**3) * (1.0 + math.cos(p.theta_m) ** 2)
    return dd, cp, mm


def _graded_rule(a: float, b: float, c: float, h: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss rule on [a, b] with panels doubling in size away from c."""
    c = min(max(c, a), b)
    edges = {a, b, c}
    for side, end in ((1.0, b), (-1.0, a)):
        x, w = c, h
        while side * (end - x) > 1.5 * w:
            x += side * w
            edges.add(x)
            w *= 2.0
    e = np.array(sorted(edges))
    e = e[np.concatenate([[True], np.diff(e) > 0])]
    xg, wg = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (e[1:] + e[:-1]), 0.5 * np.diff(e)
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def _slab_box(slab: Slab) -> np.ndarray:
    c = np.asarray(slab.center)
    half = 0.5 * np.array([slab.length, slab.width, slab.thickness])
    return np.stack([c - half, c + half], axis=1)


def _inverse_distance_integral(box: np.ndarray, s: np.ndarray, n: int) -> float:
    gap = np.maximum(np.maximum(box[:, 0] - s, s - box[:, 1]), 0.0)
    h = float(np.linalg.norm(gap))
    rules = [_graded_rule(box[k, 0], box[k, 1], s[k], 0.5 * h, n) for k in range(3)]
    (xn, xw), (yn, yw), (zn, zw) = rules
    dx2 = (xn - s[0]) ** 2
    dy2 = (yn - s[1]) ** 2
    total = 0.0
    for zk, wk in zip(zn, zw):
        r = np.sqrt(dx2[:, None] + dy2[None, :] + (zk - s[2]) ** 2)
        total += wk * float(xw @ (1.0 / r) @ yw)
    return total


def gravity_sphere_chip(p: ParticleSpec, slab: Slab, z0: float, lateral: Sequence[float] = (0.0, 0.0),
                        rtol: float = 1e-4) -> float:
    """Newtonian energy of the sphere (a point mass) against the uniform slab.

    The sphere sits at height ``z0`` above the slab's mid-plane and lateral
    offset ``lateral`` from its center. The volume integral uses graded
    composite Gauss rules, raising the order until two successive results
    agree to ``rtol``.
    """
    if slab.thickness == 0 or slab.density == 0:
        return 0.0
    if math.isinf(z0):
        return 0.0
    box = _slab_box(slab)
    s = np.array([box[0].mean() + lateral[0], box[1].mean() + lateral[1], box[2].mean() + z0])
    if np.all((s > box[:, 0]) & (s < box[:, 1])):
        raise DomainError("sphere center lies inside the slab")
    prev = None
    for n in (4, 6, 8, 12, 16):
        val = _inverse_distance_integral(box, s, n)
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return -CONST.G * mass_of(p) * slab.density * val
        prev = val
    raise ConvergenceError("slab gravity quadrature did not reach the requested tolerance")


def diamagnetic_energy(p: ParticleSpec, B_mag):
    """|chi_v| V B^2 / (2 mu0); positive for a diamagnet."""
    B_mag = np.asarray(B_mag, dtype=float)
    if np.any(B_mag < 0):
        raise DomainError("B_mag must be non-negative")
    out = -p.chi_v * p.volume * B_mag**2 / (2.0 * CONST.mu0)
    return out if out.ndim else float(out)


def earth_gravity_energy(p: ParticleSpec, position, g_dir):
    """m g (-g_dir . x): zero at the origin, growing against gravity."""
    g_dir = np.asarray(g_dir, dtype=float)
    if abs(np.linalg.norm(g_dir) - 1.0) > 1e-9:
        raise DomainError("g_dir must be a unit vector")
    out = -mass_of(p) * CONST.g * (np.asarray(position, dtype=float) @ g_dir)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class PotentialOptions:
    """Which terms enter the total energy. ``gravity`` is V, H, none or a vector."""

    gravity: object = "V"
    plate_dd: bool = True
    plate_cp: bool = True
    plate_mm: bool = True
    chip_gravity: bool = True

    @property
    def g_dir(self) -> np.ndarray:
        return gravity_direction(self.gravity)

    def only_magnetic(self) -> "PotentialOptions":
        return PotentialOptions("none", False, False, False, False)


@dataclass(frozen=True)
class EnergyBreakdown:
    u_dia: float
    u_grav_earth: float
    v_cp_sp: float = 0.0
    v_dd_sp: float = 0.0
    v_mm_sp: float = 0.0
    v_gr_sp: float = 0.0
    total: float = field(init=False)

    def __post_init__(self) -> None:
        parts = (self.u_dia, self.u_grav_earth, self.v_cp_sp, self.v_dd_sp, self.v_mm_sp, self.v_gr_sp)
        object.__setattr__(self, "total", math.fsum(parts))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class PotentialModel:
    """Total potential energy landscape of one particle over one chip layout."""

    def __init__(self, layout: ChipLayout, bias: BiasField, particle: ParticleSpec,
                 options: PotentialOptions | None = None, with_images: bool = True):
        self.layout = layout
        self.particle = particle
        self.options = options or PotentialOptions()
        self.field = FieldModel(layout, bias, with_images)
        self.mass = mass_of(particle)
        self.g_dir = self.options.g_dir
        self._dia = -particle.chi_v * particle.volume / (2.0 * CONST.mu0)

    def z0(self, x) -> np.ndarray:
        return self.layout.sc.height(x)

    def parts(self, x, chip_gravity: bool | None = None) -> dict:
        """Per-term energies at points ``x`` (shape (..., 3))."""
        x = np.asarray(x, dtype=float)
        o = self.options
        B = self.field.B_mag(x)
        out = {
            "u_dia": self._dia * B * B,
            "u_grav_earth": -self.mass * CONST.g * (x @ self.g_dir),
        }
        zero = np.zeros_like(B)
        if o.plate_dd or o.plate_cp or o.plate_mm:
            z0 = self.z0(x)
            if np.any(z0 <= 0):
                raise DomainError("point at or below the superconductor mid-plane")
            dd, cp, mm = _plate_terms(self.particle, z0, B)
        out["v_cp_sp"] = cp if o.plate_cp else zero
        out["v_dd_sp"] = dd if o.plate_dd else zero
        out["v_mm_sp"] = mm if o.plate_mm else zero
        use_gr = o.chip_gravity if chip_gravity is None else chip_gravity
        out["v_gr_sp"] = self._chip_gravity(x) if use_gr else zero
        return out

    def _chip_gravity(self, x: np.ndarray) -> np.ndarray:
        slab = self.layout.substrate
        pts = x.reshape(-1, 3)
        c = np.asarray(slab.center)
        vals = [gravity_sphere_chip(self.particle, slab, float(q[2] - c[2]), (q[0] - c[0], q[1] - c[1])) for q in pts]
        return np.array(vals).reshape(x.shape[:-1])

    def energy(self, x) -> np.ndarray:
        parts = self.parts(x)
        return (parts["u_dia"] + parts["u_grav_earth"]) + (
            parts["v_cp_sp"] + parts["v_dd_sp"] + parts["v_mm_sp"] + parts["v_gr_sp"]
        )

    def without_chip_gravity(self) -> "PotentialModel":
        twin = copy.copy(self)
        twin.options = replace(self.options, chip_gravity=False)
        return twin

    def energy_fast(self, x) -> np.ndarray:
        """Total energy without the sphere-chip gravity term (<1e-28 J here), for wide scans."""
        parts = self.parts(x, chip_gravity=False)
        return (parts["u_dia"] + parts["u_grav_earth"]) + (parts["v_cp_sp"] + parts["v_dd_sp"] + parts["v_mm_sp"])

    def __call__(self, x):
        return self.energy(x)

    def breakdown(self, x) -> EnergyBreakdown:
        parts = self.parts(np.asarray(x, dtype=float).reshape(3))
        return EnergyBreakdown(**{k: float(v) for k, v in parts.items()})


def total_potential(layout: ChipLayout, bias: BiasField, p: ParticleSpec, x,
                    options: PotentialOptions | None = None, with_images: bool = True) -> EnergyBreakdown:
    return PotentialModel(layout, bias, p, options, with_images).breakdown(x)


POTENTIAL_COLUMNS = ("x", "y", "z", "u_dia", "u_grav", "v_cp", "v_dd", "v_mm", "v_gr", "total")


def potential_profile(model: PotentialModel, xs, ys, zs) -> np.ndarray:
    pts = grid_points(xs, ys, zs)
    parts = model.parts(pts)
    keys = ("u_dia", "u_grav_earth", "v_cp_sp", "v_dd_sp", "v_mm_sp", "v_gr_sp")
    cols = [parts[k] for k in keys]
    total = (cols[0] + cols[1]) + (cols[2] + cols[3] + cols[4] + cols[5])
    return np.column_stack([pts, *cols, total])


def write_potential_csv(path_or_file, rows: np.ndarray) -> None:
    write_rows_csv(path_or_file, POTENTIAL_COLUMNS, rows)
