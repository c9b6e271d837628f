"""Physical constants, particle specifications and per-particle response functions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA-2018 values in SI units."""

    mu0: float = 1.25663706212e-6      # T m / A
    eps0: float = 8.8541878128e-12     # F / m
    hbar: float = 1.054571817e-34      # J s
    c: float = 299792458.0             # m / s
    G: float = 6.67430e-11             # m^3 / (kg s^2)
    g: float = 9.80665                 # m / s^2
    e: float = 1.602176634e-19         # C
    kB: float = 1.380649e-23           # J / K


CONST = PhysicalConstants()

EV = CONST.e  # joules per electron-volt


@dataclass(frozen=True)
class ParticleSpec:
    """A homogeneous dielectric, diamagnetic sphere.

    ``d_perm`` is the permanent electric dipole magnitude. ``theta_e`` and
    ``theta_m`` are the angles between the plate normal and the electric and
    magnetic dipoles. ``m_override`` pins the magnetic moment magnitude (J/T)
    instead of deriving it from the local field.
    """

    radius: float = 500e-9
    density: float = 3513.0
    chi_v: float = -2.2e-5
    eps_r: float = 5.7
    d_perm: float = 0.1 * CONST.e * 1e-6
    theta_e: float = 0.0
    theta_m: float = 0.0
    m_override: float | None = None

    def __post_init__(self) -> None:
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ConfigError(f"radius must be positive, got {self.radius!r}")
        if not (self.density > 0 and math.isfinite(self.density)):
            raise ConfigError(f"density must be positive, got {self.density!r}")
        if not self.eps_r > 1:
            raise ConfigError(f"eps_r must exceed 1, got {self.eps_r!r}")
        if not -1 < self.chi_v < 0:
            raise ConfigError(f"chi_v must lie in (-1, 0) for a diamagnet, got {self.chi_v!r}")
        for name in ("theta_e", "theta_m"):
            v = getattr(self, name)
            if not 0 <= v <= math.pi:
                raise ConfigError(f"{name} must lie in [0, pi], got {v!r}")
        if self.d_perm < 0:
            raise ConfigError("d_perm is a magnitude and must be >= 0")
        if self.m_override is not None and self.m_override < 0:
            raise ConfigError("m_override is a magnitude and must be >= 0")

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3


def diamond(**overrides) -> ParticleSpec:
    """The 500 nm diamond nanosphere used throughout, with optional overrides."""
    return ParticleSpec(**overrides)


PARTICLE_PRESETS = {
    "diamond": diamond,
    # Fixed 1e-20 J/T moment used for the sphere-sphere comparison curves.
    "diamond_pinned_moment": lambda **kw: ParticleSpec(**{"m_override": 1e-20, **kw}),
}


def particle_preset(name: str, **overrides) -> ParticleSpec:
    try:
        factory = PARTICLE_PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown particle preset {name!r}; choose from {sorted(PARTICLE_PRESETS)}"
        ) from None
    return factory(**overrides)


def mass_of(p: ParticleSpec) -> float:
    """Sphere mass rho * (4/3) pi R^3 in kg."""
    return p.density * p.volume


def polarizability_volume(p: ParticleSpec) -> float:
    """Polarizability volume R^3 (eps-1)/(eps+2) in m^3.

    The SI polarizability is ``4 pi eps0`` times this value.
    """
    return p.radius**3 * (p.eps_r - 1.0) / (p.eps_r + 2.0)


def induced_electric_dipole(p: ParticleSpec, E) -> np.ndarray:
    """Dipole (C m) induced by a uniform external field E (V/m)."""
    E = np.asarray(E, dtype=float)
    return 4.0 * math.pi * CONST.eps0 * polarizability_volume(p) * E


def _moment_per_tesla(p: ParticleSpec) -> float:
    return 4.0 * math.pi * p.radius**3 * p.chi_v / (3.0 * CONST.mu0 * (1.0 + p.chi_v))


def induced_magnetic_moment(p: ParticleSpec, B) -> np.ndarray:
    """Induced moment (J/T) for local field B (T); antiparallel to B.

    With ``m_override`` set the magnitude is pinned and only the direction
    -B/|B| is taken from the field (zero field gives zero moment).
    """
    B = np.asarray(B, dtype=float)
    if p.m_override is None:
        return _moment_per_tesla(p) * B
    norm = np.linalg.norm(B, axis=-1, keepdims=True)
    safe = np.where(norm > 0, norm, 1.0)
    return np.where(norm > 0, -p.m_override * B / safe, 0.0)


def magnetic_moment_magnitude(p: ParticleSpec, B_mag):
    """|m| for field magnitude ``B_mag``; a pinned moment ignores the field."""
    B_mag = np.asarray(B_mag, dtype=float)
    if p.m_override is None:
        out = abs(_moment_per_tesla(p)) * B_mag
    else:
        out = np.full(B_mag.shape, p.m_override)
    return out if out.ndim else float(out)
