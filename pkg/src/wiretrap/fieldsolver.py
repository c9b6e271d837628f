"""Magnetostatic fields of ribbon wires, their Meissner images and uniform bias fields.

Each ribbon is a zero-height sheet current. Across its width the sheet is
replaced by a Gauss-Legendre bundle of straight filaments, and the field of
each straight filament comes from the closed-form Biot-Savart integral of a
finite segment. Connected ribbons share mitered filament paths, so current is
conserved at every bend and the field stays curl-free off the conductors.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import CONST
from .errors import ConfigError, DomainError, SingularityError
from .geometry import ChipLayout, RibbonSegment, SuperconductorSpec, reflect_wires

# 24 nodes: doubling the order moves |B| by ~1e-13 relative at z = w/2.
QUAD_NODES = 24
FD_STEP = 10e-9
SINGULAR_FRACTION = 1e-3
_CHUNK = 1 << 21  # point-segment pairs per vectorized block


@lru_cache(maxsize=None)
def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


@dataclass(frozen=True)
class BiasField:
    """Uniform external field: transverse bias plus an optional Ioffe offset along x."""

    B_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    B_ioffe: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        for name in ("B_bias", "B_ioffe"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ConfigError(f"{name} must be finite")
            object.__setattr__(self, name, tuple(float(c) for c in v))

    @classmethod
    def along_minus_y(cls, magnitude: float, ioffe: float = 0.0) -> "BiasField":
        return cls((0.0, -magnitude, 0.0), (ioffe, 0.0, 0.0))

    @property
    def total(self) -> np.ndarray:
        return np.add(self.B_bias, self.B_ioffe)


@dataclass(frozen=True)
class FieldSample:
    position: np.ndarray
    B: np.ndarray
    B_mag: float
    grad: np.ndarray = field(repr=False)  # grad[i, j] = dB_i / dx_j

    @property
    def divergence(self) -> float:
        return float(np.trace(self.grad))

    @property
    def curl(self) -> np.ndarray:
        g = self.grad
        return np.array([g[2, 1] - g[1, 2], g[0, 2] - g[2, 0], g[1, 0] - g[0, 1]])


@dataclass(frozen=True)
class Filaments:
    """Straight current filaments; an infinite end extends the segment to infinity."""

    A: np.ndarray
    B: np.ndarray
    current: np.ndarray
    inf_start: np.ndarray
    inf_end: np.ndarray

    @classmethod
    def empty(cls) -> "Filaments":
        z = np.zeros((0, 3))
        return cls(z, z, np.zeros(0), np.zeros(0, bool), np.zeros(0, bool))

    @classmethod
    def concat(cls, parts: Sequence["Filaments"]) -> "Filaments":
        parts = [p for p in parts if len(p.current)]
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, k) for p in parts]) for k in ("A", "B", "current", "inf_start", "inf_end")))

    def reflected(self, sc: SuperconductorSpec) -> "Filaments":
        return Filaments(sc.reflect(self.A), sc.reflect(self.B), -self.current, self.inf_start, self.inf_end)


def chain_filaments(chain: Sequence[RibbonSegment], feeds: bool, nodes: int = QUAD_NODES) -> Filaments:
    """Filament bundle of a connected ribbon path with mitered bends."""
    verts = np.array([s.p_start for s in chain] + [chain[-1].p_end])
    lat = np.array([s.lateral for s in chain])
    offs = np.empty_like(verts)
    offs[0], offs[-1] = lat[0], lat[-1]
    for i in range(1, len(verts) - 1):
        offs[i] = (lat[i - 1] + lat[i]) / (1.0 + lat[i - 1] @ lat[i])
    xg, wg = _gauss(nodes)
    w, I = chain[0].width, chain[0].current
    pts = verts[None, :, :] + (0.5 * w * xg)[:, None, None] * offs[None, :, :]
    k = len(chain)
    A = pts[:, :-1, :].reshape(-1, 3)
    B = pts[:, 1:, :].reshape(-1, 3)
    cur = np.repeat(0.5 * wg * I, k)
    first = np.tile(np.arange(k) == 0, nodes) & feeds
    last = np.tile(np.arange(k) == k - 1, nodes) & feeds
    return Filaments(A, B, cur, first, last)


def layout_filaments(layout: ChipLayout, with_images: bool, nodes: int = QUAD_NODES) -> Filaments:
    real = Filaments.concat([chain_filaments(c, layout.feeds, nodes) for c in layout.chains()])
    if not with_images:
        return real
    return Filaments.concat([real, real.reflected(layout.sc)])


def segment_field(fil: Filaments, x) -> np.ndarray:
    """Biot-Savart field (T) of all filaments at points ``x`` (shape (..., 3))."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    pts = x.reshape(-1, 3)
    out = np.zeros_like(pts)
    m = len(fil.current)
    if m == 0:
        return out.reshape(shape)
    d = fil.B - fil.A
    L = np.linalg.norm(d, axis=1)
    t = d / L[:, None]
    pref = CONST.mu0 / (4.0 * math.pi) * fil.current
    step = max(1, _CHUNK // m)
    for lo in range(0, len(pts), step):
        p = pts[lo : lo + step]
        r = p[:, None, :] - fil.A[None, :, :]
        s = np.einsum("nmk,mk->nm", r, t)
        rho = r - s[..., None] * t[None, :, :]
        rho2 = np.einsum("nmk,nmk->nm", rho, rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            uB = L[None, :] - s
            fB = np.where(fil.inf_end[None, :], 1.0, uB / np.sqrt(uB * uB + rho2))
            fA = np.where(fil.inf_start[None, :], -1.0, -s / np.sqrt(s * s + rho2))
            coef = pref[None, :] * (fB - fA) / rho2
        # points on a filament's own line get nothing from it
        coef = np.where(rho2 > 0.0, coef, 0.0)
        out[lo : lo + step] = (coef[..., None] * np.cross(t[None, :, :], rho)).sum(axis=1)
    return out.reshape(shape)


def _rect_distance(seg: RibbonSegment, pts: np.ndarray) -> np.ndarray:
    r = pts - np.asarray(seg.p_start)
    s = r @ seg.direction
    u = r @ seg.lateral
    n = r @ np.asarray(seg.plane_normal)
    ds = np.maximum(np.maximum(-s, s - seg.length), 0.0)
    du = np.maximum(np.abs(u) - 0.5 * seg.width, 0.0)
    return np.sqrt(ds * ds + du * du + n * n)


def check_clearance(wires: Sequence[RibbonSegment], x) -> None:
    pts = np.asarray(x, dtype=float).reshape(-1, 3)
    for w in wires:
        dist = _rect_distance(w, pts)
        if np.any(dist < SINGULAR_FRACTION * w.width):
            i = int(np.argmin(dist))
            raise SingularityError(
                f"point {tuple(pts[i])} is {dist[i]:.3e} m from a ribbon surface (limit {SINGULAR_FRACTION * w.width:.3e} m)"
            )


def field_of_ribbon(seg: RibbonSegment, x, nodes: int = QUAD_NODES) -> np.ndarray:
    """Field (T) of one isolated finite ribbon with open ends."""
    check_clearance([seg], x)
    return segment_field(chain_filaments([seg], feeds=False, nodes=nodes), x)


class FieldModel:
    """Cached filament set for repeated field evaluation of one layout and bias."""

    def __init__(self, layout: ChipLayout, bias: BiasField | None = None, with_images: bool = True,
                 nodes: int = QUAD_NODES, check: bool = True):
        self.layout = layout
        self.bias = bias or BiasField()
        self.with_images = with_images
        self.filaments = layout_filaments(layout, with_images, nodes)
        self.uniform = self.bias.total
        self.check = check
        self._wires = layout.wires + (reflect_wires(layout.wires, layout.sc) if with_images else ())

    def B(self, x) -> np.ndarray:
        if self.check:
            check_clearance(self._wires, x)
        return segment_field(self.filaments, x) + self.uniform

    def B_mag(self, x) -> np.ndarray:
        return np.linalg.norm(self.B(x), axis=-1)

    def _step(self, x: np.ndarray, h: float) -> float:
        # shrink the step near a conductor so stencils never straddle it
        if not self._wires:
            return h
        dist = min(float(_rect_distance(w, x[None, :])[0]) for w in self._wires)
        return min(h, 0.25 * dist) if dist > 0 else h

    def gradient(self, x, h: float = FD_STEP) -> np.ndarray:
        """dB_i/dx_j by Richardson-extrapolated central differences."""
        x = np.asarray(x, dtype=float)
        h = self._step(x, h)
        E = np.eye(3)
        stencil = np.concatenate([x + s * hh * E for hh in (h, h / 2) for s in (1.0, -1.0)])
        vals = self.B(stencil).reshape(2, 2, 3, 3)  # [step, sign, j, i]
        D = (vals[:, 0] - vals[:, 1]) / (2.0 * np.array([h, h / 2]))[:, None, None]
        G = (4.0 * D[1] - D[0]) / 3.0
        return G.T

    def sample(self, x, h: float = FD_STEP) -> FieldSample:
        x = np.asarray(x, dtype=float).reshape(3)
        B = self.B(x)
        return FieldSample(x.copy(), B, float(np.linalg.norm(B)), self.gradient(x, h))


def total_field(layout: ChipLayout, bias: BiasField, x, with_images: bool = True, h: float = FD_STEP) -> FieldSample:
    return FieldModel(layout, bias, with_images).sample(x, h)


def b_centerline(I, w, z):
    """|B| above the middle of an infinitely long ribbon, height z above the ribbon."""
    if np.any(np.real(z) <= 0) or np.any(np.real(w) <= 0):
        raise DomainError("b_centerline needs z > 0 and w > 0")
    return CONST.mu0 * I / (math.pi * w) * np.arctan(w / (2.0 * z))


def grad_centerline(I, w, z):
    """d|B|/dz above an infinitely long ribbon; a Lorentzian in z."""
    if np.any(np.real(w) <= 0):
        raise DomainError("grad_centerline needs w > 0")
    return -CONST.mu0 / (2.0 * math.pi) * I / (z * z + 0.25 * w * w)


def z0_analytic(I: float, w: float, B_bias: float) -> float:
    """Height above the wire plane where the ribbon field cancels a uniform bias."""
    arg = math.pi * w * abs(B_bias) / (CONST.mu0 * abs(I)) if I else math.inf
    if not 0 < arg < math.pi / 2:
        raise DomainError(f"pi*w*B/(mu0*I) = {arg:.4g} lies outside (0, pi/2); no field zero above the wire")
    return 0.5 * w / math.tan(arg)


def z0_thin_wire(I: float, B_bias: float) -> float:
    if B_bias == 0:
        raise DomainError("zero bias has no cancellation height")
    return CONST.mu0 * abs(I) / (2.0 * math.pi * abs(B_bias))


def grid_points(xs, ys, zs) -> np.ndarray:
    """Grid points in lexicographic index order (last axis fastest)."""
    X, Y, Z = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), np.asarray(zs, float), indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)


def field_profile(model: FieldModel, xs, ys, zs) -> np.ndarray:
    """Rows (x, y, z, Bx, By, Bz, |B|) over a grid."""
    pts = grid_points(xs, ys, zs)
    B = model.B(pts)
    return np.column_stack([pts, B, np.linalg.norm(B, axis=1)])


PROFILE_COLUMNS = ("x", "y", "z", "Bx", "By", "Bz", "B_mag")


def write_rows_csv(path_or_file, columns: Sequence[str], rows: np.ndarray) -> None:
    """CSV with a header, LF endings and 12 significant digits."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in np.asarray(rows, dtype=float):
            w.writerow([format(v, ".12g") for v in r])
    finally:
        if own:
            fh.close()
