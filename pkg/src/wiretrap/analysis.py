"""Equilibria, normal modes, trap depth and stability of a particle in a wire trap."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .core import CONST, EV
from .errors import ConvergenceError, DomainError, EscapeError
from .geometry import ChipLayout
from .potentials import PotentialModel

HESS_STEP = 50e-9
GRAD_STEP = 10e-9
FORCE_TOL = 1e-20  # N
_E_SCALE = 1e-20  # J, energy unit for the simplex stage
_L_SCALE = 1e-6  # m, length unit for the simplex stage

EnergyFn = Callable[[np.ndarray], np.ndarray]


def _energy_fn(model) -> EnergyFn:
    return model.energy if hasattr(model, "energy") else model


def gradient(f: EnergyFn, x, h: float = GRAD_STEP) -> np.ndarray:
    """Richardson-extrapolated central-difference gradient of a vectorized scalar field."""
    x = np.asarray(x, dtype=float)
    E = np.eye(3)
    pts = np.concatenate([x + s * hh * E for hh in (h, h / 2) for s in (1.0, -1.0)])
    v = np.asarray(f(pts)).reshape(2, 2, 3)
    D = (v[:, 0] - v[:, 1]) / (2.0 * np.array([h, h / 2]))[:, None]
    return (4.0 * D[1] - D[0]) / 3.0


def _hessian_at_step(f: EnergyFn, x: np.ndarray, h: float) -> np.ndarray:
    E = np.eye(3) * h
    pts = [x]
    for i in range(3):
        pts += [x + E[i], x - E[i]]
    pairs = [(i, j) for i in range(3) for j in range(i + 1, 3)]
    for i, j in pairs:
        pts += [x + E[i] + E[j], x + E[i] - E[j], x - E[i] + E[j], x - E[i] - E[j]]
    v = np.asarray(f(np.array(pts)))
    H = np.empty((3, 3))
    for i in range(3):
        H[i, i] = (v[1 + 2 * i] - 2.0 * v[0] + v[2 + 2 * i]) / (h * h)
    for k, (i, j) in enumerate(pairs):
        a, b, c, d = v[7 + 4 * k : 11 + 4 * k]
        H[i, j] = H[j, i] = (a - b - c + d) / (4.0 * h * h)
    return H


def hessian(f: EnergyFn, x, h: float = HESS_STEP) -> np.ndarray:
    """Central-difference Hessian with one Richardson extrapolation (steps h and h/2)."""
    x = np.asarray(x, dtype=float)
    H1 = _hessian_at_step(f, x, h)
    H2 = _hessian_at_step(f, x, h / 2)
    return (4.0 * H2 - H1) / 3.0


def frequencies_from_eigenvalues(ev, mass: float) -> np.ndarray:
    """omega/2pi for curvature eigenvalues; negative curvature gives a negative (imaginary) entry."""
    ev = np.asarray(ev, dtype=float)
    return np.sign(ev) * np.sqrt(np.abs(ev) / mass) / (2.0 * math.pi)


@dataclass(frozen=True)
class Region:
    """Axis-aligned search box (m)."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def contains(self, x, rtol: float = 0.0) -> bool:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        pad = rtol * (hi - lo)
        return bool(np.all(x >= lo + pad) and np.all(x <= hi - pad))

    def bounds(self) -> list[tuple[float, float]]:
        return list(zip(self.lo, self.hi))


def default_region(layout: ChipLayout, margin: float = 25e-6, height: float = 40e-6) -> Region:
    """Box above the interior (non-lead) wires, or around the first wire's midpoint."""
    interior = [seg for chain in layout.chains() for seg in chain[1:-1]]
    if interior:
        pts = np.array([p for s in interior for p in (s.p_start, s.p_end)])
    else:
        w = layout.wires[0] if layout.wires else None
        mid = np.add(w.p_start, w.p_end) / 2 if w else np.array([0.0, 0.0, layout.chip_half_width])
        pts = np.array([mid, mid])
    base = layout.sc.mid_plane_z + layout.chip_half_width
    lo = (pts[:, 0].min() - margin, pts[:, 1].min() - margin, base + 1e-6)
    hi = (pts[:, 0].max() + margin, pts[:, 1].max() + margin, base + height)
    return Region(lo, hi)


def grid_seed(f: EnergyFn, region: Region, n: int = 25, hold: dict | None = None) -> np.ndarray:
    """Lowest interior discrete local minimum of f on an n^3 grid over the region."""
    axes = [np.linspace(a, b, n) for a, b in region.bounds()]
    if hold:
        for i, v in hold.items():
            axes[i] = np.array([v])
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1)
    U = np.asarray(f(pts.reshape(-1, 3))).reshape(X.shape)
    is_min = np.ones(U.shape, bool)
    for ax in range(3):
        if U.shape[ax] == 1:
            continue
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax], hi[ax] = slice(0, -1), slice(1, None)
        # boundary cells never count as interior minima
        edge = [slice(None)] * 3
        edge[ax] = 0
        is_min[tuple(edge)] = False
        edge[ax] = -1
        is_min[tuple(edge)] = False
        up = np.full(U.shape, np.inf)
        dn = np.full(U.shape, np.inf)
        up[tuple(lo)] = U[tuple(hi)]
        dn[tuple(hi)] = U[tuple(lo)]
        is_min &= (U <= up) & (U <= dn)
    if not is_min.any():
        raise EscapeError("no interior minimum of the potential inside the search region")
    idx = np.flatnonzero(is_min.ravel())
    best = idx[np.argmin(U.ravel()[idx])]
    return pts.reshape(-1, 3)[best]


def _polish(f: EnergyFn, x: np.ndarray, free: np.ndarray, tol: float, maxiter: int, region: Region | None,
            h_grad: float, h_hess: float) -> np.ndarray:
    for _ in range(maxiter):
        g = gradient(f, x, h_grad)[free]
        gn = float(np.linalg.norm(g))
        if gn <= tol:
            return x
        H = hessian(f, x, h_hess)[np.ix_(free, free)]
        try:
            step = np.linalg.solve(H, -g)
            if step @ g >= 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -g / np.max(np.abs(np.diag(H)))
        for alpha in (1.0, 0.5, 0.25, 0.125, 0.0625):
            trial = x.copy()
            trial[free] += alpha * step
            if region is not None and not region.contains(trial):
                continue
            if np.linalg.norm(gradient(f, trial, h_grad)[free]) < gn:
                x = trial
                break
        else:
            break
    g = gradient(f, x, h_grad)[free]
    if np.linalg.norm(g) > tol:
        raise ConvergenceError(f"force residual {np.linalg.norm(g):.3e} N above tolerance {tol:.1e} N")
    return x


def find_equilibrium(model, x_guess=None, region: Region | None = None, hold: Sequence[int] = (),
                     tol: float = FORCE_TOL, maxiter: int = 40, seed_points: int = 25) -> np.ndarray:
    """Local minimum of the total energy.

    Without ``x_guess`` a coarse grid scan of ``region`` supplies the seed.
    Coordinates listed in ``hold`` stay fixed at their seed values (for
    metastable points such as the center of a tilted long trap). A bounded
    simplex descent is followed by a damped Newton polish on the
    finite-difference gradient until the free force components drop below
    ``tol``.
    """
    f = _energy_fn(model)
    fast = getattr(model, "energy_fast", f)
    if region is None and isinstance(model, PotentialModel):
        region = default_region(model.layout)
    if hold and x_guess is None:
        raise ConvergenceError("held coordinates need an explicit x_guess")
    if x_guess is not None and not hold:
        x0 = np.asarray(x_guess, dtype=float).copy()
    elif region is None:
        raise ConvergenceError("need a starting point or a search region")
    else:
        held = {i: float(x_guess[i]) for i in hold}
        x0 = grid_seed(fast, region, seed_points, held)
    free = np.array([i for i in range(3) if i not in set(hold)], dtype=int)

    u_ref = float(f(x0[None, :])[0])

    def scaled(q):
        x = x0.copy()
        x[free] = x0[free] + q * _L_SCALE
        return (float(f(x[None, :])[0]) - u_ref) / _E_SCALE

    bounds = None
    if region is not None:
        lo = (np.asarray(region.lo) - x0) / _L_SCALE
        hi = (np.asarray(region.hi) - x0) / _L_SCALE
        bounds = list(zip(lo[free], hi[free]))
    res = minimize(scaled, np.zeros(len(free)), method="Nelder-Mead", bounds=bounds,
                   options=dict(xatol=1e-7, fatol=1e-14, maxiter=4000 * len(free), maxfev=8000 * len(free)))
    x = x0.copy()
    x[free] = x0[free] + res.x * _L_SCALE
    if region is not None and not region.contains(x, rtol=1e-3):
        raise EscapeError(f"minimizer reached the edge of the search region at {tuple(x)}")
    x = _polish(f, x, free, tol, maxiter, region, GRAD_STEP, HESS_STEP)
    if region is not None and not region.contains(x, rtol=1e-3):
        raise EscapeError(f"equilibrium {tuple(x)} lies on the edge of the search region")
    return x


def trap_frequencies(model, x_eq, h: float = HESS_STEP, mass: float | None = None):
    """Principal frequencies (Hz, ascending, negative = unstable), axes (columns) and the Hessian."""
    f = _energy_fn(model)
    m = mass if mass is not None else model.mass
    H = hessian(f, x_eq, h)
    H = 0.5 * (H + H.T)
    ev, vec = np.linalg.eigh(H)
    for k in range(3):
        # fix the eigenvector sign: largest component positive
        if vec[np.argmax(np.abs(vec[:, k])), k] < 0:
            vec[:, k] = -vec[:, k]
    return frequencies_from_eigenvalues(ev, m), vec, H


def axis_frequencies(H, mass: float) -> np.ndarray:
    """Frequencies from the Hessian diagonal: one per Cartesian axis."""
    return frequencies_from_eigenvalues(np.diag(H), mass)


def roll_down_time(omega_flat: float) -> float:
    """Quarter period 2pi/omega/4 for sliding from the turning point to the minimum."""
    if not omega_flat > 0:
        raise DomainError("omega_flat must be positive")
    return 0.25 * (2.0 * math.pi / omega_flat)


@dataclass
class FlatProfile:
    x: np.ndarray  # positions along the flat axis (m)
    energy: np.ndarray  # transverse-relaxed energy (J)
    transverse: np.ndarray  # relaxed (y, z) at each x
    minima: list[dict] = field(default_factory=list)


def _relax_transverse(f: EnergyFn, xv: float, yz0: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                      h: float = 50e-9, max_step: float = 2e-6):
    """Minimize f over (y, z) at fixed x: Newton on a 3x3 stencil, simplex fallback."""
    offs = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float) * h
    yz = np.clip(np.asarray(yz0, dtype=float), lo, hi)
    u = None
    for _ in range(60):
        pts = np.column_stack([np.full(9, xv), yz + offs])
        v = np.asarray(f(pts)).reshape(3, 3)
        u = v[1, 1]
        g = np.array([v[2, 1] - v[0, 1], v[1, 2] - v[1, 0]]) / (2 * h)
        H = np.array([
            [v[2, 1] - 2 * u + v[0, 1], (v[2, 2] - v[2, 0] - v[0, 2] + v[0, 0]) / 4],
            [0.0, v[1, 2] - 2 * u + v[1, 0]],
        ]) / (h * h)
        H[1, 0] = H[0, 1]
        if np.linalg.eigvalsh(H)[0] <= 0:
            break
        step = -np.linalg.solve(H, g)
        n = np.linalg.norm(step)
        if n > max_step:
            step *= max_step / n
        trial = np.clip(yz + step, lo, hi)
        if not np.array_equal(trial, yz + step):
            break
        yz = trial
        if n < 1e-13:
            return float(f(np.array([[xv, *yz]]))[0]), yz
    # fall back to a bounded derivative-free search
    def g2(q):
        return float(f(np.array([[xv, q[0] * _L_SCALE, q[1] * _L_SCALE]]))[0]) / _E_SCALE

    b = [(max(lo[0], yz[0] - 8e-6) / _L_SCALE, min(hi[0], yz[0] + 8e-6) / _L_SCALE),
         (max(lo[1], yz[1] - 6e-6) / _L_SCALE, min(hi[1], yz[1] + 6e-6) / _L_SCALE)]
    r = minimize(g2, yz / _L_SCALE, method="L-BFGS-B", bounds=b, options=dict(ftol=1e-16, gtol=1e-14))
    r = minimize(g2, r.x, method="Nelder-Mead", bounds=b, options=dict(xatol=1e-8, fatol=1e-16, maxiter=4000))
    return r.fun * _E_SCALE, r.x * _L_SCALE


def flat_axis_profile(model, xs, yz_start=None, region: Region | None = None) -> FlatProfile:
    """Energy along x after minimizing over (y, z) at each x, with local minima and their frequencies.

    Relaxation sweeps outward from the sample nearest x = 0, warm-starting each
    point from its neighbor.
    """
    f = getattr(model, "energy_fast", _energy_fn(model))
    xs = np.asarray(xs, dtype=float)
    region = region or default_region(model.layout)
    lo, hi = np.asarray(region.lo)[1:], np.asarray(region.hi)[1:]
    if yz_start is None:
        c = int(np.argmin(np.abs(xs)))
        yz_start = grid_seed(f, region, 25, {0: xs[c]})[1:]
    yz_start = np.asarray(yz_start, dtype=float)
    n = len(xs)
    E = np.empty(n)
    T = np.empty((n, 2))
    c = int(np.argmin(np.abs(xs)))
    for order in (range(c, n), range(c - 1, -1, -1)):
        yz = yz_start if order.start == c else T[c]
        for i in order:
            E[i], yz = _relax_transverse(f, xs[i], yz, lo, hi)
            T[i] = yz
    prof = FlatProfile(xs, E, T)
    light = model.without_chip_gravity() if hasattr(model, "without_chip_gravity") else model
    found = []
    for i in range(1, n - 1):
        if E[i] <= E[i - 1] and E[i] <= E[i + 1]:
            guess = np.array([xs[i], *T[i]])
            try:
                xe = find_equilibrium(light, guess, region=region)
            except (ConvergenceError, EscapeError):
                xe = guess
            if any(np.linalg.norm(xe - q) < 0.5e-6 for q in found):
                continue
            found.append(xe)
            _, _, H = trap_frequencies(light, xe)
            # curvature of the relaxed profile: Schur complement of the transverse block
            k_eff = H[0, 0] - H[0, 1:] @ np.linalg.solve(H[1:, 1:], H[1:, 0])
            prof.minima.append(dict(
                x=float(xe[0]), position=xe, energy=float(f(xe[None, :])[0]),
                freq_flat=float(frequencies_from_eigenvalues(k_eff, model.mass)),
                freq_axis=float(axis_frequencies(H, model.mass)[0]),
            ))
    prof.minima.sort(key=lambda d: d["energy"])
    return prof


def _ray_rise(f: EnergyFn, x0: np.ndarray, d: np.ndarray, region: Region, floor: float, step: float):
    """Largest rise of f along x0 + s d until the region edge or the chip surface."""
    lo, hi = np.asarray(region.lo), np.asarray(region.hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(d > 0, (hi - x0) / d, np.where(d < 0, (lo - x0) / d, np.inf))
    s_max = float(np.min(t_hi))
    if d[2] < 0:
        s_max = min(s_max, (x0[2] - floor) / -d[2])
    ns = max(2, int(math.ceil(s_max / step)) + 1)
    s = np.linspace(0.0, s_max, ns)[1:]
    u = np.asarray(f(x0[None, :] + s[:, None] * d[None, :]))
    u0 = float(f(x0[None, :])[0])
    k = int(np.argmax(u))
    bounded = k < len(u) - 1
    return float(u[k] - u0), bounded


def trap_depth(model, x_eq, direction=None, region: Region | None = None, step: float = 0.1e-6,
               profile: FlatProfile | None = None) -> float:
    """Escape barrier (J): the smallest, over sampled paths, of the largest energy rise.

    Paths are rays from x_eq along +/- each axis (or +/- ``direction``), cut at
    the region edge or 0.5 um above the wire plane, plus the relaxed flat-axis
    profile when supplied. A path whose maximum is at its far end carries no
    barrier inside the box; a warning is issued if every path is like that.
    """
    f = getattr(model, "energy_fast", _energy_fn(model))
    x_eq = np.asarray(x_eq, dtype=float)
    region = region or _depth_region(model, x_eq)
    floor = model.layout.sc.mid_plane_z + model.layout.chip_half_width + 0.5e-6
    dirs = [np.asarray(direction, float) / np.linalg.norm(direction)] if direction is not None else list(np.eye(3))
    rises = []
    any_bounded = False
    for d in dirs:
        for sgn in (1.0, -1.0):
            r, b = _ray_rise(f, x_eq, sgn * d, region, floor, step)
            rises.append(r)
            any_bounded |= b
    if profile is not None:
        u0 = float(f(x_eq[None, :])[0])
        i0 = int(np.argmin(np.abs(profile.x - x_eq[0])))
        for part in (profile.energy[i0:], profile.energy[: i0 + 1][::-1]):
            k = int(np.argmax(part))
            rises.append(float(part[k] - u0))
            any_bounded |= k < len(part) - 1
    if not any_bounded:
        warnings.warn("no barrier found inside the scan box; depth is a lower bound", RuntimeWarning, stacklevel=2)
    return max(0.0, min(rises))


def _depth_region(model, x_eq: np.ndarray) -> Region:
    r = default_region(model.layout, margin=100e-6, height=120e-6)
    lo = np.minimum(np.asarray(r.lo), x_eq - 1e-6)
    hi = np.maximum(np.asarray(r.hi), x_eq + 1e-6)
    return Region(tuple(lo), tuple(hi))


@dataclass
class StabilityRecord:
    positive_definite: bool
    eigenvalues: np.ndarray
    force_residual: float
    gravity_balance: float | None  # magnetic + plate force along -g over the weight
    fluctuation_margin: float | None  # restoring force over plate force at +/- delta


def stability_check(model: PotentialModel, x_eq, delta: float = 100e-9, hold: Sequence[int] = ()) -> StabilityRecord:
    x_eq = np.asarray(x_eq, dtype=float)
    free = [i for i in range(3) if i not in set(hold)]
    H = hessian(model.energy, x_eq)
    ev = np.linalg.eigvalsh(0.5 * (H + H.T))
    grad = gradient(model.energy, x_eq)
    residual = float(np.linalg.norm(grad[free]))
    g_dir = model.g_dir
    balance = None
    weight = model.mass * CONST.g
    if np.linalg.norm(g_dir) > 0:
        f_nongrav = -gradient(lambda p: model.energy(p) - model.parts(p)["u_grav_earth"], x_eq)
        balance = float(f_nongrav @ -g_dir) / weight

    def plate(p):
        parts = model.parts(p)
        return parts["v_cp_sp"] + parts["v_dd_sp"] + parts["v_mm_sp"] + parts["v_gr_sp"]

    margin = None
    if delta > 0:
        ratios = []
        F0 = -grad
        for i in free:
            e = np.eye(3)[i]
            for s in (1.0, -1.0):
                xp = x_eq + s * delta * e
                restoring = float((-gradient(model.energy, xp) - F0) @ (-s * e))
                plate_f = float(np.linalg.norm(gradient(plate, xp)))
                ratios.append(restoring / plate_f if plate_f > 0 else math.inf)
        margin = min(ratios)
    return StabilityRecord(bool(np.all(ev > 0)), ev, residual, balance, margin)


@dataclass
class TrapReport:
    equilibrium: np.ndarray
    z0: float
    B_at_min: float
    freqs: np.ndarray  # principal, Hz
    axes: np.ndarray  # columns are principal directions
    axis_freqs: np.ndarray  # Hessian-diagonal frequencies along x, y, z (Hz)
    depth_J: float
    stable: bool
    force_residual: float
    hold: tuple[int, ...] = ()
    constraint_margins: list = field(default_factory=list)
    energies: dict = field(default_factory=dict)
    dominance: dict = field(default_factory=dict)
    stability: StabilityRecord | None = None

    @property
    def depth_eV(self) -> float:
        return self.depth_J / EV

    @property
    def depth_K(self) -> float:
        return self.depth_J / CONST.kB


def analyze_trap(model: PotentialModel, x_guess=None, region: Region | None = None, hold: Sequence[int] = (),
                 with_depth: bool = True, with_constraints: bool = True) -> TrapReport:
    """Equilibrium, modes, depth, stability, Meissner margins and dominance ratios."""
    from .screening import dominance_table, meissner_check

    hold = tuple(sorted(set(hold)))
    x_eq = find_equilibrium(model, x_guess, region=region, hold=hold)
    freqs, axes, H = trap_frequencies(model, x_eq)
    stab = stability_check(model, x_eq, hold=hold)
    depth = trap_depth(model, x_eq) if with_depth else float("nan")
    margins = meissner_check(model.layout, model.field.bias) if with_constraints else []
    return TrapReport(
        equilibrium=x_eq,
        z0=float(model.z0(x_eq)),
        B_at_min=float(model.field.B_mag(x_eq)),
        freqs=freqs,
        axes=axes,
        axis_freqs=axis_frequencies(H, model.mass),
        depth_J=depth,
        stable=bool(np.all(freqs > 0)),
        force_residual=stab.force_residual,
        hold=hold,
        constraint_margins=margins,
        energies=model.breakdown(x_eq).as_dict(),
        dominance=dominance_table(model.layout, model.field.bias, model.particle, x_eq,
                                  options=model.options, with_images=model.field.with_images),
        stability=stab,
    )
