import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from wiretrap.core import CONST, diamond, mass_of
from wiretrap.errors import ConfigError, DomainError
from wiretrap.fieldsolver import BiasField
from wiretrap.geometry import Slab, default_substrate, preset_bias, preset_layout
from wiretrap.potentials import (
    POTENTIAL_COLUMNS,
    PotentialModel,
    PotentialOptions,
    SpherePairConfig,
    diamagnetic_energy,
    earth_gravity_energy,
    gravity_direction,
    gravity_sphere_chip,
    potential_profile,
    sphere_plate_potential,
    sphere_sphere_potential,
    write_potential_csv,
)

from conftest import potential_model, random_points_above

# mpmath (30 digits) evaluations of the closed forms for the default 500 nm diamond
GR_150UM = 1.50545579862921863668e-36
CP_SS_150UM = -1.97156143225825157516e-37
CP_PLATE_16p4 = -3.98033854575664405829e-27
MM_PLATE_16p4_M66 = 1.97508742000410825195e-29
DIA_72MT = 2.37599999870656329089e-20
DIA_250MT = 2.86458333177392372069e-19
EARTH_10UM = 1.80383765136490755021e-19


def prism_inverse_distance(box, s):
    """Closed-form integral of 1/|r - s| over an axis-aligned box, in 40-digit arithmetic."""
    mp.dps = 40
    total = mpf(0)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                x = mpf(box[0][i]) - mpf(s[0])
                y = mpf(box[1][j]) - mpf(s[1])
                z = mpf(box[2][k]) - mpf(s[2])
                r = mp.sqrt(x * x + y * y + z * z)
                t = mpf(0)
                for a, b, c in ((x, y, z), (y, z, x), (z, x, y)):
                    if a != 0 and b != 0:
                        t += a * b * mp.log(c + r)
                    if c != 0:
                        t -= c * c / 2 * mp.atan(a * b / (c * r))
                total += (-1) ** (i + j + k + 1) * t
    return float(total)


def test_gravity_pair_value():
    p = diamond()
    assert sphere_sphere_potential("GR", SpherePairConfig(p, p, 150e-6)) == pytest.approx(GR_150UM, rel=1e-9)


def test_casimir_pair_about_a_tenth_of_gravity_at_150um():
    p = diamond()
    cfg = SpherePairConfig(p, p, 150e-6)
    cp = sphere_sphere_potential("CP", cfg)
    assert cp == pytest.approx(CP_SS_150UM, rel=1e-9)
    assert 0.05 < abs(cp) / sphere_sphere_potential("GR", cfg) < 0.2


def test_plate_values():
    p = diamond()
    assert sphere_plate_potential("CP", p, 16.4e-6) == pytest.approx(CP_PLATE_16p4, rel=1e-9)
    pinned = diamond(m_override=6.6e-19)
    assert sphere_plate_potential("MM", pinned, 16.4e-6) == pytest.approx(MM_PLATE_16p4_M66, rel=1e-9)


def test_plate_dd_uses_orientation_factor():
    p = diamond()
    v0 = sphere_plate_potential("DD", p, 16e-6)
    v90 = sphere_plate_potential("DD", diamond(theta_e=math.pi / 2), 16e-6)
    assert v0 < 0 and v0 / v90 == pytest.approx(2.0, rel=1e-12)


def test_single_term_values():
    p = diamond()
    assert diamagnetic_energy(p, 0.072) == pytest.approx(DIA_72MT, rel=1e-9)
    assert diamagnetic_energy(p, 0.25) == pytest.approx(DIA_250MT, rel=1e-9)
    assert earth_gravity_energy(p, (0, 10e-6, 0), (0, -1, 0)) == pytest.approx(EARTH_10UM, rel=1e-9)


@pytest.mark.parametrize("kind,power", [("GR", -1), ("DD", -3), ("MM", -3), ("CP", -7)])
def test_sphere_sphere_power_laws(kind, power):
    p = diamond(m_override=1e-20)
    cfg = SpherePairConfig(p, p, 1.0)
    for r in np.geomspace(10e-6, 1.0, 9):
        v1 = sphere_sphere_potential(kind, cfg.at(r))
        v2 = sphere_sphere_potential(kind, cfg.at(r * 1.01))
        slope = math.log(abs(v2 / v1)) / math.log(1.01)
        assert slope == pytest.approx(power, abs=1e-3)


@pytest.mark.parametrize("kind,power", [("DD", -3), ("MM", -3), ("CP", -4)])
def test_sphere_plate_power_laws(kind, power):
    p = diamond(m_override=1e-20)
    for z in np.geomspace(5e-6, 100e-6, 7):
        slope = math.log(sphere_plate_potential(kind, p, z * 1.01) / sphere_plate_potential(kind, p, z)) / math.log(1.01)
        assert slope == pytest.approx(power, abs=1e-3)


def test_vanishing_dipoles_give_zero():
    p = diamond(d_perm=0.0, m_override=0.0)
    cfg = SpherePairConfig(p, p, 20e-6)
    assert sphere_sphere_potential("DD", cfg) == 0.0
    assert sphere_sphere_potential("MM", cfg) == 0.0
    assert sphere_plate_potential("DD", p, 10e-6) == 0.0
    assert sphere_plate_potential("MM", p, 10e-6) == 0.0


def test_induced_moment_vanishes_without_field():
    p = diamond()
    assert sphere_plate_potential("MM", p, 10e-6, local_B=0.0) == 0.0
    assert sphere_sphere_potential("MM", SpherePairConfig(p, p, 20e-6, B_local=0.0)) == 0.0


def test_domain_errors():
    p = diamond()
    with pytest.raises(DomainError):
        SpherePairConfig(p, p, 0.0)
    with pytest.raises(DomainError):
        sphere_plate_potential("CP", p, -1e-6)
    with pytest.raises(ConfigError):
        sphere_plate_potential("GR", p, 1e-6)
    with pytest.raises(ConfigError):
        gravity_direction("sideways")
    with pytest.raises(DomainError):
        diamagnetic_energy(p, -1.0)


def test_head_to_tail_maximizes_dipole_energy():
    p = diamond(m_override=1e-20)
    ref = abs(sphere_sphere_potential("MM", SpherePairConfig(p, p, 30e-6)))
    for ang in [(0, 0, 0), (math.pi / 2, math.pi / 2, 0), (0.3, 1.1, 2.0), (math.pi / 4, math.pi / 3, 1.0)]:
        assert abs(sphere_sphere_potential("MM", SpherePairConfig(p, p, 30e-6, angles=ang))) <= ref * (1 + 1e-12)


@pytest.mark.parametrize("s", [
    (0.0, 0.0, 30e-6),
    (0.3e-3, -0.2e-3, 15e-6),
    (1.2e-3, 0.4e-3, 50e-6),  # beyond a lateral edge
    (0.0, 0.0, 3e-3),
])
def test_chip_gravity_matches_closed_form_prism(s):
    p = diamond()
    slab = default_substrate()
    half = (slab.length / 2, slab.width / 2, slab.thickness / 2)
    box = [(-h, h) for h in half]
    exact = -CONST.G * mass_of(p) * slab.density * prism_inverse_distance(box, s)
    got = gravity_sphere_chip(p, slab, s[2], (s[0], s[1]))
    assert got == pytest.approx(exact, rel=1e-4)


def test_chip_gravity_far_field_is_point_mass():
    p = diamond()
    slab = default_substrate()
    diag = math.sqrt(slab.length**2 + slab.width**2 + slab.thickness**2)
    d = 20 * diag
    point = -CONST.G * mass_of(p) * slab.mass / d
    assert gravity_sphere_chip(p, slab, d) == pytest.approx(point, rel=1e-2)


def test_chip_gravity_linear_in_density():
    p = diamond()
    a = Slab(1e-3, 1e-3, 20e-6, 3000.0)
    b = Slab(1e-3, 1e-3, 20e-6, 6000.0)
    assert gravity_sphere_chip(p, b, 25e-6) == pytest.approx(2 * gravity_sphere_chip(p, a, 25e-6), rel=1e-13)
    assert gravity_sphere_chip(p, Slab(1e-3, 1e-3, 20e-6, 0.0), 25e-6) == 0.0


def test_chip_gravity_inside_slab_rejected():
    with pytest.raises(DomainError):
        gravity_sphere_chip(diamond(), default_substrate(), 0.0)


def test_total_is_sum_of_parts(rng):
    model = PotentialModel(preset_layout("z30"), BiasField.along_minus_y(preset_bias("z30")), diamond(),
                           PotentialOptions("V", True, True, True, False))
    pts = random_points_above(model.layout, 1000, rng)
    parts = model.parts(pts)
    total = model.energy(pts)
    direct = np.array([math.fsum(parts[k][i] for k in parts) for i in range(len(pts))])
    assert np.allclose(total, direct, rtol=1e-12, atol=0)


def test_breakdown_total_includes_chip_gravity():
    model = potential_model("u30", "H", True, True, chip_gravity=True)
    x = np.array([0.0, 0.0, 26e-6])
    b = model.breakdown(x)
    assert b.v_gr_sp < 0
    assert b.total == pytest.approx(float(model.energy(x)), rel=1e-14)
    assert set(b.as_dict()) == {"u_dia", "u_grav_earth", "v_cp_sp", "v_dd_sp", "v_mm_sp", "v_gr_sp", "total"}


def test_magnetic_only_minimum_is_field_minimum():
    layout = preset_layout("u30")
    model = PotentialModel(layout, BiasField.along_minus_y(preset_bias("u30")), diamond(),
                           PotentialOptions().only_magnetic())
    xs = np.linspace(-20e-6, 20e-6, 21)
    zs = layout.chip_half_width + np.linspace(2e-6, 30e-6, 29)
    pts = np.stack(np.meshgrid(xs, [0.0], zs, indexing="ij"), axis=-1).reshape(-1, 3)
    U = model.energy(pts)
    B = model.field.B_mag(pts)
    assert np.argmin(U) == np.argmin(B)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 2.0))
def test_diamagnetic_energy_nonnegative_and_quadratic(b):
    p = diamond()
    u = diamagnetic_energy(p, b)
    assert u >= 0
    assert diamagnetic_energy(p, 2 * b) == pytest.approx(4 * u, rel=1e-12, abs=1e-300)


def test_bias_only_landscape_is_linear_in_height():
    model = PotentialModel(preset_layout("u30").with_current(0.0), BiasField.along_minus_y(0.2), diamond(),
                           PotentialOptions("V", False, False, False, False), with_images=False)
    ys = np.linspace(-10e-6, 10e-6, 5)
    pts = np.column_stack([np.zeros(5), ys, np.full(5, 30e-6)])
    parts = model.parts(pts)
    assert np.allclose(parts["u_dia"], parts["u_dia"][0], rtol=1e-12)
    assert np.allclose(np.diff(parts["u_grav_earth"]), np.diff(parts["u_grav_earth"])[0], rtol=1e-9)


def test_profile_columns_and_csv(tmp_path):
    model = potential_model("z30", "V", True, True)
    rows = potential_profile(model, [0.0], [0.0], np.linspace(15e-6, 40e-6, 6))
    assert rows.shape == (6, len(POTENTIAL_COLUMNS))
    assert np.allclose(rows[:, -1], rows[:, 3:-1].sum(axis=1), rtol=1e-12)
    path = tmp_path / "u.csv"
    write_potential_csv(path, rows)
    text = path.read_text()
    assert text.splitlines()[0] == ",".join(POTENTIAL_COLUMNS)
    assert "nan" not in text.lower()
