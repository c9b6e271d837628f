
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wiretrap.core import (
    CONST,
    ParticleSpec,
    diamond,
    induced_electric_dipole,
    induced_magnetic_moment,
    magnetic_moment_magnitude,
    mass_of,
    particle_preset,
    polarizability_volume,
)
from wiretrap.errors import ConfigError


def test_constants_are_codata_2018():
    assert CONST.mu0 == 1.25663706212e-6
    assert CONST.eps0 == 8.8541878128e-12
    assert CONST.hbar == 1.054571817e-34
    assert CONST.G == 6.67430e-11
    with pytest.raises(Exception):
        CONST.mu0 = 1.0


def test_mass_of_default_diamond():
    # rho * 4/3 pi R^3 for 500 nm, 3513 kg/m^3
    assert mass_of(diamond()) == pytest.approx(1.8393e-15, rel=1e-4)


def test_mass_of_one_micron_sphere():
    assert mass_of(diamond(radius=1e-6)) == pytest.approx(1.4715e-14, rel=1e-4)


def test_mass_scales_as_radius_cubed():
    assert mass_of(diamond(radius=1e-6)) == pytest.approx(8 * mass_of(diamond(radius=0.5e-6)), rel=1e-15)


def test_polarizability_volume_value_and_limits():
    assert polarizability_volume(diamond()) == pytest.approx(7.6299e-20, rel=1e-4)
    assert polarizability_volume(diamond(eps_r=1e12)) == pytest.approx(0.5e-6**3, rel=1e-9)
    assert polarizability_volume(diamond(eps_r=1 + 1e-12)) == pytest.approx(0.0, abs=1e-30)


def test_induced_electric_dipole():
    p = diamond()
    assert np.all(induced_electric_dipole(p, [0, 0, 0]) == 0)
    d = induced_electric_dipole(p, [0, 0, 1e6])
    assert np.linalg.norm(d) == pytest.approx(8.489e-23, rel=1e-3)
    assert np.allclose(induced_electric_dipole(p, [0, 0, 2e6]), 2 * d, rtol=0, atol=0)


def test_induced_magnetic_moment_values():
    p = diamond()
    assert np.linalg.norm(induced_magnetic_moment(p, [0, 0.01, 0])) == pytest.approx(9.17e-20, rel=2e-3)
    assert np.linalg.norm(induced_magnetic_moment(p, [0, 0.072, 0])) == pytest.approx(6.60e-19, rel=3e-3)
    assert np.all(induced_magnetic_moment(p, np.zeros(3)) == 0)


def test_pinned_moment_points_against_field():
    p = diamond(m_override=1e-20)
    m = induced_magnetic_moment(p, [0.3, 0, 0.4])
    assert np.allclose(m, [-0.6e-20, 0, -0.8e-20])
    assert magnetic_moment_magnitude(p, 0.0) == 1e-20


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0).filter(lambda v: v == 0 or abs(v) > 1e-100), min_size=3, max_size=3),
       st.floats(0.1, 10.0))
def test_responses_linear_and_diamagnetic(B, k):
    p = diamond()
    B = np.array(B)
    m = induced_magnetic_moment(p, B)
    assert m @ B <= 0
    np.testing.assert_allclose(induced_magnetic_moment(p, k * B), k * m, rtol=1e-15, atol=0)
    np.testing.assert_allclose(induced_electric_dipole(p, k * B), k * induced_electric_dipole(p, B), rtol=1e-15, atol=0)


@pytest.mark.parametrize("kw", [dict(radius=0), dict(density=-1), dict(eps_r=1.0), dict(chi_v=0.1),
                                dict(chi_v=-1.0), dict(theta_e=4.0), dict(theta_m=-0.1), dict(d_perm=-1)])
def test_particle_invariants(kw):
    with pytest.raises(ConfigError):
        ParticleSpec(**kw)


def test_particle_presets():
    assert particle_preset("diamond") == diamond()
    assert particle_preset("diamond_pinned_moment").m_override == 1e-20
    with pytest.raises(ConfigError):
        particle_preset("sapphire")
