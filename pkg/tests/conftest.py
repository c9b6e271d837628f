import functools

import numpy as np
import pytest

from wiretrap.core import diamond
from wiretrap.fieldsolver import BiasField, FieldModel
from wiretrap.geometry import preset_bias, preset_layout
from wiretrap.potentials import PotentialModel, PotentialOptions

PRESETS = ("z30", "u30", "Z1mm")


@functools.lru_cache(maxsize=None)
def field_model(name: str, images: bool = True) -> FieldModel:
    return FieldModel(preset_layout(name), BiasField.along_minus_y(preset_bias(name)), images)


@functools.lru_cache(maxsize=None)
def potential_model(name: str, orientation: str = "V", images: bool = True, plate: bool = True,
                    chip_gravity: bool = False) -> PotentialModel:
    opts = PotentialOptions(orientation, plate, plate, plate, chip_gravity)
    return PotentialModel(preset_layout(name), BiasField.along_minus_y(preset_bias(name)), diamond(), opts, images)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_points_above(layout, n, rng, height=(1.5e-6, 40e-6), margin=40e-6):
    """Random points above the wire plane near the trap, clear of every ribbon."""
    xs = [p[0] for w in layout.wires[1:-1] for p in (w.p_start, w.p_end)] or [0.0]
    lo, hi = min(xs) - margin, max(xs) + margin
    base = layout.chip_half_width
    return np.column_stack([
        rng.uniform(lo, hi, n),
        rng.uniform(-margin, margin, n),
        base + rng.uniform(*height, n),
    ])


# One line per acceptance criterion, printed after the run whatever the capture mode.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
