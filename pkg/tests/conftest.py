import math
from pathlib import Path

import numpy as np
import pytest

from inducedflow import BaseInterval, FiniteLinear, GeometricCountable, LorenzTemplate, PotentialSpec, SuspensionSystem

MODELS = Path(__file__).resolve().parents[1] / "models"
UNIT = BaseInterval(0.0, 1.0)


def full_branch(k=2, c=1.0, **kw):
    return SuspensionSystem(FiniteLinear(UNIT, [1.0] * k, [c] * k), **kw)


def golden_system():
    return SuspensionSystem(FiniteLinear(UNIT, [1.0, 1.0], [1.0, 2.0]))


def geometric_system(**kw):
    return SuspensionSystem(GeometricCountable(UNIT, **kw))


def phase_system():
    return geometric_system(log_coeff=2.0, const_offset=math.log(2.0))


def lorenz_system():
    return SuspensionSystem(LorenzTemplate(UNIT, 0.5, 1.0, 1.0))


def skew_system():
    fam = FiniteLinear(UNIT, [1.0, 1.0], [1.0, 1.5], roof_slopes=[0.25, -0.25])
    return SuspensionSystem(fam, stable_rate=1.0, stable_shift=0.5)


def affine_roof_system():
    return SuspensionSystem(FiniteLinear(UNIT, [1.0, 2.0], [1.0, 1.2], roof_slopes=[0.5, -0.1]))


THETA_POT = PotentialSpec.constant(-0.3, singular_value=-0.3)
LORENZ_POT = PotentialSpec.affine(const=-0.2, x=0.5, singular_value=-0.2)
SKEW_POT = PotentialSpec.affine(x=0.5, t=0.2, s=1.0)
X_POT = PotentialSpec.affine(x=1.0)


def suite():
    """(name, system, potential) for every reference model of the suite."""
    return [
        ("doubling-x", full_branch(), X_POT),
        ("golden", golden_system(), PotentialSpec.constant(0.0)),
        ("three-branch", full_branch(3), PotentialSpec.constant(0.4)),
        ("affine-roof", affine_roof_system(), PotentialSpec.affine(x=-0.5, t=0.3)),
        ("skew", skew_system(), SKEW_POT),
        ("geometric", geometric_system(), THETA_POT),
        ("phase", phase_system(), THETA_POT),
        ("lorenz", lorenz_system(), LORENZ_POT),
    ]


@pytest.fixture
def doubling():
    return full_branch()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria: number -> {"title": str, "parts": [(ok, detail)]}
ACCEPTANCE = {}


def record_criterion(number, title, ok, detail):
    entry = ACCEPTANCE.setdefault(number, {"title": title, "parts": []})
    entry["parts"].append((bool(ok), detail))


def acceptance_lines():
    lines = []
    for n in sorted(ACCEPTANCE):
        entry = ACCEPTANCE[n]
        ok = all(p[0] for p in entry["parts"])
        detail = "; ".join(p[1] for p in entry["parts"])
        lines.append(f"C{n:<2} {'PASS' if ok else 'FAIL'}  {entry['title']}: {detail}")
    return lines


def pytest_terminal_summary(terminalreporter):
    lines = acceptance_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
