import math

import pytest

import oracles


def test_frozen_constants_match_their_derivations():
    assert oracles.golden_log() == pytest.approx(oracles.GOLDEN_LOG, abs=1e-15)
    assert oracles.beta_c_phase() == pytest.approx(oracles.BETA_C_PHASE, abs=1e-14)
    assert oracles.phase_pressure(0.5) == pytest.approx(oracles.P_PHASE_HALF, abs=1e-14)
    assert oracles.phase_lambda_at_zc(1.0) == pytest.approx(oracles.PI2_OVER_12, abs=1e-15)
    assert oracles.PI2_OVER_12 == pytest.approx(math.pi ** 2 / 12, abs=1e-15)


def test_golden_quadratic():
    q = math.exp(-oracles.GOLDEN_LOG)
    assert q + q * q == pytest.approx(1.0, abs=1e-15)
