from __future__ import annotations

import cmath
import math

import pytest
import sympy as sp

from hardyweave.analysis import (
    LINES,
    conditional_state,
    fit_loglog_slope,
    noise_ratios,
    oracle_expand_symbolic,
    post_crystal_state,
    scan_alpha,
    symbolic_expansion,
    verify_hardy_paradox,
)
from hardyweave.errors import ZeroNorm
from hardyweave.fock import max_amplitude_error, prune
from hardyweave.pipeline import LaserConfig, run_full

a, b, g, q, qc = sp.symbols("alpha beta gamma q q_conj")


def test_conditional_partner_after_d_click_is_pure():
    signal_side = run_full(LaserConfig(), 1e-3).stage("final_signal")
    partner, _ = prune(conditional_state(signal_side, "d_S"))
    assert len(partner) == 1
    assert abs(partner.amplitude(u_I=1)) == pytest.approx(1, abs=1e-12)


def test_conditional_partner_after_c_click():
    signal_side = run_full(LaserConfig(), 1e-3).stage("final_signal")
    partner = conditional_state(signal_side, "c_S")
    assert abs(partner.amplitude(v_I=1)) ** 2 == pytest.approx(4 / 5, abs=1e-12)
    assert abs(partner.amplitude(u_I=1)) ** 2 == pytest.approx(1 / 5, abs=1e-12)


def test_conditional_on_impossible_click():
    signal_side = run_full(LaserConfig(), 1e-3).stage("final_signal")
    with pytest.raises(ZeroNorm):
        conditional_state(signal_side, "c_I")


def test_oracle_interfering_coefficient():
    pair = symbolic_expansion(3)["pair"]
    assert sp.simplify(pair[(1, 0, 1, 0, 0)] - (q * g - a * b / 2)) == 0


def test_oracle_pump_depletion_coefficients():
    depletion = symbolic_expansion(3)["pump_depletion"]
    assert sp.simplify(depletion[(0, 0, 0, 0, 1)] - qc * a * b / 2) == 0
    # one extra pump photon next to an existing one carries sqrt(2)
    assert sp.simplify(depletion[(0, 0, 0, 0, 2)] - sp.sqrt(2) * g * qc * a * b / 2) == 0


def test_oracle_lines_partition_photon_numbers():
    expansion = symbolic_expansion(2)
    photons = {"vacuum": 0, "pump_depletion": 0, "single": 1, "pair": 2, "triple": 3, "two_pair": 4}
    for line in LINES:
        assert expansion[line]
        for key in expansion[line]:
            assert sum(key[:4]) == photons[line]


@pytest.mark.parametrize("q_value", [1e-3, 2e-3 - 1e-3j])
def test_oracle_matches_simulator(q_value):
    cfg = LaserConfig(alpha=0.1 * cmath.exp(0.4j), beta=0.1 * cmath.exp(-1.2j), gamma=0.3 + 0.2j)
    sim = post_crystal_state(cfg, q_value)
    oracle = oracle_expand_symbolic(cfg, q_value).as_state(cfg)
    assert max_amplitude_error(sim, oracle) <= 1e-15


def test_noise_ratios_scale_with_alpha():
    for alpha in (0.1, 0.02):
        report = noise_ratios(LaserConfig.satisfying_condition5(alpha, 1e-3), 1e-3)
        assert report.ratio_triple == pytest.approx(alpha, rel=1e-9)
        assert report.ratio_two_pair == pytest.approx(alpha**2, rel=1e-9)
        assert report.pair_amp > report.triple_amp > report.two_pair_amp


@pytest.mark.parametrize("theta", [0.5, 2.0])
def test_noise_ratios_phase_invariant(theta):
    base = noise_ratios(LaserConfig.satisfying_condition5(0.05, 1e-3), 1e-3)
    rot = cmath.exp(1j * theta)
    moved = noise_ratios(LaserConfig.satisfying_condition5(0.05 * rot, 1e-3 * rot), 1e-3 * rot)
    assert moved.ratio_triple == pytest.approx(base.ratio_triple, rel=1e-12)
    assert moved.ratio_two_pair == pytest.approx(base.ratio_two_pair, rel=1e-12)


def test_noise_ratios_without_pairs():
    report = noise_ratios(LaserConfig(alpha=0, beta=0, gamma=0), 1e-3)
    assert math.isinf(report.ratio_triple)


def test_verify_hardy_paradox_default():
    report = verify_hardy_paradox(LaserConfig(), 1e-3)
    assert report.verdict
    assert report.p_dd == pytest.approx(1 / 12, abs=1e-12)


def test_fit_loglog_slope_on_power_law():
    xs = [0.5, 0.2, 0.1]
    assert fit_loglog_slope(xs, [3 * x**1.5 for x in xs]) == pytest.approx(1.5, abs=1e-12)


def test_scan_without_condition5_marks_rejections():
    points = scan_alpha([0.01, 0.02], 1e-3, satisfy_condition5=False, gamma=0.05)
    assert points[0].p_dd == pytest.approx(1 / 12, abs=1e-12)
    assert points[1].p_dd is None
