from __future__ import annotations

import cmath
import math

import pytest

from hardyweave.errors import CancellationFailed, ConfigError, EmptySelection, UnnormalizedInput
from hardyweave.fock import align_global_phase, norm, vacuum
from hardyweave.pipeline import (
    LaserConfig,
    build_initial_state,
    check_condition5,
    condition5_residual,
    detection_probabilities,
    hardy_modes,
    hardy_state,
    post_select_single_pair,
    run_crystal,
    run_final_bs,
    run_full,
    run_input_splitters,
)

I = 1j
HARDY = {("u_S", "v_I"): I, ("v_S", "u_I"): I, ("v_S", "v_I"): 1}


def test_initial_state_term_count_and_norm():
    state = build_initial_state(LaserConfig(pump_n_max=2))
    assert len(state) == 2 * 2 * 3
    assert norm(state) == pytest.approx(1, abs=1e-15)
    assert state.modes == hardy_modes()


def test_config_validation():
    with pytest.raises(ConfigError):
        LaserConfig(alpha=0.01, beta=0.02)
    with pytest.raises(ConfigError):
        LaserConfig(alpha=0.5, beta=0.5)
    with pytest.raises(ConfigError):
        LaserConfig.satisfying_condition5(0.01, 0)


def test_condition5_residual_examples():
    assert condition5_residual(0.01, 0.01, 0.05, 1e-3) == pytest.approx(0, abs=1e-15)
    # pump phase flipped by pi doubles the mismatch
    assert condition5_residual(0.01, 0.01, 0.05 * cmath.exp(1j * math.pi), 1e-3) == pytest.approx(2)
    assert condition5_residual(0.01, 0.01, 0.055, 1e-3) == pytest.approx(0.1)
    assert check_condition5(LaserConfig(), 1e-3) == pytest.approx(0, abs=1e-15)


def test_post_selection_empty_without_pairs():
    state = vacuum(hardy_modes())
    with pytest.raises(EmptySelection):
        post_select_single_pair(state)


def test_post_selection_keeps_one_photon_per_band():
    cfg = LaserConfig()
    state = post_select_single_pair(run_crystal(run_input_splitters(build_initial_state(cfg)), 1e-3))
    names = state.modes.names
    for occ in state.terms:
        d = dict(zip(names, occ))
        assert d["u_S"] + d["v_S"] == 1 and d["u_I"] + d["v_I"] == 1


def test_hardy_state_three_terms():
    report = run_full(LaserConfig(), 1e-3)
    phi = report.stage("hardy")
    assert len(phi) == 3
    for (ms, mi), amp in HARDY.items():
        assert phi.amplitude({ms: 1, mi: 1}) == pytest.approx(amp / math.sqrt(3), abs=1e-12)
    assert report.cancellation_residual < 1e-12


def test_final_splitters_commute():
    phi = run_full(LaserConfig(), 1e-3).stage("hardy")
    s_first = run_final_bs(run_final_bs(phi, "S"), "I")
    i_first = run_final_bs(run_final_bs(phi, "I"), "S")
    assert norm(s_first - i_first) <= 1e-15
    assert norm(s_first - run_final_bs(phi)) <= 1e-15


def test_final_side_argument_validated():
    phi = run_full(LaserConfig(), 1e-3).stage("hardy")
    with pytest.raises(ValueError):
        run_final_bs(phi, "X")


@pytest.mark.parametrize("theta", [0.3, 1.7, -2.5])
def test_common_phase_rotation_leaves_probabilities(theta):
    # rotating alpha and beta by e^{i theta} and gamma by e^{2 i theta} keeps condition 5
    rot = cmath.exp(1j * theta)
    base = run_full(LaserConfig(), 1e-3)
    cfg = LaserConfig(alpha=0.01 * rot, beta=0.01 * rot, gamma=0.05 * rot**2)
    moved = run_full(cfg, 1e-3)
    for key, p in base.detection_table.items():
        assert moved.detection_table[key] == pytest.approx(p, abs=1e-12)
    aligned = align_global_phase(moved.stage("hardy"), base.stage("hardy"))
    assert norm(aligned - base.stage("hardy")) <= 1e-12


def test_violation_is_rejected_with_residual():
    with pytest.raises(CancellationFailed) as info:
        run_full(LaserConfig(gamma=0.055), 1e-3)
    assert info.value.stage == "hardy"
    assert info.value.residual == pytest.approx(0.1 / math.sqrt(3), rel=1e-3)


def test_zero_q_is_empty_selection():
    with pytest.raises(EmptySelection) as info:
        run_full(LaserConfig(), 0)
    assert info.value.stage == "post_selection"


def test_hardy_state_rejects_bad_phase():
    cfg = LaserConfig(gamma=-0.05)
    state = post_select_single_pair(run_crystal(run_input_splitters(build_initial_state(cfg)), 1e-3))
    with pytest.raises(CancellationFailed):
        hardy_state(state, cfg)


def test_detection_requires_normalized_state():
    phi = run_full(LaserConfig(), 1e-3).stage("final")
    with pytest.raises(UnnormalizedInput):
        detection_probabilities(phi * 2)


def test_probabilities_sum_to_one():
    table = run_full(LaserConfig(), 1e-3).detection_table
    assert sum(table.values()) == pytest.approx(1, abs=1e-12)


def test_exact_crystal_stage_close_to_first_order():
    cfg = LaserConfig()
    split = run_input_splitters(build_initial_state(cfg))
    first = run_crystal(split, 1e-3)
    exact = run_crystal(split, 1e-3, "exact")
    assert norm(first - exact) <= 10 * 1e-6


def test_pump_truncation_reported():
    report = run_full(LaserConfig(), 1e-3)
    assert report.factorization_residual < 1e-12
    assert 0 < report.pump_truncation_leakage <= 1
