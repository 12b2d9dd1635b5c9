from __future__ import annotations

import math
from itertools import product

import numpy as np
import pytest
from scipy.linalg import expm

from hardyweave.errors import CutoffExceeded, UnsupportedParam
from hardyweave.fock import ModeSet, QuantumState, inner_product, norm, vacuum
from hardyweave.optics import (
    BeamSplitterSpec,
    DownConversionSpec,
    MirrorSpec,
    apply_beam_splitter,
    apply_down_conversion,
    apply_down_conversion_exact,
    apply_mirror,
    bs_matrix_final,
    bs_matrix_input,
    transfer_mode,
)

MODES = ModeSet(["a", "b"])
CUT = 3
BALANCED = BeamSplitterSpec(("a", "b"), ("a", "b"), bs_matrix_final())


def basis_states(max_total=3):
    for m, n in product(range(max_total + 1), repeat=2):
        if m + n <= max_total:
            yield QuantumState(MODES, {(m, n): 1}, (CUT, CUT))


def dense_bs_oracle(m: int, n: int) -> dict[tuple[int, int], complex]:
    """exp(i pi/4 (a^dag b + b^dag a)) on a truncated two-mode space."""
    dim = CUT + 1
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    eye = np.eye(dim)
    A, B = np.kron(a, eye), np.kron(eye, a)
    gen = A.conj().T @ B + B.conj().T @ A
    u = expm(1j * math.pi / 4 * gen)
    vec = np.zeros(dim * dim, dtype=complex)
    vec[m * dim + n] = 1
    out = u @ vec
    return {divmod(k, dim): complex(out[k]) for k in np.flatnonzero(np.abs(out) > 1e-14)}


@pytest.mark.parametrize("state", list(basis_states()), ids=lambda s: str(next(iter(s.terms))))
def test_beam_splitter_matches_dense_oracle(state):
    (m, n), = state.terms
    out = apply_beam_splitter(state, BALANCED)
    expected = dense_bs_oracle(m, n)
    keys = set(expected) | {k for k, v in out.terms.items() if abs(v) > 1e-14}
    for k in keys:
        assert out.terms.get(k, 0j) == pytest.approx(expected.get(k, 0j), abs=1e-12)


def test_two_photon_interference():
    out = apply_beam_splitter(QuantumState(MODES, {(1, 1): 1}, (CUT, CUT)), BALANCED)
    assert abs(out.amplitude(a=1, b=1)) < 1e-15
    assert out.amplitude(a=2) == pytest.approx(1j / math.sqrt(2), abs=1e-15)
    assert out.amplitude(b=2) == pytest.approx(1j / math.sqrt(2), abs=1e-15)


def test_input_splitter_sends_photon_to_v_and_iu():
    modes = ModeSet(["S", "v", "u"])
    spec = BeamSplitterSpec(("S", None), ("v", "u"), bs_matrix_input())
    out = apply_beam_splitter(QuantumState(modes, {(1, 0, 0): 1}, (3, 3, 3)), spec)
    assert out.amplitude(v=1) == pytest.approx(1 / math.sqrt(2))
    assert out.amplitude(u=1) == pytest.approx(1j / math.sqrt(2))


@pytest.mark.parametrize("state", list(basis_states()), ids=lambda s: str(next(iter(s.terms))))
def test_beam_splitter_preserves_norm_and_inverts(state):
    out = apply_beam_splitter(state, BALANCED)
    assert abs(norm(out) - 1) <= 1e-12
    back = apply_beam_splitter(out, BALANCED.inverse())
    for k, v in back.terms.items():
        assert v == pytest.approx(state.terms.get(k, 0j), abs=1e-12)


def test_beam_splitter_rejects_non_unitary():
    with pytest.raises(ValueError):
        BeamSplitterSpec(("a", "b"), ("a", "b"), [[1, 1], [0, 1]])


def test_beam_splitter_cutoff_overflow():
    state = QuantumState(MODES, {(2, 2): 1}, (CUT, CUT))
    with pytest.raises(CutoffExceeded):
        apply_beam_splitter(state, BALANCED)


def test_mirror_phase():
    state = QuantumState(MODES, {(2, 0): 1, (1, 0): 1}, (CUT, CUT))
    out = apply_mirror(state, MirrorSpec("a", 1j))
    assert out.amplitude(a=2) == pytest.approx(-1)
    assert out.amplitude(a=1) == pytest.approx(1j)
    with pytest.raises(ValueError):
        MirrorSpec("a", 2)


def test_transfer_mode_merges_photons_bosonically():
    state = QuantumState(MODES, {(1, 1): 1}, (CUT, CUT))
    out = transfer_mode(state, "a", "b")
    assert out.amplitude(b=2) == pytest.approx(math.sqrt(2))


DC_MODES = ModeSet(["F", "s", "i", "x"])


def dc_state(terms):
    return QuantumState(DC_MODES, terms, (4, 3, 3, 3))


def test_down_conversion_creates_pair():
    q = 1e-3 + 2e-4j
    out = apply_down_conversion(dc_state({(1, 0, 0, 0): 1}), DownConversionSpec("F", "s", "i", q))
    assert out.amplitude(F=1) == 1
    assert out.amplitude(s=1, i=1) == pytest.approx(q)


def test_down_conversion_reverse_process():
    q = 1e-3 + 2e-4j
    out = apply_down_conversion(dc_state({(0, 1, 1, 0): 1}), DownConversionSpec("F", "s", "i", q))
    assert out.amplitude(s=1, i=1) == 1
    assert out.amplitude(F=1) == pytest.approx(-q.conjugate())


def test_first_order_limit():
    with pytest.raises(UnsupportedParam):
        DownConversionSpec("F", "s", "i", 0.1)
    DownConversionSpec("F", "s", "i", 0.1, "exact")


@pytest.mark.parametrize("q", [1e-2, 1e-3j, 0.05 - 0.05j])
def test_exact_down_conversion_is_unitary(q, rng):
    spec = DownConversionSpec("F", "s", "i", q, "exact")
    terms = {}
    for _ in range(8):
        occ = (int(rng.integers(0, 5)), int(rng.integers(0, 4)), int(rng.integers(0, 4)), int(rng.integers(0, 4)))
        terms[occ] = complex(rng.normal(), rng.normal())
    a, b = dc_state(terms), dc_state({(1, 0, 0, 2): 1, (3, 1, 0, 0): 0.5j})
    ua, ub = apply_down_conversion_exact(a, spec), apply_down_conversion_exact(b, spec)
    assert abs(norm(ua) - norm(a)) <= 1e-10 * norm(a)
    assert abs(inner_product(ua, ub) - inner_product(a, b)) <= 1e-10


def test_exact_and_first_order_agree_to_second_order():
    state = dc_state({(2, 0, 0, 0): 0.8, (0, 1, 1, 1): 0.6})
    for q in (1e-2, 1e-3):
        first = apply_down_conversion(state, DownConversionSpec("F", "s", "i", q))
        exact = apply_down_conversion_exact(state, DownConversionSpec("F", "s", "i", q, "exact"))
        assert norm(first - exact) <= 10 * abs(q) ** 2


def test_down_conversion_commutes_with_disjoint_splitter():
    modes = ModeSet(["F", "s", "i", "x", "y"])
    state = QuantumState(modes, {(1, 0, 0, 1, 0): 1, (0, 1, 1, 0, 1): 0.5j}, (4, 3, 3, 3, 3))
    dc = DownConversionSpec("F", "s", "i", 2e-3)
    bs = BeamSplitterSpec(("x", "y"), ("x", "y"), bs_matrix_final())
    one = apply_beam_splitter(apply_down_conversion(state, dc), bs)
    two = apply_down_conversion(apply_beam_splitter(state, bs), dc)
    assert norm(one - two) <= 1e-15


def test_down_conversion_on_vacuum_is_identity():
    state = vacuum(DC_MODES, (4, 3, 3, 3))
    out = apply_down_conversion(state, DownConversionSpec("F", "s", "i", 1e-3))
    assert out.terms == state.terms
