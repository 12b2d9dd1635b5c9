"""Optical elements acting on :class:`~hardyweave.fock.QuantumState`.

Beam splitters act by substituting each input creation operator with a
linear combination of output creation operators, ``a_in[i]^dag ->
sum_j M[j, i] a_out[j]^dag``, so column ``i`` of the matrix is the image of
input port ``i``. Down-conversion is available to first order in the
amplitude ``q`` and, as an oracle, by exact exponentiation on the truncated
pump/signal/idler space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Literal

import numpy as np
from scipy.linalg import expm

from .errors import CutoffExceeded, UnsupportedParam
from .fock import (
    Occupation,
    QuantumState,
    apply_annihilation,
    apply_creation,
)

FIRST_ORDER_Q_LIMIT = 0.1

_S = 1 / math.sqrt(2)


def bs_matrix_input() -> np.ndarray:
    """Input splitter: occupied port -> (v + i u)/sqrt(2), outputs ordered (v, u).

    The second column is the (normally empty) second input port.
    """
    return np.array([[_S, 1j * _S], [1j * _S, _S]], dtype=complex)


def bs_matrix_final() -> np.ndarray:
    """Detector splitter: u -> (c + i d)/sqrt(2), v -> (i c + d)/sqrt(2); inputs (u, v), outputs (c, d)."""
    return np.array([[_S, 1j * _S], [1j * _S, _S]], dtype=complex)


def _as_matrix(matrix) -> tuple[tuple[complex, complex], tuple[complex, complex]]:
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError(f"beam-splitter matrix must be 2x2, got shape {m.shape}")
    return ((complex(m[0, 0]), complex(m[0, 1])), (complex(m[1, 0]), complex(m[1, 1])))


@dataclass(frozen=True)
class BeamSplitterSpec:
    """Two-port splitter. ``in_modes[1]`` may be ``None`` for an unused (vacuum) port."""

    in_modes: tuple[str, str | None]
    out_modes: tuple[str, str]
    matrix: tuple[tuple[complex, complex], tuple[complex, complex]]

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_matrix(self.matrix))
        object.__setattr__(self, "in_modes", tuple(self.in_modes))
        object.__setattr__(self, "out_modes", tuple(self.out_modes))
        if len(self.in_modes) != 2 or len(self.out_modes) != 2:
            raise ValueError("a beam splitter has two input and two output ports")
        if self.in_modes[0] is None or self.in_modes[0] == self.in_modes[1]:
            raise ValueError(f"input modes must be distinct, got {self.in_modes}")
        if self.out_modes[0] == self.out_modes[1]:
            raise ValueError(f"output modes must be distinct, got {self.out_modes}")
        m = self.array
        if not np.allclose(m @ m.conj().T, np.eye(2), rtol=0, atol=1e-12):
            raise ValueError("beam-splitter matrix is not unitary")

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex)

    def inverse(self) -> BeamSplitterSpec:
        """The splitter that undoes this one (outputs fed back to the inputs)."""
        if self.in_modes[1] is None:
            raise ValueError("cannot invert a splitter with an implicit vacuum port")
        return BeamSplitterSpec(self.out_modes, self.in_modes, self.array.conj().T)


@dataclass(frozen=True)
class MirrorSpec:
    mode: str
    phase: complex = 1 + 0j

    def __post_init__(self):
        object.__setattr__(self, "phase", complex(self.phase))
        if abs(abs(self.phase) - 1) > 1e-12:
            raise ValueError(f"mirror phase must have unit modulus, got {self.phase}")


@dataclass(frozen=True)
class DownConversionSpec:
    """Crystal turning one pump photon into a signal/idler pair with amplitude ``q``.

    ``expansion_order=1`` keeps ``1 + q A - q* A^dag`` with
    ``A = a_pump a_signal^dag a_idler^dag``; ``"exact"`` exponentiates.
    """

    pump: str
    signal_out: str
    idler_out: str
    q: complex
    expansion_order: Literal[1, "exact"] = 1

    def __post_init__(self):
        object.__setattr__(self, "q", complex(self.q))
        if len({self.pump, self.signal_out, self.idler_out}) != 3:
            raise ValueError("pump, signal and idler modes must be pairwise distinct")
        if self.expansion_order not in (1, "exact"):
            raise UnsupportedParam(f"expansion_order must be 1 or 'exact', got {self.expansion_order!r}")
        if self.expansion_order == 1 and abs(self.q) >= FIRST_ORDER_Q_LIMIT:
            raise UnsupportedParam(
                f"|q| = {abs(self.q):g} is outside the first-order regime (|q| < {FIRST_ORDER_Q_LIMIT})"
            )


def _creation_power(occ: list[int], k: int, p: int, cap: int, name: str) -> float:
    # (a_k^dag)^p |n> = sqrt((n+p)!/n!) |n+p>, applied in place on occ
    n = occ[k]
    if n + p > cap:
        raise CutoffExceeded(f"beam splitter would put {n + p} photons in {name!r} (cutoff {cap})")
    occ[k] = n + p
    return math.sqrt(math.factorial(n + p) / math.factorial(n))


def apply_beam_splitter(state: QuantumState, spec: BeamSplitterSpec) -> QuantumState:
    """Apply a two-port splitter.

    Input and output modes may coincide (in-place mixing). Photon number over
    the ports is conserved, so with at most ``cutoff`` photons on the two
    input ports no overflow can occur; otherwise :class:`CutoffExceeded`.
    """
    modes = state.modes
    i0 = modes.index(spec.in_modes[0])
    i1 = modes.index(spec.in_modes[1]) if spec.in_modes[1] is not None else None
    o0, o1 = modes.index(spec.out_modes[0]), modes.index(spec.out_modes[1])
    (m00, m01), (m10, m11) = spec.matrix
    cap0, cap1 = state.cutoffs[o0], state.cutoffs[o1]
    name0, name1 = spec.out_modes

    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        m = occ[i0]
        n = occ[i1] if i1 is not None else 0
        base = list(occ)
        base[i0] = 0
        if i1 is not None:
            base[i1] = 0
        pref = amp / math.sqrt(math.factorial(m) * math.factorial(n))
        # (m00 a0 + m10 a1)^m (m01 a0 + m11 a1)^n, binomially expanded
        for j, k in product(range(m + 1), range(n + 1)):
            coeff = (
                math.comb(m, j) * math.comb(n, k) * m00**j * m10 ** (m - j) * m01**k * m11 ** (n - k)
            )
            if coeff == 0:
                continue
            new = list(base)
            coeff *= _creation_power(new, o0, j + k, cap0, name0)
            coeff *= _creation_power(new, o1, (m - j) + (n - k), cap1, name1)
            key = tuple(new)
            out[key] = out.get(key, 0j) + pref * coeff
    return state._derive(out)


def apply_mirror(state: QuantumState, spec: MirrorSpec) -> QuantumState:
    k = state.modes.index(spec.mode)
    if spec.phase == 1:
        return state
    return state._derive({occ: amp * spec.phase ** occ[k] for occ, amp in state.terms.items()})


def transfer_mode(state: QuantumState, src: str, dst: str, phase: complex = 1) -> QuantumState:
    """Route every photon of ``src`` into ``dst`` (times ``phase`` per photon).

    Implements the substitution ``a_src^dag -> phase * a_dst^dag``; used for
    mirrors and pinholes that relabel a beam.
    """
    if src == dst:
        return apply_mirror(state, MirrorSpec(src, phase))
    ks, kd = state.modes.index(src), state.modes.index(dst)
    cap = state.cutoffs[kd]
    phase = complex(phase)
    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        n, b = occ[ks], occ[kd]
        if n + b > cap:
            raise CutoffExceeded(f"routing {src!r} into {dst!r} exceeds cutoff {cap}")
        new = list(occ)
        new[ks] = 0
        new[kd] = n + b
        coeff = phase**n * math.sqrt(math.comb(n + b, n))
        key = tuple(new)
        out[key] = out.get(key, 0j) + amp * coeff
    return state._derive(out)


def _pair_creation(state: QuantumState, spec: DownConversionSpec) -> QuantumState:
    # annihilate first so overflowing creations on dead terms are never attempted
    s = apply_annihilation(state, spec.pump)
    s = apply_creation(s, spec.signal_out)
    return apply_creation(s, spec.idler_out)


def _pair_annihilation(state: QuantumState, spec: DownConversionSpec) -> QuantumState:
    s = apply_annihilation(state, spec.signal_out)
    s = apply_annihilation(s, spec.idler_out)
    return apply_creation(s, spec.pump)


def apply_down_conversion(state: QuantumState, spec: DownConversionSpec) -> QuantumState:
    """``(1 + q A - q* A^dag)|state>``; not unitary, the norm error is O(|q|^2)."""
    if spec.expansion_order == "exact":
        return apply_down_conversion_exact(state, spec)
    q = spec.q
    if q == 0:
        return state
    return state + q * _pair_creation(state, spec) - q.conjugate() * _pair_annihilation(state, spec)


def _ladder(dim: int) -> np.ndarray:
    # truncated annihilation operator on span{|0>..|dim-1>}
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)


@lru_cache(maxsize=64)
def _dc_propagator(q: complex, dims: tuple[int, int, int]) -> np.ndarray:
    dp, ds, di = dims
    a_p, a_s, a_i = _ladder(dp), _ladder(ds), _ladder(di)
    pair = np.kron(np.kron(a_p, a_s.T), a_i.T)  # a_p a_s^dag a_i^dag
    generator = q * pair - np.conjugate(q) * pair.conj().T
    return expm(generator)


def down_conversion_propagator(q: complex, dims: tuple[int, int, int]) -> np.ndarray:
    """Dense ``exp(q A - q* A^dag)`` on the truncated (pump, signal, idler) space."""
    return _dc_propagator(complex(q), tuple(int(d) for d in dims)).copy()


def apply_down_conversion_exact(state: QuantumState, spec: DownConversionSpec) -> QuantumState:
    """Exact truncated down-conversion.

    The generator is exponentiated on the three crystal modes only, with
    each mode truncated at its cutoff; the other modes are spectators.
    """
    modes = state.modes
    kp, ks, ki = (modes.index(m) for m in (spec.pump, spec.signal_out, spec.idler_out))
    dims = (state.cutoffs[kp] + 1, state.cutoffs[ks] + 1, state.cutoffs[ki] + 1)
    if spec.q == 0:
        return state
    prop = _dc_propagator(spec.q, dims)
    width = dims[0] * dims[1] * dims[2]

    blocks: dict[Occupation, np.ndarray] = {}
    for occ, amp in state.terms.items():
        spectator = tuple(0 if j in (kp, ks, ki) else n for j, n in enumerate(occ))
        vec = blocks.get(spectator)
        if vec is None:
            vec = blocks[spectator] = np.zeros(width, dtype=complex)
        vec[(occ[kp] * dims[1] + occ[ks]) * dims[2] + occ[ki]] += amp

    out: dict[Occupation, complex] = {}
    for spectator, vec in blocks.items():
        evolved = prop @ vec
        for flat in np.flatnonzero(evolved):
            p, rest = divmod(int(flat), dims[1] * dims[2])
            s, i = divmod(rest, dims[2])
            new = list(spectator)
            new[kp], new[ks], new[ki] = p, s, i
            out[tuple(new)] = complex(evolved[flat])
    return state._derive(out)
