"""Sparse multimode Fock states.

A :class:`QuantumState` is a map from occupation tuples to complex amplitudes
over an ordered :class:`ModeSet`. States are immutable; every operation returns
a new state. Amplitudes are stored unnormalized unless :func:`normalize` is
called, which lets coherent factors be kept in their truncated series form and
normalized once for the whole product.
"""

from __future__ import annotations

import cmath
import math
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

from .errors import (
    CutoffExceeded,
    DuplicateMode,
    ModeCollision,
    UnregisteredMode,
    ZeroNorm,
)

DEFAULT_CUTOFF = 3
DEFAULT_PRUNE_THRESHOLD = 1e-15

CANONICAL_MODES = (
    "S_in",
    "I_in",
    "u_S",
    "v_S",
    "u_I",
    "v_I",
    "c_S",
    "d_S",
    "c_I",
    "d_I",
    "F",
)

Occupation = tuple[int, ...]


class ModeSet:
    """Ordered, duplicate-free collection of mode names.

    Basis states are tuples aligned with this order, so the order fixed here
    also fixes iteration and comparison order everywhere else.
    """

    __slots__ = ("_names", "_index")

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if not names:
            raise ValueError("a mode set needs at least one mode")
        index: dict[str, int] = {}
        for i, name in enumerate(names):
            if not isinstance(name, str) or not name:
                raise ValueError(f"mode names must be non-empty strings, got {name!r}")
            if name in index:
                raise DuplicateMode(f"mode {name!r} registered twice")
            index[name] = i
        self._names = names
        self._index = index

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnregisteredMode(f"mode {name!r} is not registered in {list(self._names)}") from None

    def basis(self, occupations: Mapping[str, int] | None = None, **kw: int) -> Occupation:
        """Occupation tuple with the given counts; unlisted modes are empty."""
        occ = [0] * len(self._names)
        for name, n in {**(occupations or {}), **kw}.items():
            if n < 0:
                raise ValueError(f"negative occupation {n} for mode {name!r}")
            occ[self.index(name)] = int(n)
        return tuple(occ)

    def describe(self, occ: Occupation) -> dict[str, int]:
        return {name: n for name, n in zip(self._names, occ) if n}

    def union(self, other: ModeSet) -> ModeSet:
        shared = set(self._names) & set(other._names)
        if shared:
            raise ModeCollision(f"mode sets overlap on {sorted(shared)}")
        return ModeSet(self._names + other._names)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ModeSet) and other._names == self._names

    def __hash__(self) -> int:
        return hash(self._names)

    def __repr__(self) -> str:
        return f"ModeSet({list(self._names)})"


def register_modes(names: Iterable[str]) -> ModeSet:
    return ModeSet(names)


def resolve_cutoffs(modes: ModeSet, cutoff: int | Mapping[str, int] | Iterable[int]) -> tuple[int, ...]:
    """Per-mode cutoffs from an int, a partial ``{mode: cutoff}`` map or a full sequence."""
    if isinstance(cutoff, int):
        out = (cutoff,) * len(modes)
    elif isinstance(cutoff, Mapping):
        for name in cutoff:
            modes.index(name)
        out = tuple(int(cutoff.get(name, DEFAULT_CUTOFF)) for name in modes)
    else:
        out = tuple(int(c) for c in cutoff)
        if len(out) != len(modes):
            raise ValueError(f"expected {len(modes)} cutoffs, got {len(out)}")
    if any(c < 0 for c in out):
        raise ValueError("cutoffs must be non-negative")
    return out


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Sparse superposition of Fock basis states.

    Args:
        modes: the registered mode set; basis tuples follow its order.
        terms: ``{occupation tuple: amplitude}``. Zero amplitudes are kept
            as given; use :func:`prune` to drop small terms.
        cutoffs: per-mode maximum occupation.
        prune_threshold: default threshold used by :func:`prune`.
    """

    modes: ModeSet
    terms: Mapping[Occupation, complex]
    cutoffs: tuple[int, ...]
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD
    _frozen: bool = field(default=False, repr=False)

    def __post_init__(self):
        if len(self.cutoffs) != len(self.modes):
            raise ValueError("cutoffs must align with modes")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be non-negative")
        if self._frozen:
            return
        width = len(self.modes)
        clean: dict[Occupation, complex] = {}
        for occ, amp in self.terms.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != width:
                raise ValueError(f"basis state {occ} does not match {width} modes")
            for n, cap, name in zip(occ, self.cutoffs, self.modes):
                if n < 0:
                    raise ValueError(f"negative occupation in {occ}")
                if n > cap:
                    raise CutoffExceeded(f"mode {name!r} occupation {n} exceeds cutoff {cap}")
            amp = complex(amp)
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise ValueError(f"non-finite amplitude {amp} on {occ}")
            clean[occ] = clean.get(occ, 0j) + amp
        object.__setattr__(self, "terms", MappingProxyType(clean))
        object.__setattr__(self, "_frozen", True)

    @classmethod
    def from_terms(
        cls,
        modes: ModeSet | Iterable[str],
        terms: Mapping | Iterable[tuple[Mapping[str, int] | Occupation, complex]],
        cutoff: int | Mapping[str, int] | Iterable[int] = DEFAULT_CUTOFF,
        prune_threshold: float = DEFAULT_PRUNE_THRESHOLD,
    ) -> QuantumState:
        """Build a state whose basis keys may be ``{mode: count}`` dicts."""
        modes = modes if isinstance(modes, ModeSet) else ModeSet(modes)
        items = terms.items() if isinstance(terms, Mapping) else terms
        out: dict[Occupation, complex] = {}
        for key, amp in items:
            occ = modes.basis(key) if isinstance(key, Mapping) else tuple(key)
            out[occ] = out.get(occ, 0j) + complex(amp)
        return cls(modes, out, resolve_cutoffs(modes, cutoff), prune_threshold)

    def _derive(self, terms: dict[Occupation, complex]) -> QuantumState:
        # Internal constructor for terms already known to be valid.
        return QuantumState(
            self.modes, MappingProxyType(terms), self.cutoffs, self.prune_threshold, True
        )

    def cutoff(self, mode: str) -> int:
        return self.cutoffs[self.modes.index(mode)]

    def amplitude(self, occ: Mapping[str, int] | Occupation | None = None, **kw: int) -> complex:
        if occ is None or isinstance(occ, Mapping):
            occ = self.modes.basis(occ, **kw)
        return self.terms.get(tuple(occ), 0j)

    def is_zero(self) -> bool:
        return not any(self.terms.values())

    def items(self) -> list[tuple[Occupation, complex]]:
        """Terms in deterministic (lexicographic basis) order."""
        return sorted(self.terms.items())

    def labelled(self) -> list[tuple[dict[str, int], complex]]:
        return [(self.modes.describe(occ), amp) for occ, amp in self.items()]

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: QuantumState) -> QuantumState:
        _check_compatible(self, other)
        out = dict(self.terms)
        for occ, amp in other.terms.items():
            out[occ] = out.get(occ, 0j) + amp
        return self._derive(out)

    def __sub__(self, other: QuantumState) -> QuantumState:
        return self + (-1) * other

    def __mul__(self, scalar: complex) -> QuantumState:
        scalar = complex(scalar)
        return self._derive({occ: amp * scalar for occ, amp in self.terms.items()})

    __rmul__ = __mul__

    def __repr__(self) -> str:
        body = ", ".join(f"{format_basis(self.modes, occ)}: {amp:.6g}" for occ, amp in self.items()[:8])
        more = "" if len(self.terms) <= 8 else f", ... ({len(self.terms)} terms)"
        return f"QuantumState({{{body}{more}}})"


def _check_compatible(a: QuantumState, b: QuantumState) -> None:
    if a.modes != b.modes:
        raise ModeCollision(f"states live on different mode sets: {a.modes} vs {b.modes}")


def format_basis(modes: ModeSet, occ: Occupation) -> str:
    """``|1 u_S, 1 v_I>`` style label; vacuum is ``|0>``."""
    parts = [name if n == 1 else f"{n} {name}" for name, n in zip(modes, occ) if n]
    return "|" + (", ".join(parts) if parts else "0") + ">"


def vacuum(
    modes: ModeSet | Iterable[str],
    cutoff: int | Mapping[str, int] | Iterable[int] = DEFAULT_CUTOFF,
    prune_threshold: float = DEFAULT_PRUNE_THRESHOLD,
) -> QuantumState:
    modes = modes if isinstance(modes, ModeSet) else ModeSet(modes)
    return QuantumState(modes, {(0,) * len(modes): 1 + 0j}, resolve_cutoffs(modes, cutoff), prune_threshold)


def zero_state(like: QuantumState) -> QuantumState:
    return like._derive({})


def coherent_term_expansion(
    mode: str,
    amplitude: complex,
    n_max: int,
    *,
    modes: ModeSet | Iterable[str] | None = None,
    cutoff: int | Mapping[str, int] | Iterable[int] = DEFAULT_CUTOFF,
) -> QuantumState:
    """Truncated, unnormalized coherent series ``sum_{n<=n_max} a^n / sqrt(n!) |n>``.

    The state lives on ``modes`` (default: just ``mode``) with every other
    mode empty. Normalization is deliberately left to the caller.
    """
    modes = ModeSet([mode]) if modes is None else (modes if isinstance(modes, ModeSet) else ModeSet(modes))
    cutoffs = resolve_cutoffs(modes, cutoff)
    k = modes.index(mode)
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if n_max > cutoffs[k]:
        raise CutoffExceeded(f"n_max={n_max} exceeds cutoff {cutoffs[k]} of mode {mode!r}")
    amplitude = complex(amplitude)
    terms: dict[Occupation, complex] = {}
    for n in range(n_max + 1):
        occ = [0] * len(modes)
        occ[k] = n
        terms[tuple(occ)] = amplitude**n / math.sqrt(math.factorial(n)) if n else 1 + 0j
    return QuantumState(modes, terms, cutoffs)


def tensor(a: QuantumState, b: QuantumState) -> QuantumState:
    modes = a.modes.union(b.modes)
    terms = {oa + ob: xa * xb for oa, xa in a.terms.items() for ob, xb in b.terms.items()}
    return QuantumState(
        modes, MappingProxyType(terms), a.cutoffs + b.cutoffs, min(a.prune_threshold, b.prune_threshold), True
    )


def reorder_modes(state: QuantumState, order: Iterable[str]) -> QuantumState:
    """Same state with its modes listed in ``order`` (a permutation)."""
    new = ModeSet(order)
    if set(new) != set(state.modes) or len(new) != len(state.modes):
        raise ValueError(f"{list(new)} is not a permutation of {list(state.modes)}")
    perm = [state.modes.index(name) for name in new]
    terms = {tuple(occ[i] for i in perm): amp for occ, amp in state.terms.items()}
    cutoffs = tuple(state.cutoffs[i] for i in perm)
    return QuantumState(new, MappingProxyType(terms), cutoffs, state.prune_threshold, True)


def apply_creation(state: QuantumState, mode: str) -> QuantumState:
    k = state.modes.index(mode)
    cap = state.cutoffs[k]
    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        n = occ[k]
        if n + 1 > cap:
            raise CutoffExceeded(f"creation on mode {mode!r} would exceed cutoff {cap}")
        new = occ[:k] + (n + 1,) + occ[k + 1 :]
        out[new] = out.get(new, 0j) + amp * math.sqrt(n + 1)
    return state._derive(out)


def apply_annihilation(state: QuantumState, mode: str) -> QuantumState:
    k = state.modes.index(mode)
    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        n = occ[k]
        if n == 0:
            continue
        new = occ[:k] + (n - 1,) + occ[k + 1 :]
        out[new] = out.get(new, 0j) + amp * math.sqrt(n)
    return state._derive(out)


def inner_product(a: QuantumState, b: QuantumState) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    _check_compatible(a, b)
    small, large = (a.terms, b.terms) if len(a.terms) <= len(b.terms) else (b.terms, a.terms)
    total = 0j
    for occ in small:
        if occ in large:
            total += a.terms[occ].conjugate() * b.terms[occ]
    return total


def norm(state: QuantumState) -> float:
    return math.sqrt(math.fsum(abs(amp) ** 2 for amp in state.terms.values()))


def normalize(state: QuantumState) -> QuantumState:
    nrm = norm(state)
    if nrm == 0.0:
        raise ZeroNorm("cannot normalize the zero state")
    return state * (1.0 / nrm)


def prune(state: QuantumState, threshold: float | None = None) -> tuple[QuantumState, float]:
    """Drop terms with ``|amplitude| < threshold``.

    Returns the pruned state and the probability mass (sum of squared
    moduli) that was discarded. Retained amplitudes are untouched.
    """
    threshold = state.prune_threshold if threshold is None else threshold
    kept: dict[Occupation, complex] = {}
    dropped = []
    for occ, amp in state.terms.items():
        if abs(amp) < threshold:
            dropped.append(abs(amp) ** 2)
        else:
            kept[occ] = amp
    return state._derive(kept), math.fsum(dropped)


def project(state: QuantumState, keep: Callable[[dict[str, int]], bool]) -> QuantumState:
    """Keep only terms whose ``{mode: count}`` description satisfies ``keep``."""
    names = state.modes.names
    out = {occ: amp for occ, amp in state.terms.items() if keep(dict(zip(names, occ)))}
    return state._derive(out)


def set_occupation(state: QuantumState, mode: str, value: int) -> QuantumState:
    """Overwrite ``mode``'s occupation in every term (used after projecting on it)."""
    k = state.modes.index(mode)
    out: dict[Occupation, complex] = {}
    for occ, amp in state.terms.items():
        new = occ[:k] + (value,) + occ[k + 1 :]
        out[new] = out.get(new, 0j) + amp
    return state._derive(out)


def align_global_phase(state: QuantumState, reference: QuantumState) -> QuantumState:
    """Rotate ``state`` by a global phase to match ``reference``.

    The reference's largest-magnitude amplitude (first in basis order on ties)
    fixes the phase; the state's amplitude on that basis element is rotated
    onto it.
    """
    _check_compatible(state, reference)
    items = reference.items()
    if not items:
        return state
    top = max(abs(amp) for _, amp in items)
    anchor, ref_amp = next((occ, amp) for occ, amp in items if abs(amp) >= top * (1 - 1e-12))
    own = state.terms.get(anchor, 0j)
    if own == 0:
        return state
    return state * cmath.exp(1j * (cmath.phase(ref_amp) - cmath.phase(own)))


def distance(a: QuantumState, b: QuantumState) -> float:
    """Euclidean distance between amplitude vectors."""
    return norm(a - b)


def max_amplitude_error(a: QuantumState, b: QuantumState) -> float:
    _check_compatible(a, b)
    keys = set(a.terms) | set(b.terms)
    return max((abs(a.terms.get(k, 0j) - b.terms.get(k, 0j)) for k in keys), default=0.0)
