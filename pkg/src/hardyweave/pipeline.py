"""End-to-end simulation of the three-laser Hardy experiment.

Stages: product of the truncated laser states, input splitters, the crystal,
post-selection onto one signal-band and one idler-band photon, extraction of
the Hardy state (where the laser pair and the down-converted pair in
``u_S u_I`` cancel), and the detector splitters.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Literal

from .errors import (
    CancellationFailed,
    ConfigError,
    EmptySelection,
    FactorizationError,
    HardyweaveError,
    UnnormalizedInput,
)
from .fock import (
    CANONICAL_MODES,
    DEFAULT_CUTOFF,
    ModeSet,
    QuantumState,
    coherent_term_expansion,
    inner_product,
    norm,
    normalize,
    project,
    reorder_modes,
    set_occupation,
    tensor,
    vacuum,
)
from .optics import (
    BeamSplitterSpec,
    DownConversionSpec,
    apply_beam_splitter,
    apply_down_conversion,
    bs_matrix_final,
    bs_matrix_input,
)

PUMP = "F"
SIGNAL_BAND = ("u_S", "v_S")
IDLER_BAND = ("u_I", "v_I")
SIGNAL_PORTS = ("c_S", "d_S")
IDLER_PORTS = ("c_I", "d_I")

DEFAULT_ALPHA = 1e-2
DEFAULT_BETA = 1e-2
DEFAULT_GAMMA = 0.05
DEFAULT_Q = 1e-3
DEFAULT_PUMP_N_MAX = 3
DEFAULT_TOL = 1e-9
MAX_LASER_AMPLITUDE = 0.3

INPUT_SPLITTERS = (
    BeamSplitterSpec(("S_in", None), ("v_S", "u_S"), bs_matrix_input()),
    BeamSplitterSpec(("I_in", None), ("v_I", "u_I"), bs_matrix_input()),
)
FINAL_SPLITTERS = {
    "S": BeamSplitterSpec(("u_S", "v_S"), ("c_S", "d_S"), bs_matrix_final()),
    "I": BeamSplitterSpec(("u_I", "v_I"), ("c_I", "d_I"), bs_matrix_final()),
}

Side = Literal["S", "I", "both"]


@dataclass(frozen=True)
class LaserConfig:
    """Amplitudes of the signal-wavelength, idler-wavelength and pump lasers."""

    alpha: complex = DEFAULT_ALPHA
    beta: complex = DEFAULT_BETA
    gamma: complex = DEFAULT_GAMMA
    pump_n_max: int = DEFAULT_PUMP_N_MAX

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise ConfigError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if abs(abs(self.alpha) - abs(self.beta)) > 1e-9:
            raise ConfigError(f"|alpha| and |beta| must be equal, got {abs(self.alpha):g} and {abs(self.beta):g}")
        if abs(self.alpha) > MAX_LASER_AMPLITUDE:
            raise ConfigError(
                f"|alpha| = {abs(self.alpha):g} is too large for the two-term truncation (max {MAX_LASER_AMPLITUDE})"
            )
        if self.pump_n_max < 0:
            raise ConfigError("pump_n_max must be non-negative")

    @classmethod
    def satisfying_condition5(cls, alpha: complex, q: complex, beta: complex | None = None, **kw) -> LaserConfig:
        """Configuration with ``gamma = alpha * beta / (2 q)``."""
        beta = alpha if beta is None else beta
        if q == 0:
            raise ConfigError("condition (alpha beta = 2 q gamma) cannot be met with q = 0")
        return cls(alpha=alpha, beta=beta, gamma=complex(alpha) * complex(beta) / (2 * complex(q)), **kw)


@dataclass
class PipelineReport:
    stage_states: list[tuple[str, QuantumState]]
    condition5_residual: float
    cancellation_residual: float
    detection_table: dict[tuple[str, str], float]
    uu_amplitude: float = 0.0
    factorization_residual: float = 0.0
    pump_truncation_leakage: float = 0.0

    def stage(self, name: str) -> QuantumState:
        for stage_name, state in self.stage_states:
            if stage_name == name:
                return state
        raise KeyError(name)


def hardy_modes() -> ModeSet:
    return ModeSet(CANONICAL_MODES)


def hardy_cutoffs(cfg: LaserConfig, cutoff: int = DEFAULT_CUTOFF) -> dict[str, int]:
    # the pump needs one level of headroom above its series for the reverse process
    return {name: (max(cutoff, cfg.pump_n_max + 1) if name == PUMP else cutoff) for name in CANONICAL_MODES}


def build_initial_state(cfg: LaserConfig, cutoff: int = DEFAULT_CUTOFF) -> QuantumState:
    """Normalized product of the two-term laser states and the pump series."""
    cutoffs = hardy_cutoffs(cfg, cutoff)
    laser_s = coherent_term_expansion("S_in", cfg.alpha, 1, cutoff=cutoffs["S_in"])
    laser_i = coherent_term_expansion("I_in", cfg.beta, 1, cutoff=cutoffs["I_in"])
    pump = coherent_term_expansion(PUMP, cfg.gamma, cfg.pump_n_max, cutoff=cutoffs[PUMP])
    rest = [m for m in CANONICAL_MODES if m not in ("S_in", "I_in", PUMP)]
    product_state = tensor(tensor(tensor(laser_s, laser_i), pump), vacuum(rest, {m: cutoffs[m] for m in rest}))
    return normalize(reorder_modes(product_state, CANONICAL_MODES))


def run_input_splitters(state: QuantumState) -> QuantumState:
    for spec in INPUT_SPLITTERS:
        state = apply_beam_splitter(state, spec)
    return state


def crystal_spec(q: complex, expansion_order: Literal[1, "exact"] = 1) -> DownConversionSpec:
    # pinhole selection: pairs are emitted straight into the u arms
    return DownConversionSpec(PUMP, "u_S", "u_I", q, expansion_order)


def run_crystal(state: QuantumState, q: complex, expansion_order: Literal[1, "exact"] = 1) -> QuantumState:
    return apply_down_conversion(state, crystal_spec(q, expansion_order))


def condition5_residual(alpha: complex, beta: complex, gamma: complex, q: complex) -> float:
    """Relative residual ``|alpha beta - 2 q gamma| / |alpha beta|``."""
    ab = complex(alpha) * complex(beta)
    dc = 2 * complex(q) * complex(gamma)
    if ab == 0:
        return 0.0 if dc == 0 else math.inf
    return abs(ab - dc) / abs(ab)


def check_condition5(cfg: LaserConfig, q: complex) -> float:
    return condition5_residual(cfg.alpha, cfg.beta, cfg.gamma, q)


def post_select_single_pair(
    state: QuantumState,
    signal_modes: Sequence[str] = SIGNAL_BAND,
    idler_modes: Sequence[str] = IDLER_BAND,
    pump: str | Iterable[str] = PUMP,
) -> QuantumState:
    """Keep terms with one photon in the signal band, one in the idler band, none elsewhere.

    Pump occupation is left free. The selection is by occupation only, so the
    laser pair and the down-converted pair in ``u_S u_I`` land in the same
    sector and interfere. The result is not renormalized.
    """
    pumps = {pump} if isinstance(pump, str) else set(pump)
    signal, idler = set(signal_modes), set(idler_modes)
    others = [m for m in state.modes if m not in signal | idler | pumps]

    def keep(occ: dict[str, int]) -> bool:
        return (
            sum(occ[m] for m in signal) == 1
            and sum(occ[m] for m in idler) == 1
            and all(occ[m] == 0 for m in others)
        )

    selected = project(state, keep)
    if selected.is_zero():
        raise EmptySelection("no amplitude in the one-signal/one-idler sector")
    return selected


def factor_pump(state: QuantumState, pump: str = PUMP) -> tuple[QuantumState, float, float]:
    """Factor the pump series out of a post-selected state.

    Writes the state as ``sum_n |chi_n> |n_pump>`` and keeps ``|chi_0> |0_pump>``.
    Every level except the top one must be proportional to ``chi_0``; the top
    level lacks its down-converted partner because the series is truncated.

    Returns:
        ``(chi_0 tagged with an empty pump, worst relative deviation from
        proportionality, norm of the top level's deviation relative to its
        own norm)``.
    """
    k = state.modes.index(pump)
    levels = sorted({occ[k] for occ in state.terms})
    sectors = {n: project(state, lambda occ, n=n: occ[pump] == n) for n in levels}
    chi0 = sectors.get(0)
    if chi0 is None or chi0.is_zero():
        raise EmptySelection("post-selected state has no amplitude with an empty pump")
    chi0 = set_occupation(chi0, pump, 0)
    ref = inner_product(chi0, chi0)

    def deviation(n: int) -> float:
        chi = set_occupation(sectors[n], pump, 0)
        size = norm(chi)
        if size == 0:
            return 0.0
        fitted = chi0 * (inner_product(chi0, chi) / ref)
        return norm(chi - fitted) / size

    top = levels[-1]
    worst = max((deviation(n) for n in levels if 0 < n < top), default=0.0)
    leakage = deviation(top) if top > 0 else 0.0
    return chi0, worst, leakage


def hardy_state(
    state: QuantumState,
    cfg: LaserConfig | None = None,
    *,
    pump: str = PUMP,
    interfering: tuple[str, str] = ("u_S", "u_I"),
    tol: float = DEFAULT_TOL,
) -> QuantumState:
    """Normalized three-term Hardy state from the post-selected crystal output.

    Raises:
        CancellationFailed: the ``u_S u_I`` amplitude exceeds ``tol`` relative
            to the other terms (``alpha beta != 2 q gamma`` or a phase error).
        FactorizationError: the pump series does not factor out.
    """
    return _hardy_state_details(state, pump=pump, interfering=interfering, tol=tol)[0]


def _hardy_state_details(state, *, pump=PUMP, interfering=("u_S", "u_I"), tol=DEFAULT_TOL):
    chi0, worst, leakage = factor_pump(state, pump)
    if worst > 1e-9:
        raise FactorizationError(f"pump series does not factor out (relative deviation {worst:.3e})")
    uu = chi0.modes.basis({interfering[0]: 1, interfering[1]: 1})
    amp_uu = chi0.terms.get(uu, 0j)
    rest = chi0._derive({occ: a for occ, a in chi0.terms.items() if occ != uu})
    rest_norm = norm(rest)
    residual = abs(amp_uu) / rest_norm if rest_norm else math.inf
    if residual > tol:
        raise CancellationFailed(
            f"|{interfering[0]} {interfering[1]}> amplitude {residual:.3e} (relative) survives post-selection",
            residual,
        )
    total = math.hypot(rest_norm, abs(amp_uu))
    return normalize(rest), residual, abs(amp_uu) / total, worst, leakage


def run_final_bs(state: QuantumState, side: Side = "both") -> QuantumState:
    if side not in ("S", "I", "both"):
        raise ValueError(f"side must be 'S', 'I' or 'both', got {side!r}")
    for key in ("S", "I"):
        if side in (key, "both"):
            state = apply_beam_splitter(state, FINAL_SPLITTERS[key])
    return state


def detection_probabilities(
    state: QuantumState,
    signal_ports: Sequence[str] = SIGNAL_PORTS,
    idler_ports: Sequence[str] = IDLER_PORTS,
) -> dict[tuple[str, str], float]:
    """Joint probabilities of one click on each side, keyed ``(signal port, idler port)``."""
    nrm = norm(state)
    if abs(nrm - 1) > 1e-6:
        raise UnnormalizedInput(f"state norm {nrm:.9g} is not 1")
    table = {}
    for ps in signal_ports:
        for pi in idler_ports:
            table[(ps, pi)] = abs(state.amplitude({ps: 1, pi: 1})) ** 2
    return table


def _stage(name: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except HardyweaveError as err:
        err.stage = name
        raise


def run_full(
    cfg: LaserConfig,
    q: complex,
    *,
    tol: float = DEFAULT_TOL,
    cutoff: int = DEFAULT_CUTOFF,
    expansion_order: Literal[1, "exact"] = 1,
) -> PipelineReport:
    """Run every stage and collect the intermediate states.

    Stage names: ``initial``, ``input_splitters``, ``crystal``,
    ``post_selection``, ``hardy`` (the three-term state), ``final_signal``,
    ``final_idler`` (one-sided transforms) and ``final``.

    Raises the first failing stage's error with ``err.stage`` set.
    """
    q = complex(q)
    stages: list[tuple[str, QuantumState]] = []
    residual5 = check_condition5(cfg, q)

    state = _stage("initial", build_initial_state, cfg, cutoff)
    stages.append(("initial", state))
    state = _stage("input_splitters", run_input_splitters, state)
    stages.append(("input_splitters", state))
    state = _stage("crystal", run_crystal, state, q, expansion_order)
    stages.append(("crystal", state))
    if q * cfg.gamma == 0:
        err = EmptySelection("no down-converted pairs (q * gamma = 0): the interference branch is empty")
        err.stage = "post_selection"
        raise err
    state = _stage("post_selection", post_select_single_pair, state)
    stages.append(("post_selection", state))
    phi, cancel, uu_amp, worst, leakage = _stage("hardy", _hardy_state_details, state, tol=tol)
    stages.append(("hardy", phi))
    stages.append(("final_signal", _stage("final_signal", run_final_bs, phi, "S")))
    stages.append(("final_idler", _stage("final_idler", run_final_bs, phi, "I")))
    final = _stage("final", run_final_bs, phi, "both")
    stages.append(("final", final))
    table = _stage("detection", detection_probabilities, final)
    return PipelineReport(
        stage_states=stages,
        condition5_residual=residual5,
        cancellation_residual=cancel,
        detection_table=table,
        uu_amplitude=uu_amp,
        factorization_residual=worst,
        pump_truncation_leakage=leakage,
    )
