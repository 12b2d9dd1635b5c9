"""Noise ordering, paradox checks and an independent expansion oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .errors import PhysicsGateError, ZeroNorm
from .fock import (
    QuantumState,
    normalize,
    norm,
    project,
    set_occupation,
)
from .pipeline import (
    DEFAULT_TOL,
    PUMP,
    LaserConfig,
    build_initial_state,
    hardy_cutoffs,
    hardy_modes,
    run_crystal,
    run_full,
    run_input_splitters,
)

ARMS = ("u_S", "v_S", "u_I", "v_I")
LINES = ("vacuum", "pump_depletion", "single", "pair", "triple", "two_pair")


@dataclass(frozen=True)
class NoiseReport:
    pair_amp: float
    triple_amp: float
    two_pair_amp: float
    ratio_triple: float
    ratio_two_pair: float


@dataclass(frozen=True)
class ParadoxReport:
    amp_uu: float
    amp_dSvI: float
    amp_vSdI: float
    p_dd: float
    verdict: bool


def post_crystal_state(cfg: LaserConfig, q: complex) -> QuantumState:
    return run_crystal(run_input_splitters(build_initial_state(cfg)), q)


def arm_photons(occ: dict[str, int]) -> int:
    return sum(occ[m] for m in ARMS)


def noise_ratios(cfg: LaserConfig, q: complex) -> NoiseReport:
    """Largest amplitudes of the pair, three-photon and two-pair sectors.

    Read off the empty-pump level of the crystal output, where the pump
    series has been factored away; ratios are relative to the pair sector.
    """
    state = post_crystal_state(cfg, q)
    level0 = project(state, lambda occ: occ[PUMP] == 0)

    def sector_max(photons: int) -> float:
        sector = project(level0, lambda occ: arm_photons(occ) == photons)
        return max((abs(a) for a in sector.terms.values()), default=0.0)

    pair, triple, two_pair = sector_max(2), sector_max(3), sector_max(4)
    if pair == 0:
        return NoiseReport(pair, triple, two_pair, math.inf, math.inf)
    return NoiseReport(pair, triple, two_pair, triple / pair, two_pair / pair)


def conditional_state(state: QuantumState, detected_mode: str) -> QuantumState:
    """Partner state after a single click in ``detected_mode``.

    Projects onto one photon in that mode, removes it and renormalizes.
    """
    selected = project(state, lambda occ: occ[detected_mode] == 1)
    if norm(selected) == 0:
        raise ZeroNorm(f"a click in {detected_mode!r} has zero probability")
    return normalize(set_occupation(selected, detected_mode, 0))


def verify_hardy_paradox(cfg: LaserConfig, q: complex, tol: float = DEFAULT_TOL) -> ParadoxReport:
    report = run_full(cfg, q, tol=tol)
    signal_side = report.stage("final_signal")
    idler_side = report.stage("final_idler")
    amp_dsvi = abs(signal_side.amplitude({"d_S": 1, "v_I": 1}))
    amp_vsdi = abs(idler_side.amplitude({"v_S": 1, "d_I": 1}))
    p_dd = report.detection_table[("d_S", "d_I")]
    verdict = report.uu_amplitude < 1e-9 and amp_dsvi < 1e-9 and amp_vsdi < 1e-9 and p_dd > 0
    return ParadoxReport(report.uu_amplitude, amp_dsvi, amp_vsdi, p_dd, bool(verdict))


# --- expansion oracle ----------------------------------------------------------

_A, _B, _G, _Q, _QC = sp.symbols("alpha beta gamma q q_conj")
_ORACLE_KEY = ("u_S", "v_S", "u_I", "v_I", PUMP)


def _laser_after_splitter(amp: sp.Symbol) -> dict[tuple[int, int], sp.Expr]:
    # (|0> + amp|1>) with |1> -> (|v> + i|u>)/sqrt(2); keys are (u, v)
    return {(0, 0): sp.Integer(1), (0, 1): amp / sp.sqrt(2), (1, 0): sp.I * amp / sp.sqrt(2)}


@lru_cache(maxsize=8)
def symbolic_expansion(pump_n_max: int) -> dict[str, dict[tuple[int, ...], sp.Expr]]:
    """Unnormalized crystal output as polynomials in alpha, beta, gamma, q, q*.

    Keys are occupations of ``(u_S, v_S, u_I, v_I, F)``; terms are grouped by
    their line of origin (see ``LINES``). Built by expanding the product of
    the split laser states and the pump series and applying the three terms
    of the first-order crystal operator with explicit ladder factors.
    """
    laser_s = _laser_after_splitter(_A)
    laser_i = _laser_after_splitter(_B)
    pump = {n: _G**n / sp.sqrt(sp.factorial(n)) for n in range(pump_n_max + 1)}
    lines: dict[str, dict[tuple[int, ...], sp.Expr]] = {name: {} for name in LINES}

    def add(line: str, key: tuple[int, ...], value: sp.Expr) -> None:
        bucket = lines[line]
        bucket[key] = bucket.get(key, 0) + value

    for (us, vs), cs in laser_s.items():
        for (ui, vi), ci in laser_i.items():
            for n, cp in pump.items():
                coeff = cs * ci * cp
                photons = us + vs + ui + vi
                add(("vacuum", "single", "pair")[photons], (us, vs, ui, vi, n), coeff)
                if n >= 1:
                    created = photons + 2
                    line = {2: "pair", 3: "triple", 4: "two_pair"}[created]
                    factor = _Q * sp.sqrt(n) * sp.sqrt(us + 1) * sp.sqrt(ui + 1)
                    add(line, (us + 1, vs, ui + 1, vi, n - 1), factor * coeff)
                if us >= 1 and ui >= 1:
                    factor = -_QC * sp.sqrt(us) * sp.sqrt(ui) * sp.sqrt(n + 1)
                    add("pump_depletion", (us - 1, vs, ui - 1, vi, n + 1), factor * coeff)
    return {line: {k: sp.expand(v) for k, v in terms.items()} for line, terms in lines.items()}


@lru_cache(maxsize=8)
def _compiled_oracle(pump_n_max: int):
    expansion = symbolic_expansion(pump_n_max)
    index = [(line, key) for line in LINES for key in sorted(expansion[line])]
    exprs = [expansion[line][key] for line, key in index]
    fn = sp.lambdify((_A, _B, _G, _Q, _QC), exprs, modules="numpy")
    return index, fn


@dataclass(frozen=True)
class OracleExpansion:
    """Normalized crystal output from the oracle, per line and summed."""

    lines: dict[str, dict[tuple[int, ...], complex]]
    normalization: float

    def total(self) -> dict[tuple[int, ...], complex]:
        out: dict[tuple[int, ...], complex] = {}
        for terms in self.lines.values():
            for key, value in terms.items():
                out[key] = out.get(key, 0j) + value
        return out

    def as_state(self, cfg: LaserConfig) -> QuantumState:
        """Embed into the simulator's 11-mode layout."""
        modes = hardy_modes()
        terms = {modes.basis(dict(zip(_ORACLE_KEY, key))): amp for key, amp in self.total().items()}
        return QuantumState(modes, terms, tuple(hardy_cutoffs(cfg).values()))


def oracle_expand_symbolic(cfg: LaserConfig, q: complex) -> OracleExpansion:
    """Evaluate the symbolic crystal output at ``(cfg, q)``.

    The normalization uses the closed form
    ``N^-2 = (1 + |alpha|^2)(1 + |beta|^2) sum_n |gamma|^(2n) / n!``.
    """
    index, fn = _compiled_oracle(cfg.pump_n_max)
    q = complex(q)
    values = fn(cfg.alpha, cfg.beta, cfg.gamma, q, q.conjugate())
    series = math.fsum(abs(cfg.gamma) ** (2 * n) / math.factorial(n) for n in range(cfg.pump_n_max + 1))
    nrm = 1 / math.sqrt((1 + abs(cfg.alpha) ** 2) * (1 + abs(cfg.beta) ** 2) * series)
    lines: dict[str, dict[tuple[int, ...], complex]] = {name: {} for name in LINES}
    for (line, key), value in zip(index, values):
        lines[line][key] = complex(value) * nrm
    return OracleExpansion(lines, nrm)


def fit_loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    slope, _ = np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float)), 1)
    return float(slope)


@dataclass(frozen=True)
class ScanPoint:
    alpha: float
    beta: float
    gamma: complex
    q: complex
    ratio_triple: float
    ratio_two_pair: float
    p_dd: float | None


def scan_alpha(alphas, q: complex, *, satisfy_condition5: bool = True, gamma: complex = 0.05) -> list[ScanPoint]:
    """Noise ratios and ``P(d_S d_I)`` along a grid of ``alpha = beta``.

    With ``satisfy_condition5`` the pump amplitude follows ``alpha^2 / (2 q)``;
    otherwise it stays at ``gamma`` and ``p_dd`` is ``None`` wherever the
    cancellation gate rejects the run.
    """
    points = []
    for alpha in alphas:
        if satisfy_condition5:
            cfg = LaserConfig.satisfying_condition5(alpha, q)
        else:
            cfg = LaserConfig(alpha=alpha, beta=alpha, gamma=gamma)
        noise = noise_ratios(cfg, q)
        try:
            p_dd = run_full(cfg, q).detection_table[("d_S", "d_I")]
        except PhysicsGateError:
            p_dd = None
        points.append(
            ScanPoint(float(alpha), float(alpha), cfg.gamma, complex(q), noise.ratio_triple, noise.ratio_two_pair, p_dd)
        )
    return points

