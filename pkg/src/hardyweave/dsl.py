"""A line-oriented language for optical circuits (``.circ`` files).

Grammar, one statement per line, ``#`` starts a comment::

    mode <name>
    laser <out> amp=<complex> [nmax=<int>]
    bs <in1> [<in2>] -> <out1> <out2> [matrix=input|final]
    mirror <in> -> <out> [phase=<complex>]
    crystal <pump> -> <signal> <idler> q=<complex> [order=1|exact]
    pinhole <in> -> <out>
    detector <in>
    constraint condition5 [tol=<real>]

Complex literals look like ``0.5``, ``-2i``, ``1e-3+0.5i``. Modes must be
declared with ``mode`` before use; elements must be listed in dataflow order.
A pinhole or mirror whose input and output coincide acts in place. A crystal
may emit into modes that another element already produced; that is how the
down-converted photons are made to share the laser beams' modes.

:func:`format_circuit` prints a canonical form: modes first, then elements,
then constraints, with every defaulted parameter spelled out. Comments and
blank lines are not preserved.
"""

from __future__ import annotations

import math
import re
from collections.abc import Callable
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import (
    ArityMismatch,
    BadNumberLiteral,
    CancellationFailed,
    DuplicateDeclaration,
    DuplicateProducer,
    EmptySelection,
    FactorizationError,
    MissingParam,
    OutOfOrder,
    UndeclaredMode,
    UnknownKeyword,
    UnsupportedParam,
)
from .fock import DEFAULT_CUTOFF, ModeSet, QuantumState, normalize, project, vacuum
from .optics import (
    BeamSplitterSpec,
    DownConversionSpec,
    MirrorSpec,
    apply_beam_splitter,
    apply_down_conversion,
    bs_matrix_final,
    bs_matrix_input,
    transfer_mode,
)
from .pipeline import DEFAULT_PUMP_N_MAX, DEFAULT_TOL, condition5_residual, factor_pump

ELEMENT_KINDS = ("laser", "beamsplitter", "mirror", "crystal", "pinhole", "detector")
_KEYWORDS = {"bs": "beamsplitter", "laser": "laser", "mirror": "mirror", "crystal": "crystal",
             "pinhole": "pinhole", "detector": "detector"}
_SURFACE = {kind: word for word, kind in _KEYWORDS.items()}
_MODE_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX = re.compile(rf"(?P<re>[+-]?{_NUM})?(?P<im>[+-]?(?:{_NUM})?i)?\Z")
_REAL = re.compile(rf"[+-]?{_NUM}\Z")
_INT = re.compile(r"\d+\Z")

# kind -> (allowed input counts, allowed output counts, uses "->")
_ARITY = {
    "laser": ((0,), (1,), False),
    "beamsplitter": ((1, 2), (2,), True),
    "mirror": ((1,), (1,), True),
    "crystal": ((1,), (2,), True),
    "pinhole": ((1,), (1,), True),
    "detector": ((1,), (0,), False),
}
_PARAM_ORDER = {
    "laser": ("amp", "nmax"),
    "beamsplitter": ("matrix",),
    "mirror": ("phase",),
    "crystal": ("q", "order"),
    "pinhole": (),
    "detector": (),
}
_CONSTRAINTS = {"condition5": ("tol",)}


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int

    def __post_init__(self):
        if self.line < 1 or self.column < 1 or self.length < 1:
            raise ValueError(f"invalid span {self}")


@dataclass(frozen=True)
class ElementSpec:
    kind: str
    params: dict
    input_modes: tuple[str, ...]
    output_modes: tuple[str, ...]
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Constraint:
    name: str
    params: dict
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Circuit:
    modes: tuple[str, ...] = ()
    elements: tuple[ElementSpec, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    def count(self, kind: str) -> int:
        return sum(1 for e in self.elements if e.kind == kind)


@dataclass(frozen=True)
class _Token:
    text: str
    span: SourceSpan


# --- literals ------------------------------------------------------------------


def parse_complex(text: str) -> complex:
    m = _COMPLEX.match(text)
    if not text or m is None:
        raise ValueError(f"bad complex literal {text!r}")
    real = float(m["re"]) if m["re"] else 0.0
    imag = 0.0
    if m["re"] and m["im"] == "i":
        # the real group swallowed the digits of a pure imaginary, e.g. "0.25i"
        real, imag = 0.0, real
    elif m["im"]:
        body = m["im"][:-1]
        imag = {"": 1.0, "+": 1.0, "-": -1.0}.get(body)
        if imag is None:
            imag = float(body)
    value = complex(real, imag)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ValueError(f"non-finite literal {text!r}")
    return value


def format_complex(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return repr(z.real)
    if z.real == 0:
        return f"{z.imag!r}i"
    sign = "-" if z.imag < 0 else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def _value_span(tok: _Token, key: str) -> SourceSpan:
    if len(tok.text) <= len(key) + 1:
        return tok.span  # empty value: blame the whole token
    start = tok.span.column + len(key) + 1
    return SourceSpan(tok.span.line, start, max(1, len(tok.text) - len(key) - 1))


def _parse_param(kind: str, key: str, raw: str, tok: _Token):
    span = _value_span(tok, key)
    try:
        if key in ("amp", "phase", "q"):
            return parse_complex(raw)
        if key == "tol":
            if not _REAL.match(raw):
                raise ValueError
            value = float(raw)
            if not math.isfinite(value) or value < 0:
                raise ValueError
            return value
        if key == "nmax":
            if not _INT.match(raw):
                raise ValueError
            return int(raw)
    except ValueError:
        raise BadNumberLiteral(f"bad value {raw!r} for {key}=", span) from None
    if key == "matrix":
        if raw not in ("input", "final"):
            raise UnknownKeyword(f"matrix must be 'input' or 'final', got {raw!r}", span)
        return raw
    if key == "order":
        if raw == "1":
            return 1
        if raw == "exact":
            return "exact"
        raise UnknownKeyword(f"order must be 1 or 'exact', got {raw!r}", span)
    raise AssertionError(key)


# --- parser ----------------------------------------------------------------------


class _Parser:
    def __init__(self):
        self.modes: list[str] = []
        self.elements: list[ElementSpec] = []
        self.constraints: list[Constraint] = []
        self.producers: dict[str, int] = {}
        self.consumed: set[str] = set()

    def feed(self, lineno: int, raw: str) -> None:
        text = raw.split("#", 1)[0]
        tokens = [
            _Token(m.group(), SourceSpan(lineno, m.start() + 1, len(m.group())))
            for m in re.finditer(r"\S+", text)
        ]
        if not tokens:
            return
        head, rest = tokens[0], tokens[1:]
        if head.text == "mode":
            self._mode(head, rest)
        elif head.text == "constraint":
            self._constraint(head, rest)
        elif head.text in _KEYWORDS:
            self._element(_KEYWORDS[head.text], head, rest)
        else:
            raise UnknownKeyword(f"unknown keyword {head.text!r}", head.span)

    def _mode(self, head: _Token, rest: list[_Token]) -> None:
        if len(rest) != 1:
            raise ArityMismatch("'mode' takes exactly one name", head.span)
        tok = rest[0]
        if not _MODE_NAME.match(tok.text):
            raise UnknownKeyword(f"invalid mode name {tok.text!r}", tok.span)
        if tok.text in self.modes:
            raise DuplicateDeclaration(f"mode {tok.text!r} declared twice", tok.span)
        self.modes.append(tok.text)

    def _params(self, kind: str, allowed: tuple[str, ...], tokens: list[_Token]) -> dict:
        params: dict = {}
        for tok in tokens:
            key, _, raw = tok.text.partition("=")
            if key not in allowed:
                raise UnknownKeyword(f"unknown parameter {key!r} for {kind}", tok.span)
            if key in params:
                raise DuplicateDeclaration(f"parameter {key!r} given twice", tok.span)
            params[key] = _parse_param(kind, key, raw, tok)
        return params

    def _constraint(self, head: _Token, rest: list[_Token]) -> None:
        positional = [t for t in rest if "=" not in t.text]
        if len(positional) != 1:
            raise ArityMismatch("'constraint' takes exactly one constraint name", head.span)
        name = positional[0]
        if name.text not in _CONSTRAINTS:
            raise UnknownKeyword(f"unknown constraint {name.text!r}", name.span)
        params = self._params(name.text, _CONSTRAINTS[name.text], [t for t in rest if "=" in t.text])
        params.setdefault("tol", DEFAULT_TOL)
        self.constraints.append(Constraint(name.text, params, head.span))

    def _mode_ref(self, tok: _Token) -> str:
        if tok.text not in self.modes:
            raise UndeclaredMode(f"mode {tok.text!r} used before its 'mode' declaration", tok.span)
        return tok.text

    def _element(self, kind: str, head: _Token, rest: list[_Token]) -> None:
        n_in, n_out, arrow = _ARITY[kind]
        params_tok = [t for t in rest if "=" in t.text]
        ports = [t for t in rest if "=" not in t.text]
        arrows = [i for i, t in enumerate(ports) if t.text == "->"]
        word = _SURFACE[kind]
        if arrow:
            if len(arrows) != 1:
                raise ArityMismatch(f"'{word}' needs exactly one '->'", head.span)
            ins, outs = ports[: arrows[0]], ports[arrows[0] + 1 :]
        else:
            if arrows:
                raise ArityMismatch(f"'{word}' takes no '->'", ports[arrows[0]].span)
            ins, outs = (ports, []) if kind == "detector" else ([], ports)
        if len(ins) not in n_in or len(outs) not in n_out:
            raise ArityMismatch(
                f"'{word}' expects {'/'.join(map(str, n_in))} input(s) and "
                f"{'/'.join(map(str, n_out))} output(s), got {len(ins)} and {len(outs)}",
                head.span,
            )
        in_modes = tuple(self._mode_ref(t) for t in ins)
        out_modes = tuple(self._mode_ref(t) for t in outs)
        for group, toks in ((in_modes, ins), (out_modes, outs)):
            if len(set(group)) != len(group):
                raise ArityMismatch(f"'{word}' lists the same mode twice", toks[-1].span)
        if kind == "crystal" and in_modes[0] in out_modes:
            raise ArityMismatch("crystal pump cannot also be an output", ins[0].span)

        params = self._params(kind, _PARAM_ORDER[kind], params_tok)
        if kind == "laser" and "amp" not in params:
            raise MissingParam("laser needs amp=<complex>", head.span)
        if kind == "crystal" and "q" not in params:
            raise MissingParam("crystal needs q=<complex>", head.span)
        if kind == "beamsplitter":
            params.setdefault("matrix", "input" if len(in_modes) == 1 else "final")
        if kind == "mirror":
            params.setdefault("phase", 1 + 0j)
        if kind == "crystal":
            params.setdefault("order", 1)

        index = len(self.elements)
        for mode, tok in zip(out_modes, outs):
            if mode in in_modes:
                continue  # in place
            if kind == "crystal" and mode in self.producers:
                continue  # emission into an existing beam
            if mode in self.producers:
                raise DuplicateProducer(f"mode {mode!r} already produced by an earlier element", tok.span)
            if mode in self.consumed:
                raise OutOfOrder(f"mode {mode!r} is produced after an element already consumed it", tok.span)
            self.producers[mode] = index
        consumed = in_modes[:1] if kind == "crystal" else tuple(m for m in in_modes if m not in out_modes)
        self.consumed.update(consumed)
        self.elements.append(ElementSpec(kind, params, in_modes, out_modes, head.span))


def parse_circuit(text: str) -> Circuit:
    """Parse and validate ``.circ`` source.

    Raises:
        ParseError: one of its subclasses, carrying the offending span.
    """
    parser = _Parser()
    for lineno, line in enumerate(text.splitlines(), start=1):
        parser.feed(lineno, line)
    return Circuit(tuple(parser.modes), tuple(parser.elements), tuple(parser.constraints))


def parse_file(path: str | Path) -> Circuit:
    return parse_circuit(Path(path).read_text(encoding="utf-8"))


def bundled_circuit_text(name: str = "hardy.circ") -> str:
    return resources.files("hardyweave").joinpath("circuits", name).read_text(encoding="utf-8")


def bundled_circuit_path(name: str = "hardy.circ") -> Path:
    return Path(str(resources.files("hardyweave").joinpath("circuits", name)))


def _format_value(value) -> str:
    if isinstance(value, complex):
        return format_complex(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_circuit(c: Circuit) -> str:
    lines = [f"mode {m}" for m in c.modes]
    for e in c.elements:
        word = _SURFACE[e.kind]
        params = [f"{k}={_format_value(e.params[k])}" for k in _PARAM_ORDER[e.kind] if k in e.params]
        if e.kind == "laser":
            ports = list(e.output_modes)
        elif e.kind == "detector":
            ports = list(e.input_modes)
        else:
            ports = [*e.input_modes, "->", *e.output_modes]
        lines.append(" ".join([word, *ports, *params]))
    for con in c.constraints:
        params = [f"{k}={_format_value(con.params[k])}" for k in _CONSTRAINTS[con.name] if k in con.params]
        lines.append(" ".join(["constraint", con.name, *params]))
    return "\n".join(lines) + ("\n" if lines else "")


# --- compilation -----------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    label: str
    kind: str
    reads: tuple[str, ...]
    writes: tuple[str, ...]
    apply: Callable[[QuantumState], QuantumState] = field(compare=False, repr=False)


@dataclass(frozen=True)
class Condition5Gate:
    alpha: complex
    beta: complex
    gamma: complex
    q: complex
    tol: float


@dataclass(frozen=True)
class CompiledCircuit:
    circuit: Circuit
    modes: ModeSet | None
    cutoffs: dict[str, int]
    steps: tuple[Step, ...]
    detectors: tuple[str, ...]
    detector_groups: tuple[tuple[str, ...], ...]
    pumps: tuple[str, ...]
    gates: tuple[Condition5Gate, ...]


@dataclass
class CircuitResult:
    stage_states: list[tuple[str, QuantumState]]
    detection_table: dict[str, float]
    condition5_residuals: list[float]
    factorization_residual: float = 0.0


def _inject_laser(state: QuantumState, mode: str, amp: complex, n_max: int) -> QuantumState:
    k = state.modes.index(mode)
    out: dict[tuple[int, ...], complex] = {}
    series = [amp**n / math.sqrt(math.factorial(n)) if n else 1 + 0j for n in range(n_max + 1)]
    for occ, x in state.terms.items():
        for n, c in enumerate(series):
            key = occ[:k] + (occ[k] + n,) + occ[k + 1 :]
            out[key] = out.get(key, 0j) + x * c
    return normalize(QuantumState(state.modes, out, state.cutoffs, state.prune_threshold))


def compile_circuit(c: Circuit, cutoff: int = DEFAULT_CUTOFF) -> CompiledCircuit:
    """Lower a circuit to an ordered list of state transformations.

    Detectors do not collapse the state; they name the modes read out by
    :func:`run_compiled`. Pinholes acting in place compile to no-ops.

    Raises:
        UnsupportedParam: a parameter is outside what the element supports.
    """
    pumps = tuple(dict.fromkeys(e.input_modes[0] for e in c.elements if e.kind == "crystal"))
    lasers = {e.output_modes[0]: e for e in c.elements if e.kind == "laser"}
    cutoffs = {m: cutoff for m in c.modes}
    n_max: dict[str, int] = {}
    for mode, e in lasers.items():
        n = e.params.get("nmax", DEFAULT_PUMP_N_MAX if mode in pumps else 1)
        if n < 0:
            raise UnsupportedParam(f"laser {mode!r}: nmax must be non-negative")
        n_max[mode] = n
        cutoffs[mode] = max(cutoff, n + 1 if mode in pumps else n)

    steps: list[Step] = []
    bands: dict[str, frozenset[str]] = {m: frozenset() for m in c.modes}
    detectors: list[str] = []
    gates: list[Condition5Gate] = []
    wants_gate = [con for con in c.constraints if con.name == "condition5"]

    for e in c.elements:
        where = f"line {e.span.line}: " if e.span else ""
        ins, outs = e.input_modes, e.output_modes
        if e.kind == "laser":
            mode = outs[0]
            amp, n = e.params["amp"], n_max[mode]
            steps.append(Step(f"{where}laser {mode}", "laser", (), (mode,),
                              lambda s, mode=mode, amp=amp, n=n: _inject_laser(s, mode, amp, n)))
            bands[mode] = frozenset({mode})
        elif e.kind == "beamsplitter":
            matrix = bs_matrix_input() if e.params["matrix"] == "input" else bs_matrix_final()
            spec = BeamSplitterSpec((ins[0], ins[1] if len(ins) > 1 else None), outs, matrix)
            steps.append(Step(f"{where}bs {' '.join(ins)} -> {' '.join(outs)}", "beamsplitter", ins, outs,
                              lambda s, spec=spec: apply_beam_splitter(s, spec)))
            merged = frozenset().union(*(bands[m] for m in ins))
            for m in ins:
                bands[m] = frozenset()
            for m in outs:
                bands[m] = merged
        elif e.kind in ("mirror", "pinhole"):
            src, dst = ins[0], outs[0]
            phase = e.params.get("phase", 1 + 0j)
            try:
                MirrorSpec(src, phase)
            except ValueError as err:
                raise UnsupportedParam(f"{where}{err}") from None
            steps.append(Step(f"{where}{e.kind} {src} -> {dst}", e.kind, (src,), (dst,),
                              lambda s, src=src, dst=dst, phase=phase: transfer_mode(s, src, dst, phase)))
            if src != dst:
                bands[dst], bands[src] = bands[src], frozenset()
        elif e.kind == "crystal":
            pump, sig, idl = ins[0], outs[0], outs[1]
            spec = DownConversionSpec(pump, sig, idl, e.params["q"], e.params["order"])
            steps.append(Step(f"{where}crystal {pump} -> {sig} {idl}", "crystal", (pump, sig, idl), (pump, sig, idl),
                              lambda s, spec=spec: apply_down_conversion(s, spec)))
            if wants_gate:
                gates.append(_gate_for(e, bands, lasers, wants_gate[0].params["tol"]))
            bands[sig] = bands[sig] | {f"{pump}>signal"}
            bands[idl] = bands[idl] | {f"{pump}>idler"}
        elif e.kind == "detector":
            detectors.append(ins[0])
            steps.append(Step(f"{where}detector {ins[0]}", "detector", (ins[0],), (), lambda s: s))

    groups: dict[frozenset[str], list[str]] = {}
    for d in detectors:
        groups.setdefault(bands[d], []).append(d)
    return CompiledCircuit(
        circuit=c,
        modes=ModeSet(c.modes) if c.modes else None,
        cutoffs=cutoffs,
        steps=tuple(steps),
        detectors=tuple(detectors),
        detector_groups=tuple(tuple(g) for g in groups.values()),
        pumps=pumps,
        gates=tuple(gates),
    )


def _gate_for(crystal: ElementSpec, bands, lasers, tol: float) -> Condition5Gate:
    pump, sig, idl = crystal.input_modes[0], *crystal.output_modes

    def source(mode: str, role: str) -> complex:
        found = [m for m in bands[mode] if m in lasers]
        if len(found) != 1:
            raise UnsupportedParam(
                f"condition5 needs exactly one laser feeding the {role} mode {mode!r}, found {sorted(found)}"
            )
        return lasers[found[0]].params["amp"]

    if pump not in lasers:
        raise UnsupportedParam(f"condition5 needs a laser on the crystal pump {pump!r}")
    return Condition5Gate(source(sig, "signal"), source(idl, "idler"), lasers[pump].params["amp"],
                          crystal.params["q"], tol)


def detection_label(modes: ModeSet, occ: tuple[int, ...], detectors: tuple[str, ...]) -> str:
    parts = []
    for d in detectors:
        n = occ[modes.index(d)]
        if n:
            parts.append(d if n == 1 else f"{d}^{n}")
    return ",".join(parts) if parts else "none"


def run_compiled(
    compiled: CompiledCircuit,
    hook: Callable[[Step, QuantumState], None] | None = None,
) -> CircuitResult:
    """Execute a compiled circuit and read out its detectors.

    With a crystal and at least two detector groups (detectors fed by
    different beams), the state is post-selected on exactly one click per
    group, the pump series is factored out and the result renormalized.
    Otherwise the table covers the full state.

    Raises:
        CancellationFailed: a ``condition5`` constraint is declared and its
            residual exceeds the tolerance.
        EmptySelection: the coincidence sector is empty.
    """
    residuals = [condition5_residual(g.alpha, g.beta, g.gamma, g.q) for g in compiled.gates]
    for g, r in zip(compiled.gates, residuals):
        if r > g.tol:
            raise CancellationFailed(f"pairing-condition residual |alpha beta - 2 q gamma| / |alpha beta| = {r:.3e} exceeds tol {g.tol:g}", r)
    if compiled.modes is None:
        return CircuitResult([], {}, residuals)

    state = vacuum(compiled.modes, compiled.cutoffs)
    stages: list[tuple[str, QuantumState]] = [("vacuum", state)]
    for step in compiled.steps:
        if hook is not None:
            hook(step, state)
        state = step.apply(state)
        if step.kind != "detector":
            stages.append((step.label, state))

    factor_dev = 0.0
    if compiled.pumps and len(compiled.detector_groups) >= 2:
        groups = compiled.detector_groups
        free = set(compiled.pumps)
        others = [m for m in compiled.modes if m not in free and not any(m in g for g in groups)]
        selected = project(
            state,
            lambda occ: all(sum(occ[m] for m in g) == 1 for g in groups) and all(occ[m] == 0 for m in others),
        )
        if selected.is_zero():
            raise EmptySelection("no amplitude with exactly one click per detector group")
        for pump in compiled.pumps:
            selected, dev, _ = factor_pump(selected, pump)
            if dev > 1e-9:
                raise FactorizationError(f"pump series of {pump!r} does not factor out (deviation {dev:.3e})")
            factor_dev = max(factor_dev, dev)
        state = normalize(selected)
        stages.append(("coincidences", state))

    table: dict[tuple[int, ...], float] = {}
    idx = [compiled.modes.index(d) for d in compiled.detectors]
    for occ, amp in state.terms.items():
        key = tuple(occ[i] for i in idx)
        table[key] = table.get(key, 0.0) + abs(amp) ** 2
    ordered = sorted(table, reverse=True)
    labels = {}
    for key in ordered:
        full = [0] * len(compiled.modes)
        for i, n in zip(idx, key):
            full[i] = n
        labels[detection_label(compiled.modes, tuple(full), compiled.detectors)] = table[key]
    return CircuitResult(stages, labels, residuals, factor_dev)
