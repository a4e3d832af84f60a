"""Expression language over pulse circuits.

parse() turns a textual arithmetic expression into a small AST,
compile_expression() lowers the AST to a flat netlist of circuit nodes
with power-of-two scale bookkeeping, and evaluate() simulates the whole
netlist on one synchronized clock, one source stream per variable
occurrence and per constant.

Scale bookkeeping: every wire carries a stream probability p and a scale
exponent k and represents the value p * 2**k. Multiplication adds scale
exponents. The multiplexer adder halves the sum of its operand streams,
so it raises the scale by one; operands of unequal scale are first
matched by routing the smaller-scale side through a multiplexer against
a constant-zero stream, which halves its probability and raises its
scale by one while preserving the value. The OR adder and the subtractor
require equal scales outright. Division subtracts the denominator scale
from the numerator scale and rejects a negative result.

Range analysis: the compiler tracks an interval for each wire's
represented value, seeded by the declared variable ranges (default
[0, 1]). Every wire except the final output must provably fit its stream
capacity 2**k; a wire that could exceed it would need a stream rate
above 1 and would silently clip in hardware, so compilation fails and
names the offending node. The final output is exempt: it is reported
together with its scale, and clipping there is an honest measurement.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from . import circuits as _circuits
from .core import (
    Bitstream,
    ConfigurationError,
    InputDomainError,
    PulseError,
    SimulationConfig,
    bernoulli_array,
    default_warmup,
    substream,
    validate_probability,
)
from .elements import MAXIMAL_TAPS

__all__ = [
    "ExpressionError",
    "CompileError",
    "Const",
    "Var",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Expr",
    "parse",
    "CompileOptions",
    "Node",
    "Netlist",
    "compile_expression",
    "EvalResult",
    "evaluate",
]


class ExpressionError(PulseError, ValueError):
    """Malformed expression text; carries the character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class CompileError(PulseError, ValueError):
    """The expression parsed but cannot be realized as a netlist."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    children: tuple["Expr", ...]


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Add, Sub, Mul, Div]


# ---------------------------------------------------------------------------
# Parser
#
# expr   := term (('+' | '-') term)*
# term   := factor (('*' | '/') factor)*
# factor := decimal-literal | identifier | '(' expr ')'
#
# All binary operators associate to the left. Chains of '*' collapse into
# one n-ary Mul node since gate multiplication is exact and associative.

_TOKEN_RE = re.compile(
    r"(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/()]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "name" | "+" | "-" | "*" | "/" | "(" | ")" | "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {text[pos]!r}", pos)
        if m.group("num") is not None:
            tokens.append(_Token("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(_Token("name", m.group("name"), m.start("name")))
        else:
            op = m.group("op")
            tokens.append(_Token(op, op, m.start("op")))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._i = 0

    def _peek(self) -> _Token:
        return self._tokens[self._i]

    def _next(self) -> _Token:
        tok = self._tokens[self._i]
        self._i += 1
        return tok

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self._peek().kind in ("+", "-"):
            op = self._next()
            rhs = self.parse_term()
            node = Add(node, rhs) if op.kind == "+" else Sub(node, rhs)
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self._peek().kind in ("*", "/"):
            op = self._next()
            rhs = self.parse_factor()
            if op.kind == "*":
                left = node.children if isinstance(node, Mul) else (node,)
                right = rhs.children if isinstance(rhs, Mul) else (rhs,)
                node = Mul(left + right)
            else:
                node = Div(node, rhs)
        return node

    def parse_factor(self) -> Expr:
        tok = self._peek()
        if tok.kind == "num":
            self._next()
            value = float(tok.text)
            if value > 1.0:
                raise ExpressionError(
                    f"literal {tok.text} lies outside [0, 1]", tok.pos
                )
            return Const(value)
        if tok.kind == "name":
            self._next()
            return Var(tok.text)
        if tok.kind == "(":
            self._next()
            node = self.parse_expr()
            closing = self._peek()
            if closing.kind != ")":
                raise ExpressionError("expected ')'", closing.pos)
            self._next()
            return node
        raise ExpressionError(
            f"expected a value, name or '(', got {tok.text!r}" if tok.kind != "end"
            else "unexpected end of expression",
            tok.pos,
        )

    def expect_end(self) -> None:
        tok = self._peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected trailing {tok.text!r}", tok.pos)


def parse(text: str) -> Expr:
    """Parse an arithmetic expression into an AST."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression", 0)
    parser = _Parser(_tokenize(text))
    expr = parser.parse_expr()
    parser.expect_end()
    return expr


# ---------------------------------------------------------------------------
# Compilation

_ADDERS = ("mux", "or")
_DIVIDERS = ("counter", "lfsr", "trff")
_SUBTRACTORS = ("counter", "lfsr", "trff")


@dataclass(frozen=True)
class CompileOptions:
    """Circuit family choices and analysis inputs for one compilation."""

    adder: str = "mux"
    divider: str = "counter"
    subtractor: str = "counter"
    divider_bits: int = 8
    subtractor_bits: int | None = None
    var_ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.adder not in _ADDERS:
            raise ConfigurationError(f"adder must be one of {_ADDERS}, got {self.adder!r}")
        if self.divider not in _DIVIDERS:
            raise ConfigurationError(
                f"divider must be one of {_DIVIDERS}, got {self.divider!r}"
            )
        if self.subtractor not in _SUBTRACTORS:
            raise ConfigurationError(
                f"subtractor must be one of {_SUBTRACTORS}, got {self.subtractor!r}"
            )
        _check_width("divider_bits", self.divider, self.divider_bits)
        if self.subtractor_bits is not None:
            _check_width("subtractor_bits", self.subtractor, self.subtractor_bits)
        for name, bounds in self.var_ranges.items():
            lo, hi = bounds
            try:
                lo = validate_probability(lo, f"range low of {name}")
                hi = validate_probability(hi, f"range high of {name}")
            except InputDomainError as exc:
                raise ConfigurationError(str(exc)) from None
            if lo > hi:
                raise ConfigurationError(f"empty declared range for {name}: {bounds}")

    def resolved_subtractor_bits(self) -> int:
        if self.subtractor_bits is not None:
            return self.subtractor_bits
        return 4 if self.subtractor == "counter" else 8


def _check_width(label: str, family: str, bits: int) -> None:
    if not isinstance(bits, int) or bits < 1:
        raise ConfigurationError(f"{label} must be a positive integer, got {bits!r}")
    if family == "lfsr" and bits not in MAXIMAL_TAPS:
        raise ConfigurationError(
            f"{label}={bits} has no maximal tap set; "
            f"supported widths: {sorted(MAXIMAL_TAPS)}"
        )
    if bits > 24:
        raise ConfigurationError(f"{label} must be at most 24, got {bits}")


@dataclass(frozen=True)
class Node:
    """One wire of the netlist. inputs are node ids in circuit port order:
    for div (numerator, denominator), for sub (subtrahend, minuend)."""

    node_id: str
    op: str  # "var" | "const" | "mul" | "or-add" | "mux-add" | "div" | "sub"
    inputs: tuple[str, ...]
    scale: int
    lo: float
    hi: float
    var_name: str | None = None
    const_value: float | None = None
    bits: int | None = None
    variant: str | None = None


@dataclass
class Netlist:
    """A compiled expression: circuit nodes in topological order."""

    text: str
    nodes: list[Node]
    output_id: str
    scale: int
    options: CompileOptions
    warnings: list[str]

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)

    @property
    def var_names(self) -> list[str]:
        return sorted({n.var_name for n in self.nodes if n.op == "var"})

    def ideal_rates(self, bindings: Mapping[str, float]) -> dict[str, float]:
        """Stationary rate each wire would carry with ideal circuits."""
        rates: dict[str, float] = {}
        for n in self.nodes:
            if n.op == "var":
                rates[n.node_id] = validate_probability(
                    bindings[n.var_name], n.var_name
                )
            elif n.op == "const":
                rates[n.node_id] = n.const_value
            elif n.op == "mul":
                rates[n.node_id] = math.prod(rates[i] for i in n.inputs)
            elif n.op == "or-add":
                miss = 1.0
                for i in n.inputs:
                    miss *= 1.0 - rates[i]
                rates[n.node_id] = 1.0 - miss
            elif n.op == "mux-add":
                rates[n.node_id] = 0.5 * (rates[n.inputs[0]] + rates[n.inputs[1]])
            elif n.op == "div":
                num, den = (rates[i] for i in n.inputs)
                rates[n.node_id] = _circuits._ratio_ideal(num, den)
            elif n.op == "sub":
                a, b = (rates[i] for i in n.inputs)
                rates[n.node_id] = max(0.0, b - a)
            else:  # pragma: no cover
                raise AssertionError(f"unknown op {n.op}")
        return rates

    def ideal_value(self, bindings: Mapping[str, float]) -> float:
        return self.ideal_rates(bindings)[self.output_id] * (2.0 ** self.scale)

    def describe(self) -> list[dict]:
        """JSON-friendly node table."""
        out = []
        for n in self.nodes:
            entry: dict = {
                "id": n.node_id,
                "op": n.op,
                "inputs": list(n.inputs),
                "scale": n.scale,
            }
            if n.var_name is not None:
                entry["var"] = n.var_name
            if n.const_value is not None:
                entry["const"] = n.const_value
            if n.bits is not None:
                entry["bits"] = n.bits
            if n.variant is not None:
                entry["variant"] = n.variant
            out.append(entry)
        return out


class _Builder:
    def __init__(self, options: CompileOptions):
        self.options = options
        self.nodes: list[Node] = []
        self.warnings: list[str] = []

    def emit(self, op: str, inputs: tuple[str, ...], scale: int,
             lo: float, hi: float, **extra) -> Node:
        node = Node(f"n{len(self.nodes)}", op, inputs, scale, lo, hi, **extra)
        self.nodes.append(node)
        return node

    def build(self, expr: Expr) -> Node:
        if isinstance(expr, Const):
            v = validate_probability(expr.value, "constant")
            return self.emit("const", (), 0, v, v, const_value=v)
        if isinstance(expr, Var):
            lo, hi = self.options.var_ranges.get(expr.name, (0.0, 1.0))
            return self.emit("var", (), 0, lo, hi, var_name=expr.name)
        if isinstance(expr, Mul):
            parts = [self.build(c) for c in expr.children]
            scale = sum(p.scale for p in parts)
            lo = math.prod(p.lo for p in parts)
            hi = math.prod(p.hi for p in parts)
            return self.emit("mul", tuple(p.node_id for p in parts), scale, lo, hi)
        if isinstance(expr, Add):
            return self._build_add(expr)
        if isinstance(expr, Sub):
            left = self.build(expr.left)
            right = self.build(expr.right)
            if left.scale != right.scale:
                raise CompileError(
                    "scale mismatch unresolvable: subtraction needs equal scales "
                    f"(2**{left.scale} vs 2**{right.scale}); rescale the operands"
                )
            return self.emit(
                "sub",
                (right.node_id, left.node_id),  # (subtrahend, minuend)
                left.scale,
                max(0.0, left.lo - right.hi),
                max(0.0, left.hi - right.lo),
                bits=self.options.resolved_subtractor_bits(),
                variant=self.options.subtractor,
            )
        if isinstance(expr, Div):
            left = self.build(expr.left)
            right = self.build(expr.right)
            scale = left.scale - right.scale
            if scale < 0:
                raise CompileError(
                    "negative divide scale: the denominator carries more scale "
                    f"doublings ({right.scale}) than the numerator ({left.scale})"
                )
            lo = left.lo / right.hi if right.hi > 0 else (
                0.0 if left.lo == 0 else math.inf)
            hi = left.hi / right.lo if right.lo > 0 else (
                0.0 if left.hi == 0 else math.inf)
            return self.emit(
                "div",
                (left.node_id, right.node_id),  # (numerator, denominator)
                scale,
                lo,
                hi,
                bits=self.options.divider_bits,
                variant=self.options.divider,
            )
        raise CompileError(f"unsupported expression node {expr!r}")

    def _build_add(self, expr: Add) -> Node:
        if isinstance(expr.left, Add) or isinstance(expr.right, Add):
            self.warnings.append(
                "association order: chained additions are grouped left to "
                "right; multiplexer addition is not associative at the stream "
                "level, so the grouping changes intermediate wires"
            )
        left = self.build(expr.left)
        right = self.build(expr.right)
        if self.options.adder == "or":
            if left.scale != right.scale:
                raise CompileError(
                    "scale mismatch unresolvable: the or adder needs equal "
                    f"scales (2**{left.scale} vs 2**{right.scale})"
                )
            self.warnings.append(
                "or adder: the sum is approximate, overlapping pulses are lost "
                "(exact rate 1-(1-p0)(1-p1))"
            )
            return self.emit(
                "or-add",
                (left.node_id, right.node_id),
                left.scale,
                left.lo + right.lo,
                left.hi + right.hi,
            )
        # multiplexer adder: match scales by halving the smaller-scale side
        while left.scale < right.scale:
            left = self._halve(left)
        while right.scale < left.scale:
            right = self._halve(right)
        return self.emit(
            "mux-add",
            (left.node_id, right.node_id),
            left.scale + 1,
            left.lo + right.lo,
            left.hi + right.hi,
        )

    def _halve(self, node: Node) -> Node:
        zero = self.emit("const", (), 0, 0.0, 0.0, const_value=0.0)
        return self.emit(
            "mux-add", (node.node_id, zero.node_id), node.scale + 1,
            node.lo, node.hi,
        )


def compile_expression(expr: Expr | str, options: CompileOptions | None = None) -> Netlist:
    """Lower an expression (or its text) to a netlist of circuit nodes."""
    text = expr if isinstance(expr, str) else ""
    if isinstance(expr, str):
        expr = parse(expr)
    options = options if options is not None else CompileOptions()
    builder = _Builder(options)
    out = builder.build(expr)
    capacity_eps = 1e-9
    for n in builder.nodes:
        if n.node_id == out.node_id:
            continue  # the output wire may report scaled or clipped values
        if n.hi > 2.0 ** n.scale + capacity_eps:
            raise CompileError(
                f"range analysis: wire {n.node_id} ({n.op}) may represent "
                f"values up to {n.hi:.6g}, beyond its stream capacity "
                f"2**{n.scale}; rescale or declare tighter variable ranges"
            )
    return Netlist(
        text=text,
        nodes=builder.nodes,
        output_id=out.node_id,
        scale=out.scale,
        options=options,
        warnings=builder.warnings,
    )


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalResult:
    """Measured output of one netlist simulation."""

    estimate: float        # pulse rate of the output wire
    scale: int             # output scale exponent k
    value: float           # estimate * 2**k
    ideal_estimate: float  # output rate with ideal circuits
    ideal_value: float
    node_rates: dict[str, float]
    warnings: list[str]
    cycles: int
    warmup: int
    seed: int


def _node_circuit(node: Node, seed: int) -> _circuits.Circuit:
    if node.op == "mul":
        return _circuits.Mul(len(node.inputs), seed=seed, element_id=node.node_id)
    if node.op == "or-add":
        return _circuits.OrAdd(2, seed=seed, element_id=node.node_id)
    if node.op == "mux-add":
        return _circuits.MuxAdd(seed=seed, element_id=node.node_id)
    if node.op == "div":
        cls = {
            "counter": _circuits.DivCounter,
            "lfsr": _circuits.DivLfsr,
            "trff": _circuits.DivTrff,
        }[node.variant]
        return cls(node.bits, seed=seed, element_id=node.node_id)
    if node.op == "sub":
        cls = {
            "counter": _circuits.SubCounter,
            "lfsr": _circuits.SubDivLfsr,
            "trff": _circuits.SubDivTrff,
        }[node.variant]
        return cls(node.bits, seed=seed, element_id=node.node_id)
    raise AssertionError(f"not a circuit op: {node.op}")  # pragma: no cover


def _check_bindings(netlist: Netlist, bindings: Mapping[str, float]) -> dict[str, float]:
    names = set(netlist.var_names)
    missing = sorted(names - set(bindings))
    if missing:
        raise InputDomainError(f"unbound variable(s): {', '.join(missing)}")
    unknown = sorted(set(bindings) - names)
    if unknown:
        raise InputDomainError(f"unknown identifier(s): {', '.join(unknown)}")
    values = {name: validate_probability(bindings[name], name) for name in names}
    for n in netlist.nodes:
        if n.op == "var" and not (n.lo - 1e-12 <= values[n.var_name] <= n.hi + 1e-12):
            raise InputDomainError(
                f"binding {n.var_name}={values[n.var_name]} lies outside its "
                f"declared range [{n.lo}, {n.hi}]"
            )
    return values


def _simulate(
    netlist: Netlist, values: Mapping[str, float], config: SimulationConfig
) -> tuple[dict[str, np.ndarray], int]:
    """Produce every wire's stream in topological order.

    The graph is acyclic (feedback lives inside circuit nodes). Every
    variable occurrence gets its own independent source stream; reusing a
    name does not reuse pulses, which keeps products of repeated variables
    unbiased.
    """
    warmup = config.warmup
    if warmup is None:
        warmup = max(
            (default_warmup(n.bits) for n in netlist.nodes if n.bits is not None),
            default=0,
        )
    total = warmup + config.cycles
    streams: dict[str, np.ndarray] = {}
    for n in netlist.nodes:
        if n.op == "var":
            streams[n.node_id] = bernoulli_array(
                values[n.var_name], total, substream(config.seed, n.node_id)
            )
        elif n.op == "const":
            streams[n.node_id] = bernoulli_array(
                n.const_value, total, substream(config.seed, n.node_id)
            )
        else:
            circuit = _node_circuit(n, config.seed)
            streams[n.node_id] = circuit.run([streams[i] for i in n.inputs])
    return streams, warmup


def evaluate(
    netlist: Netlist,
    bindings: Mapping[str, float],
    config: SimulationConfig,
) -> EvalResult:
    """Simulate the netlist on one synchronized clock and measure it."""
    values = _check_bindings(netlist, bindings)
    streams, warmup = _simulate(netlist, values, config)
    node_rates = {
        node_id: float(arr[warmup:].mean()) for node_id, arr in streams.items()
    }
    estimate = node_rates[netlist.output_id]
    ideal_rates = netlist.ideal_rates(values)
    return EvalResult(
        estimate=estimate,
        scale=netlist.scale,
        value=estimate * (2.0 ** netlist.scale),
        ideal_estimate=ideal_rates[netlist.output_id],
        ideal_value=ideal_rates[netlist.output_id] * (2.0 ** netlist.scale),
        node_rates=node_rates,
        warnings=list(netlist.warnings),
        cycles=config.cycles,
        warmup=warmup,
        seed=config.seed,
    )


def output_stream(
    netlist: Netlist,
    bindings: Mapping[str, float],
    config: SimulationConfig,
) -> Bitstream:
    """Like evaluate, but return the raw output pulse train."""
    values = _check_bindings(netlist, bindings)
    streams, warmup = _simulate(netlist, values, config)
    return Bitstream(streams[netlist.output_id][warmup:])
