"""Complete arithmetic circuits over random pulse trains.

Every circuit is a synchronous state machine advanced once per clock bin.
Two execution paths are provided and kept bit-identical:

* step(bits)  advances one bin at a time, mirroring the hardware wiring,
* run(arrays) advances a whole block through a compiled kernel.

For circuits with feedback the output bit of a bin is computed from state
as it stood at the start of that bin, and the counter then applies the net
change and clamps. That ordering makes the output bit independent of the
same bin's inputs wherever the equilibrium algebra requires it.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (
    Bitstream,
    ConfigurationError,
    InputDomainError,
    SimulationConfig,
    bernoulli_array,
    default_warmup,
    substream,
    validate_probability,
)
from .elements import (
    MAXIMAL_TAPS,
    Lfsr,
    SaturatingCounter,
    Trff,
    and_gate,
    magnitude_less,
    or_gate,
    uniform_word,
    uniform_words,
)

__all__ = [
    "Circuit",
    "Mul",
    "OrAdd",
    "MuxAdd",
    "DivLfsr",
    "DivTrff",
    "DivCounter",
    "SubDivLfsr",
    "SubDivTrff",
    "SubCounter",
    "Comparator",
    "CIRCUIT_KINDS",
    "make_circuit",
    "run_circuit",
]

_MAX_COUNTER_BITS = 24


def _as_bit_array(arr, name: str) -> np.ndarray:
    a = np.asarray(arr)
    if a.ndim != 1:
        raise InputDomainError(f"{name} must be a one-dimensional bit array")
    if a.dtype != np.uint8:
        if a.size and (a.min() < 0 or a.max() > 1):
            raise InputDomainError(f"{name} must contain only 0/1 values")
        a = a.astype(np.uint8)
    return a


class Circuit:
    """Base class: fixed input arity, optional counter state, owned RNG."""

    cli_name: str = ""
    n_inputs: int = 2
    counter_bits: int | None = None

    def __init__(self, seed: int = 1, element_id: str = "cell"):
        if not element_id:
            raise ConfigurationError("element_id must be a non-empty string")
        self._element_id = element_id
        self.reset(seed)

    def reset(self, seed: int | None = None) -> None:
        """Return to the initial state; with a seed, rebind the sub-streams."""
        if seed is not None:
            if not isinstance(seed, int):
                raise ConfigurationError(f"seed must be an int, got {seed!r}")
            self._seed = seed
        self._rebuild()

    def _rebuild(self) -> None:  # stateless circuits need nothing
        pass

    def _substream(self, suffix: str):
        return substream(self._seed, f"{self._element_id}.{suffix}")

    @property
    def default_warmup(self) -> int:
        return default_warmup(self.counter_bits)

    def step(self, bits: Sequence[int]) -> int:
        raise NotImplementedError

    def run(self, arrays: Sequence[np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def ideal(self, probs: Sequence[float]) -> float:
        """Stationary output rate of the idealized (infinite counter) circuit."""
        raise NotImplementedError

    def _check_arity(self, items, what: str) -> None:
        if len(items) != self.n_inputs:
            raise InputDomainError(
                f"{type(self).__name__} takes {self.n_inputs} {what}, got {len(items)}"
            )

    def _input_arrays(self, arrays) -> list[np.ndarray]:
        self._check_arity(arrays, "input arrays")
        out = [_as_bit_array(a, f"input {i}") for i, a in enumerate(arrays)]
        sizes = {a.size for a in out}
        if len(sizes) > 1:
            raise InputDomainError("input arrays must share one length")
        return out

    def _probs(self, probs) -> list[float]:
        self._check_arity(probs, "input probabilities")
        return [validate_probability(p, f"input {i}") for i, p in enumerate(probs)]


class Mul(Circuit):
    """AND gate multiplier: output rate is the product of the input rates,
    exact for independent inputs."""

    cli_name = "mul"

    def __init__(self, n_inputs: int = 2, seed: int = 1, element_id: str = "cell"):
        if not isinstance(n_inputs, int) or n_inputs < 2:
            raise ConfigurationError(f"mul needs at least 2 inputs, got {n_inputs!r}")
        self.n_inputs = n_inputs
        super().__init__(seed, element_id)

    def step(self, bits) -> int:
        self._check_arity(bits, "input bits")
        return and_gate(bits)

    def run(self, arrays) -> np.ndarray:
        return np.bitwise_and.reduce(self._input_arrays(arrays))

    def ideal(self, probs) -> float:
        return float(math.prod(self._probs(probs)))


class OrAdd(Circuit):
    """OR gate adder: approximates the sum for small rates; the exact
    output rate is 1 - prod(1 - p_i), so overlapping pulses are lost."""

    cli_name = "or-add"

    def __init__(self, n_inputs: int = 2, seed: int = 1, element_id: str = "cell"):
        if not isinstance(n_inputs, int) or n_inputs < 2:
            raise ConfigurationError(f"or-add needs at least 2 inputs, got {n_inputs!r}")
        self.n_inputs = n_inputs
        super().__init__(seed, element_id)

    def step(self, bits) -> int:
        self._check_arity(bits, "input bits")
        return or_gate(bits)

    def run(self, arrays) -> np.ndarray:
        return np.bitwise_or.reduce(self._input_arrays(arrays))

    def ideal(self, probs) -> float:
        miss = 1.0
        for p in self._probs(probs):
            miss *= 1.0 - p
        return 1.0 - miss


class MuxAdd(Circuit):
    """Two-way multiplexer adder: a fresh unbiased select bit picks one
    input per bin, so the output rate is exactly (p0 + p1) / 2.

    The halving keeps the sum representable; track the factor 2 externally.
    Chaining these is not associative: each stage halves its own operands.
    """

    cli_name = "mux-add"
    n_inputs = 2

    def _rebuild(self) -> None:
        self._sel_rng = self._substream("sel")
        self._trff = Trff(self._sel_rng)

    def step(self, bits) -> int:
        self._check_arity(bits, "input bits")
        s = self._trff.step(1)  # held at t=1: i.i.d. unbiased select
        return int(bits[1] if s else bits[0])

    def run(self, arrays) -> np.ndarray:
        a, b = self._input_arrays(arrays)
        if a.size == 0:
            return np.empty(0, dtype=np.uint8)
        toggles = self._sel_rng.integers(0, 2, size=a.size)
        sel = np.bitwise_xor.accumulate(toggles.astype(np.uint8)) ^ self._trff.q
        self._trff.q = int(sel[-1])
        return np.where(sel == 1, b, a).astype(np.uint8)

    def ideal(self, probs) -> float:
        p0, p1 = self._probs(probs)
        return 0.5 * (p0 + p1)


def _ratio_ideal(p0: float, p1: float) -> float:
    if p1 <= 0.0:
        return 1.0 if p0 > 0.0 else 0.0
    return min(1.0, p0 / p1)


class DivLfsr(Circuit):
    """Feedback divider with a shift-register word source.

    Per bin: read the word R from the register (advancing it one shift),
    emit z = [R < C], then count inc = a, dec = z AND b. At equilibrium
    the decrement rate matches the numerator rate, so E[z] settles near
    p0 / p1, clipped at 1. Consecutive words overlap in all but one bit,
    which leaves visible correlation in the output stream.
    """

    cli_name = "div-lfsr"
    n_inputs = 2

    def __init__(self, bits: int = 8, seed: int = 1, element_id: str = "cell"):
        if bits not in MAXIMAL_TAPS:
            raise ConfigurationError(
                f"no maximal tap set for width {bits}; "
                f"supported widths: {sorted(MAXIMAL_TAPS)}"
            )
        self.bits = bits
        self.counter_bits = bits
        self._tap_shifts = np.array(
            [t - 1 for t in MAXIMAL_TAPS[bits]], dtype=np.int64
        )
        super().__init__(seed, element_id)

    def _rebuild(self) -> None:
        self._lfsr = Lfsr(self.bits, seed=1)
        self._counter = SaturatingCounter(self.bits, 1 << (self.bits - 1))

    @property
    def counter_value(self) -> int:
        return self._counter.value

    def step(self, bits) -> int:
        self._check_arity(bits, "input bits")
        a, b = bits
        r = self._lfsr.read_and_step()
        z = magnitude_less(r, self._counter.value, width=self.bits)
        self._counter.update(int(a), z & int(b))
        return z

    def run(self, arrays) -> np.ndarray:
        a, b = self._input_arrays(arrays)
        words = np.empty(a.size, dtype=np.int64)
        self._lfsr.state = int(
            _kernels.lfsr_word_block(self._lfsr.state, self.bits, self._tap_shifts, words)
        )
        out = np.empty(a.size, dtype=np.uint8)
        self._counter.value = int(
            _kernels.divider_block(a, b, words, self._counter.value,
                                   self._counter.max_value, out)
        )
        return out

    def ideal(self, probs) -> float:
        p0, p1 = self._probs(probs)
        return _ratio_ideal(p0, p1)


class DivTrff(Circuit):
    """Feedback divider comparing against a fresh uniform word each bin.

    Same wiring as the shift-register divider, but R is drawn uniformly
    from [0, 2**bits - 1] per bin, so P(z = 1 | C) = C / 2**bits exactly
    and the output carries no word-to-word correlation beyond the counter.
    """

    cli_name = "div-trff"
    n_inputs = 2

    def __init__(self, bits: int = 8, seed: int = 1, element_id: str = "cell"):
        if not isinstance(bits, int) or not 1 <= bits <= _MAX_COUNTER_BITS:
            raise ConfigurationError(
                f"counter width must lie in [1, {_MAX_COUNTER_BITS}], got {bits!r}"
            )
        self.bits = bits
        self.counter_bits = bits
        super().__init__(seed, element_id)

    def _rebuild(self) -> None:
        self._word_rng = self._substream("word")
        self._counter = SaturatingCounter(self.bits, 1 << (self.bits - 1))

    @property
    def counter_value(self) -> int:
        return self._counter.value

    def step(self, bits) -> int:
        self._check_arity(bits, "input bits")
        a, b = bits
        r = uniform_word(self.bits, self._word_rng)
        z = magnitude_less(r, self._counter.value, width=self.bits)
        self._counter.update(int(a), z & int(b))
        return z

    def run(self, arrays) -> np.ndarray:
        a, b = self._input_arrays(arrays)
        words = uniform_words(self.bits, a.size, self._word_rng)
        out = np.empty(a.size, dtype=np.uint8)
        self._counter.value = int(
            _kernels.divider_block(a, b, words, self._counter.value,
                                   self._counter.max_value, out)
        )
        return out

    def ideal(self, probs) -> float:
        p0, p1 = self._probs(probs)
        return _ratio_ideal(p0, p1)


class DivCounter(Circuit):
    """Divider with no randomness of its own: z = [C > 0].

    The counter alone gates the decrement path, which preserves the
    stationary rate but concentrates the pulses into long runs.
    """

    cli_name = "div-counter"
    n_inputs = 2

    def __init__(self, bits: int = 8, seed: int = 1, element_id: str = "cell"):
        if not isinstance(bits, int) or not 1 <= bits <= _MAX_COUNTER_BITS:
            raise ConfigurationError(
                f"counter width must lie in [1, {_MAX_COUNTER_BITS}], got {bits!r}"
            )
        self.bits = bits
        self.counter_bits = bits
        super().__init__(seed, element_id)

    def _rebuild(self) -> None:
        self._counter = SaturatingCounter(self.bits, 0)

    @property
    def counter_value(self) -> int:
        return self._counter.value

    def step(self, bits) -> int:
        self._check_arity(bits, "input bits")
        a, b = bits
        z = 1 if self._counter.value > 0 else 0
        self._counter.update(int(a), z & int(b))
        return z

    def run(self, arrays) -> np.ndarray:
        a, b = self._input_arrays(arrays)
        out = np.empty(a.size, dtype=np.uint8)
        self._counter.value = int(
            _kernels.divider_counter_block(a, b, self._counter.value,
                                           self._counter.max_value, out)
        )
        return out

    def ideal(self, probs) -> float:
        p0, p1 = self._probs(probs)
        return _ratio_ideal(p0, p1)


class _SubDiv(Circuit):
    """Subtractor built around an embedded divider.

    The divider estimates z ~ p0 / p1 from the same two inputs; the output
    is (NOT z) AND b. Since z is computed before the bin's b arrives,
    E[(1 - z) b] = (1 - p0/p1) p1 = p1 - p0, clipped at zero.
    """

    n_inputs = 2
    _div_cls: type[Circuit]

    def __init__(self, bits: int = 8, seed: int = 1, element_id: str = "cell"):
        self._div_cls(bits)  # reject unusable widths before accepting state
        self.bits = bits
        self.counter_bits = bits
        super().__init__(seed, element_id)

    def _rebuild(self) -> None:
        self._div = self._div_cls(
            self.bits, seed=self._seed, element_id=f"{self._element_id}.div"
        )

    @property
    def divider(self) -> Circuit:
        return self._div

    @property
    def counter_value(self) -> int:
        return self._div.counter_value

    def step(self, bits) -> int:
        self._check_arity(bits, "input bits")
        a, b = bits
        z = self._div.step((a, b))
        return (1 - z) & int(b)

    def run(self, arrays) -> np.ndarray:
        a, b = self._input_arrays(arrays)
        z = self._div.run((a, b))
        return ((z ^ 1) & b).astype(np.uint8)

    def ideal(self, probs) -> float:
        p0, p1 = self._probs(probs)
        return max(0.0, p1 - p0)


class SubDivLfsr(_SubDiv):
    cli_name = "sub-lfsr"
    _div_cls = DivLfsr


class SubDivTrff(_SubDiv):
    cli_name = "sub-trff"
    _div_cls = DivTrff


class SubCounter(Circuit):
    """Pulse-inhibit subtractor: every a-pulse arms the counter to swallow
    one future b-pulse; b-pulses pass through only when the counter is
    empty. A coincident pair cancels directly. The output rate settles at
    max(0, p1 - p0); the only loss is an a-pulse arriving at a full counter.
    """

    cli_name = "sub-counter"
    n_inputs = 2

    def __init__(self, bits: int = 4, seed: int = 1, element_id: str = "cell"):
        if not isinstance(bits, int) or not 1 <= bits <= _MAX_COUNTER_BITS:
            raise ConfigurationError(
                f"counter width must lie in [1, {_MAX_COUNTER_BITS}], got {bits!r}"
            )
        self.bits = bits
        self.counter_bits = bits
        super().__init__(seed, element_id)

    def _rebuild(self) -> None:
        self._counter = SaturatingCounter(self.bits, 0)

    @property
    def counter_value(self) -> int:
        return self._counter.value

    def step(self, bits) -> int:
        self._check_arity(bits, "input bits")
        a, b = int(bits[0]), int(bits[1])
        if a and b:
            return 0  # the pair cancels, nothing counted
        if a:
            self._counter.update(1, 0)
            return 0
        if b:
            if self._counter.value > 0:
                self._counter.update(0, 1)
                return 0
            return 1
        return 0

    def run(self, arrays) -> np.ndarray:
        a, b = self._input_arrays(arrays)
        out = np.empty(a.size, dtype=np.uint8)
        self._counter.value = int(
            _kernels.sub_counter_block(a, b, self._counter.value,
                                       self._counter.max_value, out)
        )
        return out

    def ideal(self, probs) -> float:
        p0, p1 = self._probs(probs)
        return max(0.0, p1 - p0)


class Comparator(Circuit):
    """Saturating race counter deciding which input rate is larger.

    inc = a, dec = b; the output is the counter's most significant bit.
    Saturation pins the count to the winning end, and the transition around
    p0 = p1 sharpens as the width grows.
    """

    cli_name = "comparator"
    n_inputs = 2

    def __init__(self, bits: int = 8, seed: int = 1, element_id: str = "cell"):
        if not isinstance(bits, int) or not 2 <= bits <= _MAX_COUNTER_BITS:
            raise ConfigurationError(
                f"comparator width must lie in [2, {_MAX_COUNTER_BITS}], got {bits!r}"
            )
        self.bits = bits
        self.counter_bits = bits
        super().__init__(seed, element_id)

    def _rebuild(self) -> None:
        self._counter = SaturatingCounter(self.bits, 1 << (self.bits - 1))

    @property
    def counter_value(self) -> int:
        return self._counter.value

    def state_output(self) -> int:
        """Steady readout: the MSB of the count, usable without a clock."""
        return self._counter.msb()

    def step(self, bits) -> int:
        self._check_arity(bits, "input bits")
        a, b = bits
        out = self._counter.msb()
        self._counter.update(int(a), int(b))
        return out

    def run(self, arrays) -> np.ndarray:
        a, b = self._input_arrays(arrays)
        out = np.empty(a.size, dtype=np.uint8)
        self._counter.value = int(
            _kernels.comparator_block(a, b, self._counter.value,
                                      self._counter.max_value,
                                      1 << (self.bits - 1), out)
        )
        return out

    def ideal(self, probs) -> float:
        p0, p1 = self._probs(probs)
        if p0 > p1:
            return 1.0
        if p0 < p1:
            return 0.0
        return 0.5


CIRCUIT_KINDS: dict[str, type[Circuit]] = {
    cls.cli_name: cls
    for cls in (
        Mul, OrAdd, MuxAdd,
        DivLfsr, DivTrff, DivCounter,
        SubDivLfsr, SubDivTrff, SubCounter,
        Comparator,
    )
}

# kinds that carry a counter (and so take a width and need warmup)
FEEDBACK_KINDS = frozenset(
    name for name, cls in CIRCUIT_KINDS.items()
    if cls not in (Mul, OrAdd, MuxAdd)
)


def make_circuit(
    kind: str,
    *,
    bits: int | None = None,
    n_inputs: int = 2,
    seed: int = 1,
    element_id: str = "cell",
) -> Circuit:
    """Build a circuit by its command-line kind name.

    bits=None keeps each kind's default width (8 for dividers, divider
    subtractors and the comparator, 4 for the counting subtractor).
    """
    cls = CIRCUIT_KINDS.get(kind)
    if cls is None:
        raise ConfigurationError(
            f"unknown circuit kind {kind!r}; choose from {sorted(CIRCUIT_KINDS)}"
        )
    if cls in (Mul, OrAdd):
        if bits is not None:
            raise ConfigurationError(f"{kind} has no counter width")
        return cls(n_inputs=n_inputs, seed=seed, element_id=element_id)
    if cls is MuxAdd:
        if bits is not None:
            raise ConfigurationError(f"{kind} has no counter width")
        if n_inputs != 2:
            raise ConfigurationError(f"{kind} takes exactly 2 inputs, got {n_inputs}")
        return cls(seed=seed, element_id=element_id)
    if n_inputs != 2:
        raise ConfigurationError(f"{kind} takes exactly 2 inputs, got {n_inputs}")
    if bits is None:
        return cls(seed=seed, element_id=element_id)
    return cls(bits=bits, seed=seed, element_id=element_id)


def run_circuit(
    circuit: Circuit | str,
    input_probs: Sequence[float],
    config: SimulationConfig,
) -> Bitstream:
    """Drive a circuit with independent Bernoulli sources and record its output.

    Source i uses the sub-stream (seed, "in{i}") and the circuit's own
    randomness uses its element id, so the run is reproducible bit for bit.
    The first `warmup` bins (default: the circuit's settling time) are
    simulated but dropped from the returned stream.
    """
    if isinstance(circuit, str):
        circuit = make_circuit(circuit, seed=config.seed)
    probs = [
        validate_probability(p, f"input {i}") for i, p in enumerate(input_probs)
    ]
    if len(probs) != circuit.n_inputs:
        raise InputDomainError(
            f"{type(circuit).__name__} takes {circuit.n_inputs} input rates, "
            f"got {len(probs)}"
        )
    warmup = config.warmup if config.warmup is not None else circuit.default_warmup
    total = warmup + config.cycles
    circuit.reset(config.seed)
    sources = [
        bernoulli_array(p, total, substream(config.seed, f"in{i}"))
        for i, p in enumerate(probs)
    ]
    out = circuit.run(sources)
    return Bitstream(out[warmup:])
