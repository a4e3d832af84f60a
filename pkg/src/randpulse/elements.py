"""Stateless gates and small stateful building blocks.

Everything here is clocked: a step method models exactly one clock bin.
The circuits module wires these into complete arithmetic circuits.
"""

from __future__ import annotations

import numpy as np

from .core import ConfigurationError, InputDomainError

__all__ = [
    "and_gate",
    "or_gate",
    "not_gate",
    "MAXIMAL_TAPS",
    "Lfsr",
    "Trff",
    "SaturatingCounter",
    "magnitude_less",
    "uniform_word",
    "uniform_words",
]


def _check_bit(bit: int, name: str = "bit") -> int:
    if bit not in (0, 1):
        raise InputDomainError(f"{name} must be 0 or 1, got {bit!r}")
    return int(bit)


def and_gate(bits) -> int:
    """Logical AND of two or more input bits."""
    if len(bits) < 2:
        raise ConfigurationError("and_gate needs at least 2 inputs")
    out = 1
    for b in bits:
        out &= _check_bit(b)
    return out


def or_gate(bits) -> int:
    """Logical OR of two or more input bits."""
    if len(bits) < 2:
        raise ConfigurationError("or_gate needs at least 2 inputs")
    out = 0
    for b in bits:
        out |= _check_bit(b)
    return out


def not_gate(bit: int) -> int:
    return 1 - _check_bit(bit)


# Maximal-length feedback tap positions (1-based, position `width` is the
# bit shifted in last). Every listed set yields the full period 2**width - 1.
MAXIMAL_TAPS: dict[int, tuple[int, ...]] = {
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    10: (10, 7),
    12: (12, 11, 10, 4),
}


class Lfsr:
    """Fibonacci linear-feedback shift register with parallel word read.

    The full width-bit state is read as one word per clock bin and the
    register then shifts by a single bit, so consecutive words overlap in
    width-1 bits. The all-zero state is unreachable and rejected as a seed;
    the word therefore cycles through every value in [1, 2**width - 1].
    """

    def __init__(self, width: int, seed: int = 1):
        if width not in MAXIMAL_TAPS:
            raise ConfigurationError(
                f"no maximal tap set for width {width}; "
                f"supported widths: {sorted(MAXIMAL_TAPS)}"
            )
        self.width = int(width)
        self.taps = MAXIMAL_TAPS[width]
        self._mask = (1 << width) - 1
        if not isinstance(seed, int) or not 1 <= seed <= self._mask:
            raise InputDomainError(
                f"lfsr seed must be an integer in [1, {self._mask}], got {seed!r}"
            )
        self.state = seed

    def step(self) -> int:
        """Shift one bit, feeding back the XOR of the tap bits. Returns the
        new state word."""
        fb = 0
        for t in self.taps:
            fb ^= self.state >> (t - 1)
        fb &= 1
        self.state = ((self.state << 1) & self._mask) | fb
        return self.state

    def read_and_step(self) -> int:
        """Word visible during the current bin, advancing the register after."""
        word = self.state
        self.step()
        return word


class Trff:
    """Toggle flip-flop clocked by a fair coin.

    With t_input = 1 the output flips with probability 1/2 (one fresh
    unbiased bit per opportunity); with t_input = 0 it holds. Held at
    t_input = 1 the output sequence is i.i.d. unbiased bits.
    """

    def __init__(self, rng: np.random.Generator, q: int = 0):
        self.rng = rng
        self.q = _check_bit(q, "q")

    def step(self, t_input: int) -> int:
        if _check_bit(t_input, "t_input"):
            if self.rng.integers(0, 2):
                self.q ^= 1
        return self.q


class SaturatingCounter:
    """Up/down counter clamped to [0, 2**width - 1].

    update applies the net change inc - dec and then clamps, so a
    simultaneous up and down pulse cancels exactly and pulses are only
    lost at the range ends.
    """

    def __init__(self, width: int, value: int = 0):
        if not isinstance(width, int) or width < 1:
            raise ConfigurationError(f"counter width must be >= 1, got {width!r}")
        self.width = width
        self.max_value = (1 << width) - 1
        if not isinstance(value, int) or not 0 <= value <= self.max_value:
            raise InputDomainError(
                f"counter value must lie in [0, {self.max_value}], got {value!r}"
            )
        self.value = value

    def update(self, inc: int, dec: int) -> int:
        v = self.value + _check_bit(inc, "inc") - _check_bit(dec, "dec")
        if v < 0:
            v = 0
        elif v > self.max_value:
            v = self.max_value
        self.value = v
        return v

    def msb(self) -> int:
        """Most significant bit of the current count."""
        return (self.value >> (self.width - 1)) & 1


def magnitude_less(r: int, c: int, width: int | None = None) -> int:
    """Strict magnitude comparison: 1 iff r < c.

    With r drawn uniformly from [0, 2**width - 1] the output probability
    is c / 2**width.
    """
    if not isinstance(r, (int, np.integer)) or not isinstance(c, (int, np.integer)):
        raise InputDomainError("magnitude_less expects integer operands")
    if r < 0 or c < 0:
        raise InputDomainError("magnitude_less operands must be non-negative")
    if width is not None:
        top = (1 << width) - 1
        if r > top or c > top:
            raise InputDomainError(
                f"magnitude_less operands must lie in [0, {top}] for width {width}"
            )
    return int(r < c)


def uniform_word(width: int, rng: np.random.Generator) -> int:
    """One uniform word from [0, 2**width - 1]."""
    if not isinstance(width, int) or width < 1:
        raise ConfigurationError(f"word width must be >= 1, got {width!r}")
    return int(rng.integers(0, 1 << width))


def uniform_words(width: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Block form of uniform_word; same draws as repeated single calls."""
    if not isinstance(width, int) or width < 1:
        raise ConfigurationError(f"word width must be >= 1, got {width!r}")
    return rng.integers(0, 1 << width, size=size, dtype=np.int64)
