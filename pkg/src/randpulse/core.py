"""Shared primitives: probabilities, bitstreams, seeded random substreams.

A value v in [0, 1] is carried by a random pulse train: one 0/1 sample per
clock bin, with P(bit = 1) = v in every bin. Time is normalized so that one
clock bin is one time unit. Everything downstream (circuits, netlists,
sweeps) builds on the types and helpers here.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PulseError",
    "InputDomainError",
    "ConfigurationError",
    "Bitstream",
    "SimulationConfig",
    "validate_probability",
    "substream",
    "derive_seed",
    "bernoulli_source_step",
    "bernoulli_array",
    "estimate_probability",
    "default_warmup",
]

_U64 = 0xFFFFFFFFFFFFFFFF


class PulseError(Exception):
    """Base class for all package errors."""


class InputDomainError(PulseError, ValueError):
    """An argument lies outside its documented domain."""


class ConfigurationError(PulseError, ValueError):
    """A circuit or simulation configuration is unusable."""


def validate_probability(p: float, name: str = "p") -> float:
    """Check that p is a real number in [0, 1] and return it as float."""
    if isinstance(p, (str, bytes)):
        raise InputDomainError(f"{name} must be a real number, got {p!r}")
    try:
        value = float(p)
    except (TypeError, ValueError):
        raise InputDomainError(f"{name} must be a real number, got {p!r}") from None
    if not np.isfinite(value) or value < 0.0 or value > 1.0:
        raise InputDomainError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def _element_key(element_id: str) -> int:
    digest = hashlib.blake2b(element_id.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(seed: int, element_id: str) -> np.random.Generator:
    """Return the random sub-stream owned by one named element.

    The generator is a counter-based Philox instance keyed by
    (seed, hash(element_id)), so distinct element ids give statistically
    independent streams and the same (seed, id) pair always reproduces the
    same stream. Adding or removing other elements never perturbs it.
    """
    if not isinstance(seed, int) or seed < 0:
        raise ConfigurationError(f"seed must be a non-negative int, got {seed!r}")
    if not element_id:
        raise ConfigurationError("element_id must be a non-empty string")
    key = np.array([seed & _U64, _element_key(element_id)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, label: str) -> int:
    """Derive a child seed for an independent task (e.g. one sweep cell)."""
    digest = hashlib.blake2b(
        f"{seed & _U64}:{label}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") >> 1  # keep it positive


def bernoulli_source_step(p: float, rng: np.random.Generator) -> int:
    """One clock bin of a Bernoulli pulse source: 1 with probability p."""
    p = validate_probability(p)
    return int(rng.random() < p)


def bernoulli_array(p: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """A block of `size` source bins. Identical in law and in actual draws
    to calling bernoulli_source_step `size` times on the same generator."""
    p = validate_probability(p)
    if size < 0:
        raise InputDomainError(f"size must be >= 0, got {size}")
    if p == 0.0:
        return np.zeros(size, dtype=np.uint8)
    if p == 1.0:
        return np.ones(size, dtype=np.uint8)
    return (rng.random(size) < p).astype(np.uint8)


@dataclass
class Bitstream:
    """A time-digitized random pulse train: one 0/1 sample per clock bin."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.ndim != 1:
            raise InputDomainError("a bitstream must be one-dimensional")
        if arr.size and np.any((arr != 0) & (arr != 1)):
            raise InputDomainError("bitstream samples must be 0 or 1")
        if arr.dtype != np.uint8:
            arr = arr.astype(np.uint8)
        self.bits = arr

    def __len__(self) -> int:
        return int(self.bits.size)

    def estimate(self) -> float:
        """Fraction of bins carrying a pulse, the estimate of the encoded value."""
        return estimate_probability(self)


def estimate_probability(stream: "Bitstream | np.ndarray") -> float:
    """Mean pulse rate of a stream. The standard error is sqrt(p(1-p)/M)
    for independent bins; feedback circuits can correlate bins and widen it."""
    bits = stream.bits if isinstance(stream, Bitstream) else np.asarray(stream)
    if bits.size == 0:
        raise InputDomainError("cannot estimate the rate of an empty stream")
    return float(bits.mean())


@dataclass(frozen=True)
class SimulationConfig:
    """How long to run and with what master seed.

    warmup=None lets each circuit pick its own settling time before
    measurement starts (16 * 2**bits bins for circuits with a counter of
    `bits` bits, zero for feedback-free circuits).
    """

    cycles: int
    warmup: int | None = None
    seed: int = 1

    def __post_init__(self) -> None:
        if not isinstance(self.cycles, int) or self.cycles < 1:
            raise ConfigurationError(
                f"cycles must be a positive integer, got {self.cycles!r}"
            )
        if self.warmup is not None and (
            not isinstance(self.warmup, int) or self.warmup < 0
        ):
            raise ConfigurationError(
                f"warmup must be None or a non-negative integer, got {self.warmup!r}"
            )
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigurationError(
                f"seed must be a non-negative integer, got {self.seed!r}"
            )


def default_warmup(counter_bits: int | None) -> int:
    """Settling time before measurement: 16 * 2**bits, or 0 without feedback."""
    if counter_bits is None:
        return 0
    return 16 << counter_bits
