"""Sweeps, randomness metrics and the exact counter-chain oracle.

Three tool groups live here:

* sweep(): run a circuit over a (p0, p1) grid and map its error against
  the ideal transfer function.
* randomness_report(): autocorrelations, run-length histograms and
  chi-square tests of a pulse train against the i.i.d. reference. For an
  ideal train the run lengths are geometric, the digitized counterpart
  of exponential inter-pulse intervals.
* build_chain() / stationary_output(): the counter circuits are exactly
  birth-death Markov chains over the counter value, so their stationary
  output rate can be solved for in closed form and used as ground truth.
  Circuits holding LFSR state are excluded: the register sequence is
  deterministic, not i.i.d., so a chain over the counter alone does not
  model them exactly.

asymptotic_variance() solves the Poisson equation on the (counter,
output-bit) pair chain and returns the asymptotic per-step variance of
the time-average rate estimator. Feedback outputs are strongly
correlated across bins, so their effective variance can exceed the
Bernoulli bound p(1-p) by orders of magnitude; this quantifies it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as _scipy_stats

from .circuits import CIRCUIT_KINDS, Circuit, make_circuit, run_circuit
from .core import (
    Bitstream,
    ConfigurationError,
    InputDomainError,
    PulseError,
    SimulationConfig,
    derive_seed,
    validate_probability,
)

__all__ = [
    "SweepResult",
    "grid_values",
    "sweep",
    "ChiSquareTest",
    "RandomnessReport",
    "randomness_report",
    "OracleUnsupportedError",
    "OracleError",
    "ChainSpec",
    "build_chain",
    "stationary_distribution",
    "stationary_output",
    "asymptotic_variance",
    "comparator_transition_width",
]

_MIN_REPORT_LENGTH = 10_000
_MAX_ORACLE_BITS = 10


# ---------------------------------------------------------------------------
# Transfer-function sweeps


def grid_values(steps: int) -> list[float]:
    """Evenly spaced grid (i+1)/(steps+1), e.g. 19 -> 0.05..0.95."""
    if not isinstance(steps, int) or steps < 2:
        raise ConfigurationError(f"steps must be an integer >= 2, got {steps!r}")
    return [(i + 1) / (steps + 1) for i in range(steps)]


@dataclass(eq=False)
class SweepResult:
    """Grid of estimates and errors for one circuit kind.

    estimates[i, j] is the cell at p0 = p0_values[i], p1 = p1_values[j].
    rel_errors is NaN where |ideal| <= 0.05, where relative error is
    not readable.
    """

    kind: str
    bits: int | None
    p0_values: np.ndarray
    p1_values: np.ndarray
    estimates: np.ndarray
    ideals: np.ndarray
    abs_errors: np.ndarray
    rel_errors: np.ndarray
    mean_abs_error: float
    max_abs_error: float
    argmax_index: tuple[int, int]
    argmax_cell: tuple[float, float]


def sweep(
    kind: str,
    grid: Sequence[float],
    config: SimulationConfig,
    *,
    bits: int | None = None,
) -> SweepResult:
    """Run a 2-input circuit over every (p0, p1) grid cell.

    Cells are independent runs with seeds derived from config.seed, so
    the result does not depend on evaluation order and cells can be
    distributed if needed.
    """
    values = [validate_probability(p, "grid value") for p in grid]
    if not values:
        raise ConfigurationError("empty sweep grid")
    n = len(values)
    estimates = np.zeros((n, n))
    ideals = np.zeros((n, n))
    probe = make_circuit(kind, bits=bits)
    if probe.n_inputs != 2:
        raise ConfigurationError(f"sweep needs a 2-input circuit, {kind} has {probe.n_inputs}")
    for i, p0 in enumerate(values):
        for j, p1 in enumerate(values):
            cell_seed = derive_seed(config.seed, f"sweep:{kind}:{i}:{j}")
            cell_config = SimulationConfig(
                cycles=config.cycles, warmup=config.warmup, seed=cell_seed
            )
            circuit = make_circuit(kind, bits=bits, seed=cell_seed)
            stream = run_circuit(circuit, (p0, p1), cell_config)
            estimates[i, j] = stream.estimate()
            ideals[i, j] = circuit.ideal((p0, p1))
    abs_errors = np.abs(estimates - ideals)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_errors = np.where(np.abs(ideals) > 0.05, abs_errors / np.abs(ideals), np.nan)
    flat = int(np.argmax(abs_errors))
    idx = (flat // n, flat % n)
    return SweepResult(
        kind=kind,
        bits=bits,
        p0_values=np.array(values),
        p1_values=np.array(values),
        estimates=estimates,
        ideals=ideals,
        abs_errors=abs_errors,
        rel_errors=rel_errors,
        mean_abs_error=float(abs_errors.mean()),
        max_abs_error=float(abs_errors.max()),
        argmax_index=idx,
        argmax_cell=(values[idx[0]], values[idx[1]]),
    )


# ---------------------------------------------------------------------------
# Randomness metrics


@dataclass(frozen=True)
class ChiSquareTest:
    statistic: float
    dof: int
    quantile_999: float
    exceeds: bool


@dataclass(eq=False)
class RandomnessReport:
    """Deviation of a pulse train from the i.i.d. Bernoulli reference."""

    length: int
    rate: float
    max_lag: int
    autocorrelations: list[float] | None  # r_1..r_K; None when degenerate
    iid_bound: float                      # 4/sqrt(M)
    one_run_histogram: dict[int, int]
    zero_run_histogram: dict[int, int]
    longest_one_run: int
    longest_zero_run: int
    chi2_zero_runs: ChiSquareTest | None
    chi2_one_runs: ChiSquareTest | None
    degenerate: bool
    notes: list[str]


def _run_lengths(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lengths of maximal runs of ones and zeros, in stream order."""
    change = np.flatnonzero(bits[1:] != bits[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [len(bits)]))
    lengths = ends - starts
    values = bits[starts]
    return lengths[values == 1], lengths[values == 0]


def _histogram(lengths: np.ndarray) -> dict[int, int]:
    uniq, counts = np.unique(lengths, return_counts=True)
    return {int(u): int(c) for u, c in zip(uniq, counts)}


def _geometric_chi_square(
    hist: Mapping[int, int], n_runs: int, stop_prob: float
) -> ChiSquareTest | None:
    """Chi-square of run lengths against geometric(stop_prob) on 1,2,...

    Bins are pooled left to right until each holds expected count >= 5;
    the final bin is the open tail. Needs at least two bins and a
    non-trivial stop probability.
    """
    if n_runs < 25 or not (0.0 < stop_prob < 1.0):
        return None
    # bin boundaries over run length l = 1, 2, ...
    bins: list[tuple[int, int | None, float]] = []  # (lo, hi_exclusive|None, expected)
    lo = 1
    acc = 0.0
    l = 1
    # mass of geometric at l: stop_prob * (1-stop_prob)**(l-1)
    while True:
        tail_mass = (1.0 - stop_prob) ** (l - 1)  # P(L >= l)
        if tail_mass * n_runs < 5.0:
            break
        acc += stop_prob * (1.0 - stop_prob) ** (l - 1) * n_runs
        if acc >= 5.0:
            bins.append((lo, l + 1, acc))
            lo = l + 1
            acc = 0.0
        l += 1
        if l > 10_000_000:  # pragma: no cover
            break
    tail_expected = (1.0 - stop_prob) ** (lo - 1) * n_runs
    bins.append((lo, None, tail_expected))
    if len(bins) >= 2 and bins[-1][2] < 5.0:
        lo_prev, _, _ = bins[-2]
        merged_expected = (1.0 - stop_prob) ** (lo_prev - 1) * n_runs
        bins[-2:] = [(lo_prev, None, merged_expected)]
    if len(bins) < 2:
        return None
    statistic = 0.0
    for lo, hi, expected in bins:
        if hi is None:
            observed = sum(c for length, c in hist.items() if length >= lo)
        else:
            observed = sum(c for length, c in hist.items() if lo <= length < hi)
        statistic += (observed - expected) ** 2 / expected
    dof = len(bins) - 1
    quantile = float(_scipy_stats.chi2.ppf(0.999, dof))
    return ChiSquareTest(
        statistic=float(statistic),
        dof=dof,
        quantile_999=quantile,
        exceeds=bool(statistic > quantile),
    )


def randomness_report(stream: Bitstream | np.ndarray, max_lag: int = 16) -> RandomnessReport:
    """Measure how far a pulse train is from i.i.d. pulses at its rate."""
    bits = stream.bits if isinstance(stream, Bitstream) else np.asarray(stream)
    m = len(bits)
    if m < _MIN_REPORT_LENGTH:
        raise InputDomainError(
            f"stream too short: need at least {_MIN_REPORT_LENGTH} bins, got {m}"
        )
    if not isinstance(max_lag, int) or not (1 <= max_lag <= 64):
        raise ConfigurationError(f"max_lag must be in 1..64, got {max_lag!r}")
    ones = int(bits.sum())
    rate = ones / m
    iid_bound = 4.0 / np.sqrt(m)
    one_runs, zero_runs = _run_lengths(bits)
    one_hist = _histogram(one_runs)
    zero_hist = _histogram(zero_runs)
    notes: list[str] = []
    degenerate = ones == 0 or ones == m
    if degenerate:
        notes.append("degenerate stream: constant output, chi-square omitted")
        return RandomnessReport(
            length=m,
            rate=rate,
            max_lag=max_lag,
            autocorrelations=None,
            iid_bound=iid_bound,
            one_run_histogram=one_hist,
            zero_run_histogram=zero_hist,
            longest_one_run=int(one_runs.max()) if one_runs.size else 0,
            longest_zero_run=int(zero_runs.max()) if zero_runs.size else 0,
            chi2_zero_runs=None,
            chi2_one_runs=None,
            degenerate=True,
            notes=notes,
        )
    centered = bits.astype(np.float64) - rate
    denom = float(np.dot(centered, centered))
    autocorr = [
        float(np.dot(centered[:-k], centered[k:]) / denom) for k in range(1, max_lag + 1)
    ]
    chi2_zero = _geometric_chi_square(zero_hist, len(zero_runs), rate)
    chi2_one = _geometric_chi_square(one_hist, len(one_runs), 1.0 - rate)
    if chi2_zero is None:
        notes.append("too few zero runs for a chi-square test")
    if chi2_one is None:
        notes.append("too few one runs for a chi-square test")
    return RandomnessReport(
        length=m,
        rate=rate,
        max_lag=max_lag,
        autocorrelations=autocorr,
        iid_bound=iid_bound,
        one_run_histogram=one_hist,
        zero_run_histogram=zero_hist,
        longest_one_run=int(one_runs.max()) if one_runs.size else 0,
        longest_zero_run=int(zero_runs.max()) if zero_runs.size else 0,
        chi2_zero_runs=chi2_zero,
        chi2_one_runs=chi2_one,
        degenerate=False,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Exact counter-chain oracle


class OracleUnsupportedError(PulseError):
    """The requested kind has no exact counter-chain model."""


class OracleError(PulseError):
    """The stationary solve failed its residual check."""


@dataclass(eq=False)
class ChainSpec:
    """Exact birth-death chain of one counter circuit at fixed inputs.

    matrix[c, c'] is the one-bin counter transition probability with the
    same intra-bin order as the simulator (output drawn from the state
    at bin start, then net update, then clamp). out_probs[c] is the
    probability of an output pulse in a bin starting at counter value c.
    cond_matrices[y][c, c'] conditions the transition on that bin's
    output bit y; rows where P(output=y) = 0 fall back to the
    unconditional row so every row remains stochastic.
    """

    kind: str
    bits: int
    p0: float
    p1: float
    matrix: np.ndarray
    out_probs: np.ndarray
    init_state: int
    cond_matrices: tuple[np.ndarray, np.ndarray]


def _tridiagonal(up: np.ndarray, down: np.ndarray) -> np.ndarray:
    """Stochastic matrix from per-state up/down probabilities, clamped."""
    dim = up.shape[0]
    matrix = np.zeros((dim, dim))
    for c in range(dim):
        u = up[c] if c + 1 < dim else 0.0
        d = down[c] if c > 0 else 0.0
        if c + 1 < dim:
            matrix[c, c + 1] = u
        if c > 0:
            matrix[c, c - 1] = d
        matrix[c, c] = 1.0 - u - d
    return matrix


def build_chain(kind: str, bits: int, p0: float, p1: float) -> ChainSpec:
    """Exact per-bin transition model for a counter-feedback circuit."""
    if kind in ("div-lfsr", "sub-lfsr"):
        raise OracleUnsupportedError("oracle unsupported for pseudorandom state")
    if kind not in ("div-trff", "div-counter", "sub-counter", "sub-trff", "comparator"):
        raise OracleUnsupportedError(
            f"oracle models counter-feedback circuits only, got {kind!r}"
        )
    if not isinstance(bits, int) or not (1 <= bits <= _MAX_ORACLE_BITS):
        raise ConfigurationError(
            f"oracle counter width must be in 1..{_MAX_ORACLE_BITS}, got {bits!r}"
        )
    p0 = validate_probability(p0, "p0")
    p1 = validate_probability(p1, "p1")
    dim = 1 << bits
    states = np.arange(dim, dtype=np.float64)
    g = states / dim  # divider feedback weight C / 2**bits

    if kind in ("div-trff", "sub-trff"):
        # z ~ Bernoulli(g); counter takes inc=a, dec=z&b
        up = p0 * (1.0 - g * p1)
        down = (1.0 - p0) * g * p1
        init = dim // 2
        if kind == "div-trff":
            out = g.copy()
        else:
            out = (1.0 - g) * p1
        # conditioned on the divider pulse z (y for div-trff): z=1 makes
        # dec=b, z=0 blocks dec entirely
        up_z1 = np.full(dim, p0 * (1.0 - p1))
        down_z1 = np.full(dim, p1 * (1.0 - p0))
        up_z0 = np.full(dim, p0)
        down_z0 = np.zeros(dim)
        if kind == "div-trff":
            cond = (_tridiagonal(up_z0, down_z0), _tridiagonal(up_z1, down_z1))
        else:
            # output (not z) and b: y=1 means z=0 and b=1 so dec=0;
            # y=0 mixes (z,b) in {(0,0),(1,0),(1,1)}
            up_y1 = np.full(dim, p0)
            down_y1 = np.zeros(dim)
            p_y0 = 1.0 - (1.0 - g) * p1
            with np.errstate(divide="ignore", invalid="ignore"):
                dec_given_y0 = np.where(p_y0 > 0, g * p1 / p_y0, 0.0)
            up_y0 = p0 * (1.0 - dec_given_y0)
            down_y0 = (1.0 - p0) * dec_given_y0
            fallback = p_y0 <= 0
            up_y0 = np.where(fallback, up, up_y0)
            down_y0 = np.where(fallback, down, down_y0)
            cond = (_tridiagonal(up_y0, down_y0), _tridiagonal(up_y1, down_y1))
    elif kind == "div-counter":
        z = (states > 0).astype(np.float64)
        up = p0 * (1.0 - z * p1)
        down = (1.0 - p0) * z * p1
        init = 0
        out = z.copy()
        matrix = _tridiagonal(up, down)
        cond = (matrix, matrix)  # output is a function of the state
    elif kind == "sub-counter":
        # paired pulses cancel; c=0 turns the lone subtrahend pulse into
        # an output pulse instead of a decrement
        up = np.full(dim, p0 * (1.0 - p1))
        down = np.where(states > 0, (1.0 - p0) * p1, 0.0)
        init = 0
        out = np.where(states == 0, (1.0 - p0) * p1, 0.0)
        up_y1 = np.zeros(dim)       # output bin: a=0, b=1 at c=0, counter holds
        down_y1 = np.zeros(dim)
        p_y0 = 1.0 - out
        with np.errstate(divide="ignore", invalid="ignore"):
            up_y0 = np.where(p_y0 > 0, up / p_y0, 0.0)
        down_y0 = down.copy()  # only possible when c>0 where y=0 is certain
        fallback = p_y0 <= 0
        up_y0 = np.where(fallback, up, up_y0)
        cond = (_tridiagonal(up_y0, down_y0), _tridiagonal(up_y1, down_y1))
    else:  # comparator
        up = np.full(dim, p0 * (1.0 - p1))
        down = np.full(dim, (1.0 - p0) * p1)
        init = dim // 2
        out = (states >= dim // 2).astype(np.float64)
        matrix = _tridiagonal(up, down)
        cond = (matrix, matrix)
    if kind in ("div-trff", "sub-trff", "sub-counter"):
        matrix = _tridiagonal(up, down)
    return ChainSpec(
        kind=kind,
        bits=bits,
        p0=p0,
        p1=p1,
        matrix=matrix,
        out_probs=out,
        init_state=init,
        cond_matrices=cond,
    )


def _reachable_states(matrix: np.ndarray, start: int) -> np.ndarray:
    dim = matrix.shape[0]
    seen = np.zeros(dim, dtype=bool)
    frontier = [start]
    seen[start] = True
    while frontier:
        c = frontier.pop()
        for nxt in np.flatnonzero(matrix[c] > 0.0):
            if not seen[nxt]:
                seen[nxt] = True
                frontier.append(int(nxt))
    return np.flatnonzero(seen)


def stationary_distribution(chain: ChainSpec) -> np.ndarray:
    """Stationary law of the counter, as seen from the initial state.

    The solve is restricted to the states reachable from init_state, so
    degenerate inputs (p0 or p1 in {0, 1}) resolve to the absorbing or
    frozen part of the chain instead of a singular system. Within an
    irreducible reachable interval the chain is birth-death, so the
    detailed-balance product form applies and is exact to machine
    precision; otherwise a dense least-squares solve covers the
    absorbing cases.
    """
    matrix = chain.matrix
    reach = _reachable_states(matrix, chain.init_state)
    sub = matrix[np.ix_(reach, reach)]
    n = sub.shape[0]
    pi_sub = _birth_death_stationary(sub)
    if pi_sub is None:
        system = np.vstack([sub.T - np.eye(n), np.ones((1, n))])
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        pi_sub, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        pi_sub = np.clip(pi_sub, 0.0, None)
        pi_sub /= pi_sub.sum()
    residual = float(np.max(np.abs(pi_sub @ sub - pi_sub)))
    if residual > 1e-9:
        raise OracleError(f"stationary solve residual {residual:.3e} too large")
    pi = np.zeros(matrix.shape[0])
    pi[reach] = pi_sub
    return pi


def _birth_death_stationary(sub: np.ndarray) -> np.ndarray | None:
    """Detailed-balance solution pi(c+1) up(c) ... = pi(c) down(c+1).

    Valid only when every up and down step inside the interval is
    possible (irreducible); returns None otherwise. Log-space products
    keep extreme state-occupation ratios from overflowing.
    """
    n = sub.shape[0]
    if n == 1:
        return np.ones(1)
    up = np.diag(sub, k=1)
    down = np.diag(sub, k=-1)
    if np.any(up <= 0.0) or np.any(down <= 0.0):
        return None
    log_pi = np.concatenate(([0.0], np.cumsum(np.log(up) - np.log(down))))
    pi = np.exp(log_pi - log_pi.max())
    return pi / pi.sum()


def stationary_output(chain: ChainSpec) -> float:
    """Exact long-run output rate of the modeled circuit."""
    pi = stationary_distribution(chain)
    return float(pi @ chain.out_probs)


def asymptotic_variance(chain: ChainSpec) -> float:
    """Asymptotic variance of the output rate estimator, per step.

    The output bit and the next counter value are drawn jointly within a
    bin, so (counter, output) is the Markov pair chain; solving its
    Poisson equation gives sigma^2 such that the M-bin average has
    variance ~ sigma^2 / M. For i.i.d. output this reduces to p(1-p);
    counter feedback can push it far higher.
    """
    pi_c = stationary_distribution(chain)
    t0, t1 = chain.cond_matrices
    out = chain.out_probs
    dim = out.shape[0]
    size = 2 * dim

    # pair state s = 2c + y
    pair = np.zeros((size, size))
    for y, t_y in ((0, t0), (1, t1)):
        weight_next = np.empty((dim, 2))
        weight_next[:, 1] = out
        weight_next[:, 0] = 1.0 - out
        block = t_y[:, :, None] * weight_next[None, :, :]  # (c, c', y')
        pair[y::2, 0::2] = block[:, :, 0]
        pair[y::2, 1::2] = block[:, :, 1]

    pi_pair = np.zeros(size)
    pi_pair[0::2] = pi_c * (1.0 - out)
    pi_pair[1::2] = pi_c * out

    f = np.zeros(size)
    f[1::2] = 1.0
    mu = float(pi_pair @ f)
    h = f - mu
    # fundamental-matrix solve: (I - K + 1 pi^T) u = h
    system = np.eye(size) - pair + np.outer(np.ones(size), pi_pair)
    u, *_ = np.linalg.lstsq(system, h, rcond=None)
    sigma2 = float(pi_pair @ (2.0 * h * u - h * h))
    return max(sigma2, 0.0)


def comparator_transition_width(
    bits: int,
    *,
    p1: float = 0.5,
    step: float = 0.01,
    low: float = 0.1,
    high: float = 0.9,
) -> float:
    """Width of the comparator's low->high transition in p0, at fixed p1.

    Scans p0 over multiples of step via the exact oracle and linearly
    interpolates the two crossing points. The stationary output rate is
    monotone in p0, so the crossings are unique.
    """
    if not (0.0 < low < high < 1.0):
        raise ConfigurationError(f"need 0 < low < high < 1, got {low}, {high}")
    points = np.arange(step, 1.0, step)
    rates = np.array(
        [stationary_output(build_chain("comparator", bits, float(p0), p1)) for p0 in points]
    )
    x_low = _crossing(points, rates, low)
    x_high = _crossing(points, rates, high)
    return float(x_high - x_low)


def _crossing(xs: np.ndarray, ys: np.ndarray, level: float) -> float:
    above = np.flatnonzero(ys >= level)
    if above.size == 0:
        return float(xs[-1])
    k = int(above[0])
    if k == 0:
        return float(xs[0])
    x0, x1 = xs[k - 1], xs[k]
    y0, y1 = ys[k - 1], ys[k]
    if y1 == y0:  # pragma: no cover
        return float(x1)
    return float(x0 + (level - y0) * (x1 - x0) / (y1 - y0))
