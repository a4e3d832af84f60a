"""randpulse: random pulse train circuits, calculator and analysis tools.

A value v in [0, 1] is carried as the probability that a clock bin holds
a pulse. Logic gates then compute on values: AND multiplies, a
multiplexer averages, and small feedback circuits built from counters,
flip-flops and shift registers divide, subtract and compare. This
package simulates those circuits bin by bin, compiles arithmetic
expressions onto them, and checks them against exact Markov-chain
transfer functions.
"""

from .analysis import (
    ChainSpec,
    ChiSquareTest,
    OracleError,
    OracleUnsupportedError,
    RandomnessReport,
    SweepResult,
    asymptotic_variance,
    build_chain,
    comparator_transition_width,
    grid_values,
    randomness_report,
    stationary_distribution,
    stationary_output,
    sweep,
)
from .circuits import (
    CIRCUIT_KINDS,
    FEEDBACK_KINDS,
    Circuit,
    Comparator,
    DivCounter,
    DivLfsr,
    DivTrff,
    Mul,
    MuxAdd,
    OrAdd,
    SubCounter,
    SubDivLfsr,
    SubDivTrff,
    make_circuit,
    run_circuit,
)
from .core import (
    Bitstream,
    ConfigurationError,
    InputDomainError,
    PulseError,
    SimulationConfig,
    bernoulli_array,
    derive_seed,
    estimate_probability,
    substream,
)
from .elements import MAXIMAL_TAPS, Lfsr, SaturatingCounter, Trff
from .netlist import (
    CompileError,
    CompileOptions,
    EvalResult,
    ExpressionError,
    Netlist,
    compile_expression,
    evaluate,
    output_stream,
    parse,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "Bitstream",
    "SimulationConfig",
    "PulseError",
    "InputDomainError",
    "ConfigurationError",
    "bernoulli_array",
    "estimate_probability",
    "substream",
    "derive_seed",
    # elements
    "Lfsr",
    "Trff",
    "SaturatingCounter",
    "MAXIMAL_TAPS",
    # circuits
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
    "FEEDBACK_KINDS",
    "make_circuit",
    "run_circuit",
    # netlist
    "parse",
    "compile_expression",
    "evaluate",
    "output_stream",
    "CompileOptions",
    "Netlist",
    "EvalResult",
    "ExpressionError",
    "CompileError",
    # analysis
    "sweep",
    "grid_values",
    "SweepResult",
    "randomness_report",
    "RandomnessReport",
    "ChiSquareTest",
    "build_chain",
    "ChainSpec",
    "stationary_distribution",
    "stationary_output",
    "asymptotic_variance",
    "comparator_transition_width",
    "OracleUnsupportedError",
    "OracleError",
]
