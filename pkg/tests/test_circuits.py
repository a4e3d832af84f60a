"""Tests for the ten circuit kinds: semantics, determinism, wiring."""

import math

import numpy as np
import pytest

import randpulse as rp
from randpulse import CIRCUIT_KINDS, FEEDBACK_KINDS, SimulationConfig, make_circuit, run_circuit
from randpulse.core import ConfigurationError, InputDomainError, bernoulli_array, substream

ALL_KINDS = sorted(CIRCUIT_KINDS)


def _inputs_for(kind):
    return 3 if kind == "mul" else 2


class TestStepRunEquivalence:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_batch_run_matches_stepping(self, kind):
        # run() must be a pure vectorization of step(), bit for bit
        n_in = _inputs_for(kind)
        c_batch = make_circuit(kind, n_inputs=n_in, seed=42, element_id="eq")
        c_step = make_circuit(kind, n_inputs=n_in, seed=42, element_id="eq")
        rng = np.random.default_rng(5)
        xs = [rng.integers(0, 2, 2000).astype(np.uint8) for _ in range(n_in)]
        batch = c_batch.run(xs)
        single = np.array(
            [c_step.step(tuple(int(x[i]) for x in xs)) for i in range(2000)],
            dtype=np.uint8,
        )
        assert np.array_equal(batch, single)


class TestRates:
    # (kind, input rates, ideal) with inputs kept away from regions where
    # feedback estimators get noisy
    CASES = [
        ("mul", (0.6, 0.7), 0.42),
        ("or-add", (0.2, 0.3), 1 - 0.8 * 0.7),
        ("mux-add", (0.8, 0.4), 0.6),
        ("div-lfsr", (0.24, 0.8), 0.3),
        ("div-trff", (0.24, 0.8), 0.3),
        ("div-counter", (0.24, 0.8), 0.3),
        ("sub-lfsr", (0.2, 0.9), 0.7),
        ("sub-trff", (0.2, 0.9), 0.7),
        ("sub-counter", (0.2, 0.9), 0.7),
    ]

    @pytest.mark.parametrize("kind,probs,ideal", CASES)
    def test_rate_approaches_ideal(self, kind, probs, ideal):
        cycles = 1 << 18
        stream = run_circuit(make_circuit(kind, seed=7), probs, SimulationConfig(cycles=cycles, seed=7))
        # generous 8 sigma: feedback circuits have inflated estimator variance
        tol = 8 * math.sqrt(max(ideal * (1 - ideal), 0.01) / cycles)
        assert abs(stream.estimate() - ideal) < tol

    def test_ideal_functions(self):
        assert CIRCUIT_KINDS["mul"](n_inputs=3).ideal((0.5, 0.5, 0.5)) == 0.125
        assert make_circuit("div-counter").ideal((0.8, 0.4)) == 1.0  # ratio clips at 1
        assert make_circuit("sub-counter").ideal((0.9, 0.4)) == 0.0  # floor at 0
        assert make_circuit("comparator").ideal((0.7, 0.3)) == 1.0  # votes for the larger side
        assert make_circuit("comparator").ideal((0.3, 0.7)) == 0.0

    def test_mul_three_inputs(self):
        cycles = 1 << 16
        stream = run_circuit(
            make_circuit("mul", n_inputs=3, seed=9), (0.9, 0.8, 0.7),
            SimulationConfig(cycles=cycles, seed=9),
        )
        assert abs(stream.estimate() - 0.504) < 5 * math.sqrt(0.25 / cycles)

    def test_or_add_three_inputs(self):
        cycles = 1 << 16
        stream = run_circuit(
            make_circuit("or-add", n_inputs=3, seed=9), (0.1, 0.2, 0.15),
            SimulationConfig(cycles=cycles, seed=9),
        )
        ideal = 1 - 0.9 * 0.8 * 0.85
        assert abs(stream.estimate() - ideal) < 5 * math.sqrt(0.25 / cycles)

    def test_comparator_decides_sharply(self):
        cfg = SimulationConfig(cycles=1 << 16, seed=3)
        low = run_circuit(make_circuit("comparator", seed=3), (0.3, 0.7), cfg)
        high = run_circuit(make_circuit("comparator", seed=3), (0.7, 0.3), cfg)
        assert low.estimate() < 0.001
        assert high.estimate() > 0.999


class TestWiring:
    def test_sub_counter_passes_subtrahend_through_when_minuend_zero(self):
        # with a = 0 the counter never rises, so out tracks b exactly
        m = 4096
        b = bernoulli_array(0.6, m, substream(11, "b"))
        circ = make_circuit("sub-counter", seed=11)
        out = circ.run([np.zeros(m, dtype=np.uint8), b])
        assert np.array_equal(out, b)

    def test_divider_outputs_before_counter_update(self):
        # div-counter starts empty, so the very first bin cannot emit
        circ = make_circuit("div-counter", seed=1)
        first = circ.step((1, 1))
        assert first == 0

    def test_counter_initial_values(self):
        assert make_circuit("div-counter").counter_value == 0
        assert make_circuit("sub-counter").counter_value == 0
        assert make_circuit("div-trff").counter_value == 128
        assert make_circuit("div-lfsr").counter_value == 128
        assert make_circuit("sub-trff").counter_value == 128
        assert make_circuit("sub-lfsr").counter_value == 128
        assert make_circuit("comparator").counter_value == 128
        assert make_circuit("comparator", bits=4).counter_value == 8

    def test_counter_value_stays_bounded(self):
        circ = make_circuit("div-counter", bits=3, seed=2)
        rng = np.random.default_rng(0)
        xs = [rng.integers(0, 2, 5000).astype(np.uint8) for _ in range(2)]
        circ.run(xs)
        assert 0 <= circ.counter_value <= 7

    def test_default_widths(self):
        for kind in sorted(FEEDBACK_KINDS):
            expected = 4 if kind == "sub-counter" else 8
            assert make_circuit(kind).bits == expected, kind


class TestDeterminism:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_same_seed_same_output(self, kind):
        cfg = SimulationConfig(cycles=2048, seed=13)
        probs = (0.4,) * _inputs_for(kind)
        a = run_circuit(make_circuit(kind, n_inputs=_inputs_for(kind), seed=13), probs, cfg)
        b = run_circuit(make_circuit(kind, n_inputs=_inputs_for(kind), seed=13), probs, cfg)
        assert np.array_equal(a.bits, b.bits)

    def test_run_circuit_reseeds_from_config(self):
        # the config seed wins over the seed the circuit was built with
        cfg = SimulationConfig(cycles=2048, seed=99)
        a = run_circuit(make_circuit("mux-add", seed=1), (0.3, 0.9), cfg)
        b = run_circuit(make_circuit("mux-add", seed=2), (0.3, 0.9), cfg)
        assert np.array_equal(a.bits, b.bits)

    def test_reset_restores_state(self):
        circ = make_circuit("div-counter", seed=5)
        cfg = SimulationConfig(cycles=1024, seed=5)
        a = run_circuit(circ, (0.3, 0.6), cfg)
        b = run_circuit(circ, (0.3, 0.6), cfg)  # run_circuit resets internally
        assert np.array_equal(a.bits, b.bits)


class TestWarmup:
    def test_default_warmup_only_for_feedback(self):
        assert make_circuit("mul").default_warmup == 0
        assert make_circuit("or-add").default_warmup == 0
        assert make_circuit("mux-add").default_warmup == 0
        assert make_circuit("div-counter").default_warmup == 16 * 256
        assert make_circuit("sub-counter").default_warmup == 16 * 16

    def test_warmup_discards_transient(self):
        # the divider counter starts half full and must drain to its
        # operating point near p0/p1; without warmup the early bins leak in
        probs = (0.1, 0.9)
        cold = run_circuit(
            make_circuit("div-trff", seed=4), probs,
            SimulationConfig(cycles=256, warmup=0, seed=4),
        )
        warm = run_circuit(
            make_circuit("div-trff", seed=4), probs,
            SimulationConfig(cycles=256, warmup=4096, seed=4),
        )
        ideal = 0.1 / 0.9
        assert abs(warm.estimate() - ideal) < 0.05
        assert cold.estimate() > warm.estimate() + 0.1

    def test_explicit_zero_warmup_honoured(self):
        circ = make_circuit("div-counter", seed=6)
        out = run_circuit(circ, (1.0, 1.0), SimulationConfig(cycles=4, warmup=0, seed=6))
        assert out.bits[0] == 0  # empty counter blocks the first bin


class TestValidation:
    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError, match="unknown circuit kind"):
            make_circuit("nope")

    @pytest.mark.parametrize("kind", ["mul", "or-add", "mux-add"])
    def test_bits_rejected_without_counter(self, kind):
        with pytest.raises(ConfigurationError, match="no counter width"):
            make_circuit(kind, bits=8)

    def test_lfsr_width_must_have_taps(self):
        with pytest.raises(ConfigurationError):
            make_circuit("div-lfsr", bits=9)
        make_circuit("div-lfsr", bits=10)  # tabulated width is fine

    @pytest.mark.parametrize("kind", ["mux-add", "div-counter", "sub-trff", "comparator"])
    def test_fixed_arity_kinds_reject_extra_inputs(self, kind):
        with pytest.raises(ConfigurationError, match="exactly 2 inputs"):
            make_circuit(kind, n_inputs=3)

    def test_mul_needs_two_inputs(self):
        with pytest.raises(ConfigurationError):
            make_circuit("mul", n_inputs=1)

    def test_run_arity_mismatch(self):
        with pytest.raises(InputDomainError):
            run_circuit("mul", (0.5,), SimulationConfig(cycles=16))

    def test_run_rejects_bad_probability(self):
        with pytest.raises(InputDomainError):
            run_circuit("mul", (0.5, 1.5), SimulationConfig(cycles=16))

    def test_run_rejects_ragged_input_arrays(self):
        circ = make_circuit("mul", seed=1)
        with pytest.raises(InputDomainError):
            circ.run([np.zeros(8, dtype=np.uint8), np.zeros(9, dtype=np.uint8)])


def test_kind_table_is_complete():
    assert set(CIRCUIT_KINDS) == {
        "mul", "or-add", "mux-add",
        "div-lfsr", "div-trff", "div-counter",
        "sub-lfsr", "sub-trff", "sub-counter",
        "comparator",
    }
    assert FEEDBACK_KINDS == set(CIRCUIT_KINDS) - {"mul", "or-add", "mux-add"}
