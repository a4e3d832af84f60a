"""Tests for the expression parser, compiler, and netlist evaluator."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import randpulse as rp
from randpulse import (
    CompileError,
    CompileOptions,
    ExpressionError,
    SimulationConfig,
    compile_expression,
    evaluate,
    output_stream,
    parse,
)
from randpulse.core import ConfigurationError, InputDomainError
from randpulse.netlist import Add, Const, Div, Mul, Sub, Var


class TestParser:
    def test_single_var(self):
        assert parse("a") == Var("a")

    def test_single_const(self):
        assert parse("0.25") == Const(0.25)

    def test_precedence(self):
        assert parse("a+b*c") == Add(Var("a"), Mul((Var("b"), Var("c"))))
        assert parse("a-b/c") == Sub(Var("a"), Div(Var("b"), Var("c")))

    def test_left_association(self):
        assert parse("a-b-c") == Sub(Sub(Var("a"), Var("b")), Var("c"))
        assert parse("a+b+c") == Add(Add(Var("a"), Var("b")), Var("c"))

    def test_product_chains_flatten(self):
        three = Mul((Var("a"), Var("b"), Var("c")))
        assert parse("a*b*c") == three
        assert parse("a*(b*c)") == three
        assert parse("(a*b)*c") == three

    def test_parens_override(self):
        assert parse("(a+b)*c") == Mul((Add(Var("a"), Var("b")), Var("c")))

    def test_whitespace_tolerated(self):
        assert parse("  a +\tb ") == Add(Var("a"), Var("b"))

    def test_identifier_charset(self):
        assert parse("x_1*y2") == Mul((Var("x_1"), Var("y2")))

    @pytest.mark.parametrize("text,pos", [
        ("a+", 2),
        ("", 0),
        (")", 0),
        ("a b", 2),
        ("a@b", 1),
        ("(a+b", 4),
    ])
    def test_syntax_errors_carry_position(self, text, pos):
        with pytest.raises(ExpressionError) as exc:
            parse(text)
        assert exc.value.position == pos

    def test_literal_above_one_rejected(self):
        with pytest.raises(ExpressionError, match=r"literal 1\.2"):
            parse("1.2*a")

    def test_ast_nodes_are_immutable(self):
        node = parse("a+b")
        with pytest.raises(AttributeError):
            node.left = Var("c")


# small expression ASTs rendered with full parens must survive a round trip
_names = st.sampled_from(["a", "b", "c"])
_consts = st.sampled_from([0.0, 0.25, 0.5, 1.0])
_leaf = st.one_of(_names.map(Var), _consts.map(Const))


def _binary(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: Add(*t)),
        st.tuples(children, children).map(lambda t: Sub(*t)),
        st.tuples(children, children).map(lambda t: Div(*t)),
        st.tuples(children, children).map(lambda t: Mul((t[0], t[1]))),
    )


_expr = st.recursive(_leaf, _binary, max_leaves=8)


def _render(node):
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Mul):
        return "(" + "*".join(_render(c) for c in node.children) + ")"
    sym = {Add: "+", Sub: "-", Div: "/"}[type(node)]
    return f"({_render(node.left)}{sym}{_render(node.right)})"


def _flatten(node):
    # parsing re-flattens nested products, so normalize before comparing
    if isinstance(node, Mul):
        children = []
        for c in node.children:
            c = _flatten(c)
            children.extend(c.children if isinstance(c, Mul) else [c])
        return Mul(tuple(children))
    if isinstance(node, (Add, Sub, Div)):
        return type(node)(_flatten(node.left), _flatten(node.right))
    return node


@given(_expr)
@settings(max_examples=200, deadline=None)
def test_parse_render_round_trip(ast):
    assert parse(_render(ast)) == _flatten(ast)


class TestCompile:
    def test_plain_product(self):
        nl = compile_expression("x*y")
        assert nl.scale == 0
        assert nl.node(nl.output_id).op == "mul"
        assert nl.var_names == ["x", "y"]

    def test_add_doubles_scale(self):
        nl = compile_expression("x+y")
        assert nl.scale == 1
        assert nl.node(nl.output_id).op == "mux-add"

    def test_balanced_add_needs_no_padding(self):
        # both children already sit at scale 1, so no constant is injected
        nl = compile_expression("(x+y)+(z+w)")
        assert nl.scale == 2
        assert all(n.op != "const" for n in nl.nodes)

    def test_unbalanced_add_pads_with_zero(self):
        nl = compile_expression("(x+y)+z")
        assert nl.scale == 2
        consts = [n for n in nl.nodes if n.op == "const"]
        assert len(consts) == 1 and consts[0].const_value == 0.0
        # the padding halves z, so the compiled value is exactly x+y+z
        assert nl.ideal_rates({"x": 0.8, "y": 0.4, "z": 0.2})[nl.output_id] * 4 == pytest.approx(1.4)

    def test_association_warning(self):
        nl = compile_expression("x+y+z")
        assert any("association order" in w for w in nl.warnings)
        assert not compile_expression("x+y").warnings

    def test_or_adder_warns_approximate(self):
        nl = compile_expression("x+y", CompileOptions(adder="or"))
        assert nl.scale == 0
        assert any("approximate" in w for w in nl.warnings)

    def test_or_adder_keeps_scale(self):
        nl = compile_expression("x*y+z*w", CompileOptions(adder="or"))
        assert nl.scale == 0

    def test_or_adder_cannot_absorb_scaled_children(self):
        with pytest.raises(CompileError):
            compile_expression("(x+y)+z", CompileOptions(adder="or"))

    def test_subtraction_requires_equal_scales(self):
        with pytest.raises(CompileError, match="scale mismatch"):
            compile_expression("(x+y)-z")

    def test_subtraction_of_equal_scales(self):
        nl = compile_expression("(x+y)-(z+w)")
        assert nl.scale == 1

    def test_divide_cancels_scale(self):
        nl = compile_expression("(x+y)/(z+w)")
        assert nl.scale == 0

    def test_divide_negative_scale_rejected(self):
        with pytest.raises(CompileError, match="negative divide scale"):
            compile_expression("x/(y+z)")

    def test_internal_divider_needs_declared_ranges(self):
        with pytest.raises(CompileError, match="range analysis"):
            compile_expression("(x/y)*z")

    def test_declared_ranges_unlock_internal_divider(self):
        nl = compile_expression(
            "(x/y)*z",
            CompileOptions(var_ranges={"x": (0.0, 0.2), "y": (0.8, 1.0)}),
        )
        assert nl.scale == 0

    def test_output_wire_exempt_from_capacity(self):
        nl = compile_expression("x/y")  # ratio may exceed 1 only at the output
        assert nl.node(nl.output_id).op == "div"

    def test_subtractor_wiring_order(self):
        # the subtracted amount drives the first port, the minuend the second
        nl = compile_expression("x-y")
        out = nl.node(nl.output_id)
        assert nl.node(out.inputs[0]).var_name == "y"
        assert nl.node(out.inputs[1]).var_name == "x"

    def test_divider_wiring_order(self):
        nl = compile_expression("x/y")
        out = nl.node(nl.output_id)
        assert nl.node(out.inputs[0]).var_name == "x"
        assert nl.node(out.inputs[1]).var_name == "y"

    def test_variant_selection(self):
        assert compile_expression("x-y").node("n2").variant == "counter"
        assert compile_expression("x-y").node("n2").bits == 4
        opts = CompileOptions(subtractor="lfsr")
        assert compile_expression("x-y", opts).node("n2").variant == "lfsr"
        assert compile_expression("x-y", opts).node("n2").bits == 8
        opts = CompileOptions(divider="trff", divider_bits=6)
        assert compile_expression("x/y", opts).node("n2").bits == 6

    def test_accepts_prebuilt_ast(self):
        nl = compile_expression(Mul((Var("x"), Var("y"))))
        assert nl.node(nl.output_id).op == "mul"

    def test_describe_lists_every_node(self):
        nl = compile_expression("x+y*z")
        desc = nl.describe()
        assert [d["id"] for d in desc] == [n.node_id for n in nl.nodes]

    def test_options_validation(self):
        with pytest.raises(ConfigurationError):
            CompileOptions(adder="bogus")
        with pytest.raises(ConfigurationError):
            CompileOptions(divider_bits=0)
        with pytest.raises(ConfigurationError):
            compile_expression("x/y", CompileOptions(divider="lfsr", divider_bits=9))

    def test_var_range_validation(self):
        with pytest.raises(ConfigurationError):
            CompileOptions(var_ranges={"x": (0.5, 0.2)})
        with pytest.raises(ConfigurationError):
            CompileOptions(var_ranges={"x": (-0.1, 0.5)})


class TestEvaluate:
    CFG = SimulationConfig(cycles=1 << 16, seed=3)

    def test_product(self):
        res = evaluate(compile_expression("x*y"), {"x": 0.5, "y": 0.5}, self.CFG)
        assert res.ideal_estimate == 0.25
        assert abs(res.estimate - 0.25) < 0.01

    def test_repeated_variable_draws_fresh_streams(self):
        # each occurrence is an independent source, so x*x estimates x**2
        res = evaluate(compile_expression("x*x"), {"x": 0.5}, self.CFG)
        assert abs(res.estimate - 0.25) < 0.01

    def test_scale_recovery(self):
        res = evaluate(compile_expression("x+y"), {"x": 0.8, "y": 0.4}, self.CFG)
        assert res.scale == 1
        assert res.value == res.estimate * 2
        assert abs(res.value - 1.2) < 0.02
        assert res.ideal_value == pytest.approx(1.2)

    def test_three_term_sum_recovers_value(self):
        res = evaluate(
            compile_expression("x+y+z"), {"x": 0.8, "y": 0.4, "z": 0.2}, self.CFG
        )
        assert res.scale == 2
        assert abs(res.value - 1.4) < 0.04

    def test_division(self):
        res = evaluate(compile_expression("x/y"), {"x": 0.3, "y": 0.75}, self.CFG)
        assert res.ideal_estimate == pytest.approx(0.4)
        assert abs(res.estimate - 0.4) < 0.02

    def test_subtraction(self):
        res = evaluate(compile_expression("x-y"), {"x": 0.9, "y": 0.2}, self.CFG)
        assert res.ideal_estimate == pytest.approx(0.7)
        assert abs(res.estimate - 0.7) < 0.02

    def test_node_rates_cover_all_wires(self):
        nl = compile_expression("x+y")
        res = evaluate(nl, {"x": 0.8, "y": 0.4}, self.CFG)
        assert set(res.node_rates) == {n.node_id for n in nl.nodes}
        assert abs(res.node_rates["n0"] - 0.8) < 0.01

    def test_deterministic(self):
        nl = compile_expression("(x+y)/(z+0.5)")
        binds = {"x": 0.3, "y": 0.5, "z": 0.4}
        a = evaluate(nl, binds, self.CFG)
        b = evaluate(nl, binds, self.CFG)
        assert a.estimate == b.estimate
        c = evaluate(nl, binds, SimulationConfig(cycles=1 << 16, seed=4))
        assert c.estimate != a.estimate

    def test_warmup_follows_widest_counter(self):
        res = evaluate(compile_expression("x/y"), {"x": 0.2, "y": 0.8}, self.CFG)
        assert res.warmup == 16 * 256
        res2 = evaluate(compile_expression("x*y"), {"x": 0.2, "y": 0.8}, self.CFG)
        assert res2.warmup == 0

    def test_warnings_propagate(self):
        res = evaluate(
            compile_expression("x+y+z"), {"x": 0.1, "y": 0.2, "z": 0.3}, self.CFG
        )
        assert any("association order" in w for w in res.warnings)

    def test_unbound_variable(self):
        with pytest.raises(InputDomainError, match="y"):
            evaluate(compile_expression("x*y"), {"x": 0.5}, self.CFG)

    def test_unknown_binding(self):
        with pytest.raises(InputDomainError, match="q"):
            evaluate(compile_expression("x*y"), {"x": 0.5, "y": 0.5, "q": 0.1}, self.CFG)

    def test_binding_outside_declared_range(self):
        nl = compile_expression(
            "(x/y)*z", CompileOptions(var_ranges={"x": (0.0, 0.2), "y": (0.8, 1.0)})
        )
        with pytest.raises(InputDomainError, match="x"):
            evaluate(nl, {"x": 0.5, "y": 0.9, "z": 0.5}, self.CFG)

    def test_binding_outside_unit_interval(self):
        with pytest.raises(InputDomainError):
            evaluate(compile_expression("x*y"), {"x": 0.5, "y": 1.5}, self.CFG)

    def test_output_stream_length(self):
        stream = output_stream(
            compile_expression("x+y"), {"x": 0.3, "y": 0.4},
            SimulationConfig(cycles=5000, seed=1),
        )
        assert len(stream) == 5000

    def test_constant_expression(self):
        res = evaluate(compile_expression("0.25"), {}, self.CFG)
        assert abs(res.estimate - 0.25) < 0.01


def test_compiled_sum_chain_is_value_exact_regardless_of_grouping():
    # padding makes both groupings compute the same value, unlike raw cells
    cfg = SimulationConfig(cycles=1 << 18, seed=5)
    binds = {"x": 0.8, "y": 0.4, "z": 0.2}
    left = evaluate(compile_expression("(x+y)+z"), binds, cfg)
    right = evaluate(compile_expression("x+(y+z)"), binds, cfg)
    assert left.ideal_value == pytest.approx(1.4)
    assert right.ideal_value == pytest.approx(1.4)
    assert abs(left.value - right.value) < 0.05
