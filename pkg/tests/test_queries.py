import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netpoly.compiler import ve_compile
from netpoly.generate import random_evidence, random_network
from netpoly.model import (
    Evidence, Indicator, Parameter, leaf_assignment, parse_evidence, parse_network,
)
from netpoly.oracle import canonical_eval, oracle_prob
from netpoly.queries import MetaParameter, QueryError, QuerySession, ZeroProbabilityError

seeds = st.integers(0, 2**32 - 1)

a, abar = Indicator("A", "true"), Indicator("A", "false")
b, bbar = Indicator("B", "true"), Indicator("B", "false")
ta, tabar = Parameter("A", "true"), Parameter("A", "false")
tab = Parameter("B", "true", (("A", "true"),))
tabarb = Parameter("B", "true", (("A", "false"),))


@pytest.fixture
def session(two_node, two_node_circuit):
    def make(text=""):
        return QuerySession(two_node_circuit, two_node, parse_evidence(text, two_node))
    return make


def cond(net, event, evidence):
    return oracle_prob(net, {**evidence.named(net), **event}) / oracle_prob(net, evidence)


@pytest.mark.parametrize("evidence, expected", [("A=true", 0.3), ("", 1.0), ("A=false,B=false", 0.7 * 0.2)])
def test_prob_evidence(session, evidence, expected):
    assert session(evidence).prob_evidence() == pytest.approx(expected, abs=1e-12)


def test_posterior_marginals(session):
    s = session("A=true")
    post = s.posterior_marginal("B")
    assert post["true"] == pytest.approx(0.1, abs=1e-12)
    assert post["false"] == pytest.approx(0.9, abs=1e-12)
    prior = session("").posterior_marginal("B")
    assert prior == pytest.approx({"true": 0.59, "false": 0.41}, abs=1e-12)
    assert sum(prior.values()) == pytest.approx(1.0)


def test_posterior_of_observed_variable_is_degenerate(session):
    assert session("A=true").posterior_marginal("A") == {"true": 1.0, "false": 0.0}


def test_what_if(session):
    s = session("A=true")
    assert s.what_if("A", "false") == pytest.approx(0.7, abs=1e-12)
    assert s.what_if("A", "true") == pytest.approx(s.prob_evidence(), abs=1e-12)
    assert s.what_if("B", "true") == pytest.approx(0.03, abs=1e-12)


def test_retraction(session):
    total, post = session("A=true").retraction("A")
    assert total == pytest.approx(1.0, abs=1e-12)
    assert post["false"] == pytest.approx(0.7, abs=1e-12)
    s = session("A=true")
    total, post = s.retraction("B")
    assert total == pytest.approx(s.prob_evidence())
    assert post == pytest.approx(s.posterior_marginal("B"))


def test_retraction_single_variable_gives_prior():
    net = parse_network(json.dumps({"variables": [{"name": "A", "values": ["x", "y", "z"]}],
                                    "cpts": [{"child": "A", "table": [0.2, 0.5, 0.3]}]}))
    s = QuerySession(ve_compile(net), net, parse_evidence("A=y", net))
    total, post = s.retraction("A")
    assert total == pytest.approx(1.0)
    assert post == pytest.approx({x: oracle_prob(net, {"A": x}) for x in "xyz"})


def test_family_marginal(session, two_node):
    s = session("A=true")
    assert s.family_marginal(tab) == pytest.approx(0.1, abs=1e-12)
    assert sum(s.family_marginals("B").values()) == pytest.approx(1.0)
    assert s.family_marginal(tabarb) == 0.0


def test_pair_marginal(session):
    s = session("")
    # d2F / dlambda_a dlambda_b = theta_a * theta_{b|a}
    assert s.pair_marginal(a, b) == pytest.approx(0.03, abs=1e-12)
    with pytest.raises(QueryError):
        s.pair_marginal(a, abar)
    assert s.pair_marginal(a, b, conditional=True) == pytest.approx(0.03)
    with pytest.raises(QueryError):
        session("A=true").pair_marginal(a, b, conditional=True)


def test_family_pair_marginal(session):
    s = session("")
    assert s.family_pair_marginal(ta, tab) == pytest.approx(0.03, abs=1e-12)
    assert s.family_pair_marginal(ta, tabarb) == 0.0
    with pytest.raises(QueryError):
        s.family_pair_marginal(ta, tabar)


def test_sensitivity_theta_two_node(session):
    # theta_abar held at .7: Pr(b) = (.1 t + .56) / (t + .7), derivative at t = .3 is -.49
    assert session("").sensitivity_theta(b, ta) == pytest.approx(-0.49, abs=1e-12)
    with pytest.raises(QueryError):
        session("B=true").sensitivity_theta(b, ta)


def test_sensitivity_meta_two_node(session):
    # theta_a = tau, theta_abar = 1 - tau: Pr(b) = .8 - .7 tau
    meta = MetaParameter("A", (), {"true": 1.0, "false": -1.0})
    assert session("").sensitivity_meta(b, meta) == pytest.approx(-0.7, abs=1e-12)
    zero = MetaParameter("A", (), {"true": 0.0, "false": 0.0})
    assert session("").sensitivity_meta(b, zero) == 0.0


def test_meta_parameter_warns_when_not_normalizing():
    with pytest.warns(UserWarning):
        MetaParameter("A", (), {"true": 1.0, "false": 0.0})
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        MetaParameter("A", (), {"true": 1.0, "false": -1.0})
    with pytest.raises(ValueError):
        MetaParameter("A", (), {"true": float("inf"), "false": 0.0})


def test_deterministic_target_has_zero_sensitivity():
    net = parse_network(json.dumps({
        "variables": [{"name": "A", "values": ["t", "f"]}, {"name": "B", "values": ["t", "f"]}],
        "cpts": [{"child": "A", "table": [0.4, 0.6]},
                 {"child": "B", "parents": ["A"], "table": [1.0, 0.0, 1.0, 0.0]}]}))
    s = QuerySession(ve_compile(net), net)
    assert s.sensitivity_theta(Indicator("B", "t"), Parameter("A", "t")) == pytest.approx(0.0, abs=1e-12)


def test_tweak_two_node(session, two_node):
    res = session("").tweak_binary(b, ta)
    assert res.feasible and res.direction == "increase"
    assert res.delta_min == pytest.approx(0.12857, abs=1e-5)
    assert res.theta_prime_min == pytest.approx(0.42857, abs=1e-5)
    # Pr(b) = .8 - .7 theta_a: boundary at 3/7
    assert res.theta_prime_min == pytest.approx(3 / 7, abs=1e-12)
    tweaked = two_node.with_parameters({ta: 3 / 7, tabar: 4 / 7})
    assert oracle_prob(tweaked, {"B": "true"}) == pytest.approx(oracle_prob(tweaked, {"B": "false"}), abs=1e-9)


def test_tweak_already_satisfied(session):
    res = session("").tweak_binary(bbar, ta)
    assert res.delta_min == 0.0 and res.direction == "none"


def test_tweak_infeasible():
    # Pr(b) = .6 + .3 theta_a >= .6 for every theta_a in [0, 1]
    net = parse_network(json.dumps({
        "variables": [{"name": "A", "values": ["t", "f"]}, {"name": "B", "values": ["t", "f"]}],
        "cpts": [{"child": "A", "table": [0.3, 0.7]},
                 {"child": "B", "parents": ["A"], "table": [0.9, 0.1, 0.6, 0.4]}]}))
    s = QuerySession(ve_compile(net), net)
    res = s.tweak_binary(Indicator("B", "t"), Parameter("A", "t"))
    assert not res.feasible
    assert res.theta_prime_min == pytest.approx(-1 / 3)


def test_tweak_infeasible_when_evidence_vanishes():
    # Y is independent of the observed E, and theta_{e=t} -> 1 drives Pr(E=f) to zero
    net = parse_network(json.dumps({
        "variables": [{"name": "Y", "values": ["t", "f"]}, {"name": "E", "values": ["t", "f"]}],
        "cpts": [{"child": "Y", "table": [0.9, 0.1]}, {"child": "E", "table": [0.95, 0.05]}]}))
    s = QuerySession(ve_compile(net), net, parse_evidence("E=f", net))
    res = s.tweak_binary(Indicator("Y", "t"), Parameter("E", "t"))
    assert not res.feasible
    assert s.tweak_binary(Indicator("Y", "t"), Parameter("Y", "t")).feasible


def test_tweak_rejects_non_binary_and_observed(session):
    net = parse_network(json.dumps({
        "variables": [{"name": "A", "values": ["x", "y", "z"]}, {"name": "B", "values": ["t", "f"]}],
        "cpts": [{"child": "A", "table": [0.2, 0.3, 0.5]},
                 {"child": "B", "parents": ["A"], "table": [0.1, 0.9, 0.5, 0.5, 0.7, 0.3]}]}))
    s = QuerySession(ve_compile(net), net)
    with pytest.raises(QueryError):
        s.tweak_binary(Indicator("B", "t"), Parameter("A", "x"))
    with pytest.raises(QueryError):
        session("B=true").tweak_binary(b, ta)


def test_zero_probability_evidence():
    net = parse_network(json.dumps({
        "variables": [{"name": "A", "values": ["t", "f"]}, {"name": "B", "values": ["t", "f"]}],
        "cpts": [{"child": "A", "table": [1.0, 0.0]},
                 {"child": "B", "parents": ["A"], "table": [0.5, 0.5, 0.5, 0.5]}]}))
    s = QuerySession(ve_compile(net), net, parse_evidence("A=f", net))
    assert s.prob_evidence() == 0.0
    with pytest.raises(ZeroProbabilityError):
        s.posterior_marginal("B")
    with pytest.raises(ZeroProbabilityError):
        s.family_marginal(Parameter("A", "t"))
    total, post = s.retraction("A")
    assert total == pytest.approx(1.0) and post["t"] == pytest.approx(1.0)


def test_first_derivative_queries_run_no_passes(session):
    s = session("A=true")
    s.prob_evidence(), s.posterior_marginal("B"), s.what_if("A", "false")
    s.retraction("A"), s.family_marginal(tab), s.family_marginals("A")
    assert s.passes == 2 and s.toggle_passes == 0
    assert s.state.edge_visits == 2 * s.circuit.num_edges
    s.pair_marginal(a, b)
    assert s.passes == 2 and s.toggle_passes == 4


@settings(max_examples=25)
@given(seeds)
def test_first_derivative_queries_match_oracle(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, int(rng.integers(2, 8)), cards=(2, 3))
    c = ve_compile(net)
    e = random_evidence(rng, net, max_size=3)
    s = QuerySession(c, net, e)
    pe = oracle_prob(net, e)
    assert s.prob_evidence() == pytest.approx(pe, abs=1e-9)
    for i, v in enumerate(net.variables):
        if i not in e:
            post = s.posterior_marginal(v.name)
            assert sum(post.values()) == pytest.approx(1.0, abs=1e-9)
            for x, p in post.items():
                assert p == pytest.approx(cond(net, {v.name: x}, e), abs=1e-9)
                assert -1e-9 <= p <= 1 + 1e-9
        total, post = s.retraction(v.name)
        assert total == pytest.approx(oracle_prob(net, e.without(i)), abs=1e-9)
        for x, p in post.items():
            assert p == pytest.approx(cond(net, {v.name: x}, e.without(i)), abs=1e-9)
    for f in net.parameters():
        event = {f.child: f.value, **dict(f.parents)}
        named = e.named(net)
        clash = any(named.get(k, val) != val for k, val in event.items())
        expected = 0.0 if clash else cond(net, event, e)
        assert s.family_marginal(f) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=15)
@given(seeds)
def test_second_derivative_queries_match_oracle(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 5)
    e = random_evidence(rng, net, max_size=2)
    s = QuerySession(ve_compile(net), net, e)
    named = e.named(net)
    for i, vx in enumerate(net.variables):
        for j, vy in enumerate(net.variables):
            if i >= j:
                continue
            rest = {k: v for k, v in named.items() if k not in (vx.name, vy.name)}
            for x in vx.values:
                for y in vy.values:
                    got = s.pair_marginal(Indicator(vx.name, x), Indicator(vy.name, y))
                    assert got == pytest.approx(oracle_prob(net, {**rest, vx.name: x, vy.name: y}), abs=1e-9)
    # mixed identity d2F/dlambda_x dtheta_f * theta_f = Pr(x, f, e - X)
    params = net.parameters()
    for f in [params[k] for k in rng.choice(len(params), size=4, replace=False)]:
        for vx in net.variables:
            if vx.name == f.child:
                continue
            x = vx.values[0]
            event = {vx.name: x}
            rest = {k: v for k, v in named.items() if k != vx.name}
            fam = {f.child: f.value, **dict(f.parents)}
            clash = any({**rest, **event}.get(k, val) != val for k, val in fam.items())
            expected = 0.0 if clash else oracle_prob(net, {**rest, **event, **fam})
            got = s.second(Indicator(vx.name, x), f) * net.theta(f)
            assert got == pytest.approx(expected, abs=1e-9)


@settings(max_examples=20)
@given(seeds)
def test_sensitivity_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 5)
    e = random_evidence(rng, net, max_size=2)
    free = [i for i in range(5) if i not in e]
    if not free or oracle_prob(net, e) < 1e-6:
        return
    yv = net.variables[free[int(rng.integers(len(free)))]]
    y = Indicator(yv.name, yv.values[0])
    s = QuerySession(ve_compile(net), net, e)
    h = 1e-6
    with_y = Evidence({**e.assignments, net.index(y.var): yv.index(y.value)})

    def pr(f, t):
        # other parameters held fixed, so the perturbed CPT is left unnormalized
        num = leaf_assignment(net, with_y)
        den = leaf_assignment(net, e)
        num[f] = den[f] = t
        return canonical_eval(net, num) / canonical_eval(net, den)

    for f in net.parameters():
        theta = net.theta(f)
        lo = max(theta - h, 0.0)
        fd = (pr(f, theta + h) - pr(f, lo)) / (theta + h - lo)
        got = s.sensitivity_theta(y, f)
        assert got == pytest.approx(fd, abs=1e-5)
        theta_u = net.theta(f)
        if theta_u > 0:
            # probability form: (Pr(y,x,u|e) - Pr(y|e) Pr(x,u|e)) / Pr(x|u)
            fam = {f.child: f.value, **dict(f.parents)}
            named = e.named(net)
            if all(named.get(k, v) == v for k, v in fam.items()) and fam.get(y.var, y.value) == y.value:
                pyxu = cond(net, {**fam, y.var: y.value}, e)
            else:
                pyxu = 0.0
            if all(named.get(k, v) == v for k, v in fam.items()):
                pxu = cond(net, fam, e)
            else:
                pxu = 0.0
            prob_form = (pyxu - cond(net, {y.var: y.value}, e) * pxu) / theta_u
            assert got == pytest.approx(prob_form, abs=1e-9)


@settings(max_examples=20)
@given(seeds)
def test_meta_sensitivity_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 5)
    e = random_evidence(rng, net, max_size=2)
    free = [i for i in range(5) if i not in e]
    if not free:
        return
    yv = net.variables[free[-1]]
    y = Indicator(yv.name, yv.values[1])
    fam_var = int(rng.integers(5))
    f = net.parameters(fam_var)[0]
    meta = MetaParameter(f.child, f.parents, {"v0": 1.0, "v1": -1.0})
    s = QuerySession(ve_compile(net), net, e)
    t0 = net.theta(f)
    h = min(1e-6, t0, 1 - t0)
    if h <= 0 or oracle_prob(net, e) < 1e-6:
        return
    f1 = meta.parameter("v1")

    def pr(t):
        tweaked = net.with_parameters({f: t, f1: 1 - t})
        return cond(tweaked, {y.var: y.value}, e)

    fd = (pr(t0 + h) - pr(t0 - h)) / (2 * h)
    assert s.sensitivity_meta(y, meta) == pytest.approx(fd, abs=1e-6)


@settings(max_examples=30)
@given(seeds)
def test_tweak_reaches_boundary_minimally(seed):
    rng = np.random.default_rng(seed)
    net = random_network(rng, 5)
    e = random_evidence(rng, net, max_size=2)
    free = [i for i in range(5) if i not in e]
    if not free or oracle_prob(net, e) < 1e-4:
        return
    yv = net.variables[free[0]]
    y = Indicator(yv.name, "v0")
    params = net.parameters()
    f = params[int(rng.integers(len(params)))]
    s = QuerySession(ve_compile(net), net, e)
    res = s.tweak_binary(y, f)
    if not res.feasible or res.delta_min == 0.0:
        return
    f_bar = Parameter(f.child, "v1" if f.value == "v0" else "v0", f.parents)

    def ranking_gap(t):
        tweaked = net.with_parameters({f: t, f_bar: 1 - t})
        return cond(tweaked, {y.var: "v0"}, e) - cond(tweaked, {y.var: "v1"}, e)

    assert ranking_gap(res.theta_prime_min) == pytest.approx(0.0, abs=1e-6)
    step = 1e-5 * np.sign(res.delta_min)
    before = res.theta_prime_min - step
    if 0.0 <= before <= 1.0:
        assert ranking_gap(before) > 0.0
