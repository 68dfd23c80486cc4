"""Probabilistic queries read off first and second partial derivatives.

A QuerySession runs one upward and one downward pass.  Marginals, retraction,
what-if and family marginals only read the resulting ``pd`` slots.  Anything
needing a second derivative runs private pinned sweeps (two per fixed leaf) and
caches them, leaving the main PassState untouched.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

from netpoly.compiler import Circuit
from netpoly.engine import PassState, differentiate, second_derivatives_for
from netpoly.model import Evidence, Indicator, Leaf, Network, Parameter


class QueryError(ValueError):
    pass


class ZeroProbabilityError(QueryError):
    pass


@dataclass(frozen=True)
class MetaParameter:
    """theta_xu = alpha_x * tau + beta_x for the column ``parents`` of ``var``."""

    var: str
    parents: tuple[tuple[str, str], ...]
    alphas: Mapping[str, float]

    def __post_init__(self):
        if not all(math.isfinite(a) for a in self.alphas.values()):
            raise ValueError("meta-parameter coefficients must be finite")
        if abs(math.fsum(self.alphas.values())) > 1e-12:
            warnings.warn(
                f"coefficients for {self.var!r} do not sum to 0; the CPT column will not stay normalized",
                stacklevel=2,
            )

    def parameter(self, value: str) -> Parameter:
        return Parameter(self.var, value, self.parents)


@dataclass(frozen=True)
class TweakResult:
    feasible: bool
    delta_min: float
    theta_prime_min: float
    # "increase" / "decrease" the parameter, or "none" when the ranking already holds
    direction: str
    theta: float


class QuerySession:
    def __init__(self, circuit: Circuit, network: Network, evidence: Evidence | None = None):
        self.circuit = circuit
        self.network = network
        self.evidence = evidence if evidence is not None else Evidence()
        self.state: PassState = differentiate(circuit, self.evidence, network)
        self.passes = 2
        self.toggle_passes = 0
        self._second: dict[Leaf, dict[Leaf, float]] = {}

    # -- raw derivatives -------------------------------------------------------

    def pd(self, leaf: Leaf) -> float:
        return self.state.derivative(leaf)

    def second(self, a: Leaf, b: Leaf) -> float:
        """d2F/da db at (e, theta); sweeps are cached per fixed leaf."""
        if a == b:
            return 0.0
        if a in self._second:
            return self._second[a][b]
        if b not in self._second:
            self._second[b] = second_derivatives_for(self.circuit, self.evidence, self.network, b)
            self.toggle_passes += 4
        return self._second[b][a]

    def _require_positive(self) -> float:
        pe = self.state.value
        if not pe > 0.0:
            raise ZeroProbabilityError("evidence has probability zero")
        return pe

    def _var(self, name: str) -> int:
        return self.network.index(name)

    def _indicators(self, name: str) -> list[Indicator]:
        return [Indicator(name, x) for x in self.network.variable(name).values]

    # -- first-derivative queries ------------------------------------------------

    def prob_evidence(self) -> float:
        return self.state.value

    def posterior_marginal(self, var: str) -> dict[str, float]:
        """Pr(x | e).  For an observed variable the posterior is degenerate."""
        pe = self._require_positive()
        i = self._var(var)
        values = self.network.variables[i].values
        if i in self.evidence:
            seen = self.evidence.assignments[i]
            return {x: float(j == seen) for j, x in enumerate(values)}
        return {lam.value: self.pd(lam) / pe for lam in self._indicators(var)}

    def what_if(self, var: str, value: str) -> float:
        """Pr(x, e - X): probability of the evidence had X been observed as x."""
        self.network.variable(var).index(value)
        return self.pd(Indicator(var, value))

    def retraction(self, var: str) -> tuple[float, dict[str, float]]:
        """Pr(e - X) and Pr(x | e - X)."""
        d = [self.pd(lam) for lam in self._indicators(var)]
        total = math.fsum(d)
        if not total > 0.0:
            raise ZeroProbabilityError(f"evidence without {var!r} has probability zero")
        values = self.network.variable(var).values
        return total, {x: v / total for x, v in zip(values, d)}

    def family_marginal(self, f: Parameter) -> float:
        """Pr(f | e) = dF/d theta_f * theta_f / F(e)."""
        pe = self._require_positive()
        return self.pd(f) * self.network.theta(f) / pe

    def family_marginals(self, var: str) -> dict[Parameter, float]:
        return {f: self.family_marginal(f) for f in self.network.parameters(self._var(var))}

    # -- second-derivative queries -----------------------------------------------

    def pair_marginal(self, x: Indicator, y: Indicator, conditional: bool = False) -> float:
        """Pr(x, y, e - XY); with ``conditional``, Pr(x, y | e) for unobserved X, Y."""
        if x.var == y.var:
            raise QueryError("pair marginal needs two distinct variables")
        joint = self.second(x, y)
        if not conditional:
            return joint
        if self._var(x.var) in self.evidence or self._var(y.var) in self.evidence:
            raise QueryError("conditional pair marginal needs unobserved variables")
        return joint / self._require_positive()

    def family_pair_marginal(self, f1: Parameter, f2: Parameter) -> float:
        """Pr(f1, f2, e), via the derivative times both parameter values."""
        if f1.child == f2.child:
            raise QueryError("family pair marginal needs two distinct families")
        return self.second(f1, f2) * self.network.theta(f1) * self.network.theta(f2)

    def _check_target(self, y: Indicator) -> float:
        if self._var(y.var) in self.evidence:
            raise QueryError(f"target {y.var!r} is observed")
        return self._require_positive()

    def sensitivity_theta(self, y: Indicator, f: Parameter) -> float:
        """d Pr(y|e) / d theta_f with every other parameter held fixed."""
        pe = self._check_target(y)
        return (self.second(f, y) * pe - self.pd(f) * self.pd(y)) / (pe * pe)

    def sensitivity_meta(self, y: Indicator, meta: MetaParameter) -> float:
        self._check_target(y)
        return math.fsum(a * self.sensitivity_theta(y, meta.parameter(x))
                         for x, a in meta.alphas.items() if a != 0.0)

    def tweak_binary(self, y: Indicator, f: Parameter) -> TweakResult:
        """Smallest shift of theta_xu (theta_x'u co-varies) giving Pr(y|e) <= Pr(y'|e).

        Pr(y, e) is linear in the pair (theta_xu, theta_x'u), so after a shift
        delta it reads G + delta * (G_xu - G_x'u), likewise H for y'.  The
        ranking condition is then (G - H) + delta * D <= 0 with
        D = (G_xu - G_x'u) - (H_xu - H_x'u).

        Both sides were multiplied by Pr(e) after the shift, so the answer is
        only meaningful while that stays positive; a shift that drives the
        evidence to probability zero is reported as infeasible.
        """
        yvar = self.network.variable(y.var)
        xvar = self.network.variable(f.child)
        if yvar.card != 2 or xvar.card != 2:
            raise QueryError("parameter tweaking needs binary target and binary parameter variable")
        self._check_target(y)
        y_bar = Indicator(y.var, yvar.values[1 - yvar.index(y.value)])
        f_bar = Parameter(f.child, xvar.values[1 - xvar.index(f.value)], f.parents)
        theta = self.network.theta(f)

        g, h = self.pd(y), self.pd(y_bar)
        d = (self.second(y, f) - self.second(y, f_bar)) - (self.second(y_bar, f) - self.second(y_bar, f_bar))
        if g - h <= 0.0:
            return TweakResult(True, 0.0, theta, "none", theta)
        if d == 0.0:
            return TweakResult(False, math.nan, math.nan, "none", theta)
        delta = -(g - h) / d
        target = theta + delta
        direction = "increase" if delta > 0 else "decrease"
        pe = self.prob_evidence()
        pe_shifted = pe + delta * (self.pd(f) - self.pd(f_bar))
        feasible = 0.0 <= target <= 1.0 and pe_shifted > 1e-12 * pe
        return TweakResult(feasible, delta, target, direction, theta)

