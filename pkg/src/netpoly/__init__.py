"""Differential inference on Bayesian networks compiled to arithmetic circuits."""

from netpoly.compiler import (
    Circuit, EliminationOrder, deserialize_circuit, load_circuit, min_fill_order, order_width,
    serialize_circuit, ve_compile,
)
from netpoly.engine import (
    PassState, differentiate, downward_pass, evaluate_at, rounding_error_bound,
    second_derivative, second_derivatives_for, upward_pass,
)
from netpoly.model import (
    Evidence, Indicator, Network, Parameter, consistent, indicator_value,
    load_network, parse_evidence, parse_network, serialize_network,
)
from netpoly.queries import MetaParameter, QuerySession, TweakResult

__version__ = "0.1.0"
