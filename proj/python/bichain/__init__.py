"""Markov binomial chain analysis."""

from fractions import Fraction

from ._bichain import (
    Chain,
    Error,
    InputError,
    InvariantError,
    ResourceError,
    export_prism,
    run_cli,
    simulate,
)
from . import _bichain

__all__ = [
    "Chain",
    "Error",
    "InputError",
    "InvariantError",
    "ResourceError",
    "approx_exp",
    "eoe",
    "export_prism",
    "run_cli",
    "simulate",
    "successors",
    "until_probability",
]


def _num(x):
    return Fraction(x) if isinstance(x, str) else x


def eoe(chain, engine="auto", backend="rational", error_exponent=64):
    """Expected number of steps until the chain is absorbed."""
    return _num(_bichain._eoe(chain, engine, backend, error_exponent))


def successors(chain, state, backend="rational", error_exponent=64):
    """{successor state: probability} for one step from `state`."""
    raw = _bichain._successors(chain, list(state), backend, error_exponent)
    return {w: _num(p) for w, p in raw.items()}


def until_probability(chain, safe, target, backend="rational", error_exponent=64):
    """P(safe U target) from the initial state; predicates use the CLI syntax."""
    return _num(_bichain._until_probability(chain, safe, target, backend, error_exponent))


def approx_exp(a, b, r):
    """Rational within 2**-r of exp(-a/b)."""
    return Fraction(_bichain._approx_exp(a, b, r))
