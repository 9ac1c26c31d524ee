"""Envariance swap protocols, constraint ledgers and Born-rule derivations."""

import json

from ._envlab import (
    DerivationError,
    EnvarianceVerdict,
    Error,
    LocalUnitary,
    PreconditionError,
    PureState,
    SchmidtForm,
    ValidationError,
    apply_local,
    bell_state,
    born_probability,
    equal_amplitude_state,
    is_envariant,
    partial_trace,
    rational_diagonal_state,
    run_cli,
    schmidt_decompose,
    state_from_matrix,
)
from . import _envlab


def run_protocol(state, pair=(0, 1), ruleset="barnum"):
    """Swap protocol on one pair; returns {"trace", "ledger", "certificate"}."""
    return json.loads(_envlab._run_protocol(state, tuple(pair), ruleset))


def derive_equal_case(n, ruleset="barnum"):
    return json.loads(_envlab._derive_equal_case(n, ruleset))


def derive_rational(counts, ruleset="barnum", ancilla="E"):
    return json.loads(_envlab._derive_rational(list(counts), ruleset, ancilla))


def derive_general(state, epsilon=1e-3, ruleset="barnum", ancilla="E"):
    return json.loads(_envlab._derive_general(state, epsilon, ruleset, ancilla))


def adversarial_search(state, remote="E", restarts=50, iterations=200, seed=0):
    return json.loads(_envlab._adversarial_search(state, remote, restarts, iterations, seed))


def fraction(value):
    """Decode a {"num", "den"} entry into fractions.Fraction."""
    from fractions import Fraction

    return Fraction(int(value["num"]), int(value["den"]))
