"""Scenario-tree arbitrage checks, replication and option pricing."""

from ._ftap import (
    Error,
    InputError,
    InvariantViolation,
    NumericalError,
    ScenarioTree,
    bachelier_call,
    binomial_call,
    bs_call,
    find_arbitrage,
    find_emm,
    fuzz,
    indifference_price,
    is_complete,
    mc_call,
    minimal_divergence_measure,
    parse_tree,
    pde_call,
    polytope_dimension,
    price,
    price_bounds,
    read_tree,
    replicate,
    second_measure,
)

__all__ = [name for name in dir() if not name.startswith("_")]
