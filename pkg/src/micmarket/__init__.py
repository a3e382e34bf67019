"""Exact clearing of a multi-period electricity auction with MIC orders."""

from .market import (
    ClearingResult,
    MarketInstance,
    MicHourlyBid,
    MicOrder,
    Objective,
    Side,
    SimpleBid,
    Status,
    verify_clearing,
)
from .milp import clear, encode, solve_milp
from .oracle import enumerate_clearings, oracle_check
from .documents import load_bidset, parse_bidset, serialize_bidset

__all__ = [
    "ClearingResult",
    "MarketInstance",
    "MicHourlyBid",
    "MicOrder",
    "Objective",
    "Side",
    "SimpleBid",
    "Status",
    "verify_clearing",
    "clear",
    "encode",
    "solve_milp",
    "enumerate_clearings",
    "oracle_check",
    "load_bidset",
    "parse_bidset",
    "serialize_bidset",
]
