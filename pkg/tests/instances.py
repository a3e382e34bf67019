"""Instance builders shared by the tests."""

import random
from fractions import Fraction as F

from micmarket.market import MarketInstance, MicHourlyBid, MicOrder, Side, SimpleBid


def random_instance(seed, periods=2, max_simple=8, max_orders=2, max_price=10, max_qty=5):
    """Small random market: integer prices and quantities, a few MIC orders."""
    rng = random.Random(seed)
    bids = []
    for k in range(rng.randint(2, max_simple)):
        if k < 2:
            side = Side.DEMAND if k == 0 else Side.SUPPLY
        else:
            side = Side.DEMAND if rng.random() < 0.5 else Side.SUPPLY
        bids.append(SimpleBid(
            f"b{k}", side, rng.randint(1, periods),
            F(rng.randint(1, max_qty)), F(rng.randint(0, max_price)),
        ))
    orders = []
    for c in range(rng.randint(0, max_orders)):
        chosen = [t for t in range(1, periods + 1) if rng.random() < 0.75]
        chosen = chosen or [rng.randint(1, periods)]
        hourly = tuple(
            MicHourlyBid(f"m{c}_{t}", f"o{c}", t, F(rng.randint(1, max_qty)), F(rng.randint(0, max_price)))
            for t in chosen
        )
        orders.append(MicOrder(f"o{c}", F(rng.randint(0, 20)), F(rng.randint(0, 5)), hourly))
    return MarketInstance(periods, tuple(bids), tuple(orders))


def simple_market(*rows, periods=1):
    """Rows of (id, side, period, quantity, price) with 's'/'d' sides."""
    sides = {"s": Side.SUPPLY, "d": Side.DEMAND}
    return MarketInstance(
        periods,
        tuple(SimpleBid(i, sides[s], t, F(q), F(p)) for i, s, t, q, p in rows),
    )


def curve_example():
    """Three sellers and three buyers in one period; the second buyer is marginal."""
    return simple_market(
        ("S1", "s", 1, 2, 1), ("S2", "s", 1, 4, 2), ("S3", "s", 1, 3, 8),
        ("D1", "d", 1, 3, 10), ("D2", "d", 1, 7, 5), ("D3", "d", 1, 2, 3),
    )
