"""The four toy systems: two delta peaks, coin flip, three roads, and the
four-node graph. Each generator is seeded and emits records carrying the
matching group relevant for symmetric matching (trivial where none is).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..symmetry import SymmetryGroup


@dataclass
class ToyRecord:
    input: np.ndarray
    output: np.ndarray
    matching_group: SymmetryGroup

    def __post_init__(self):
        self.input = np.atleast_1d(np.asarray(self.input, dtype=np.float64))
        self.output = np.atleast_1d(np.asarray(self.output, dtype=np.float64))


def gen_two_deltas(rng):
    """One draw: x ~ N(0,1), y a fair pick from {-1, +1}."""
    x = rng.standard_normal()
    y = 1.0 if rng.random() < 0.5 else -1.0
    return x, y


def gen_two_deltas_records(n_records, rng):
    out = []
    group = SymmetryGroup.trivial()
    for _ in range(n_records):
        x, y = gen_two_deltas(rng)
        out.append(ToyRecord([x], [y], group))
    return out


def gen_coin_flip(n_records, rng):
    """Bet x in [-100, 100]; winnings are +x or -x, fair."""
    group = SymmetryGroup.coin_flip()
    x = rng.uniform(-100.0, 100.0, size=n_records)
    sign = np.where(rng.random(n_records) < 0.5, 1.0, -1.0)
    return [ToyRecord([xi], [si * xi], group) for xi, si in zip(x, sign)]


def gen_three_roads(n_records, rng):
    """Two entities at x1, x2 pick one of three coordinated aisle moves."""
    group = SymmetryGroup.trivial()
    records = []
    for _ in range(n_records):
        x = rng.uniform(-50.0, 50.0, size=2)
        d = x[1] - x[0]
        cases = (
            np.array([x[0] - d / 2, x[1] + d / 2]),
            np.array([x[0] - d / 2, x[1] - d / 2]),
            np.array([x[0] + d / 2, x[1] + d / 2]),
        )
        records.append(ToyRecord(x, cases[rng.integers(3)], group))
    return records


# alternating +-5 patterns for the square graph 0-1-2-3-0
FOUR_NODE_PATTERNS = (
    np.array([5.0, -5.0, 5.0, -5.0]),
    np.array([-5.0, 5.0, -5.0, 5.0]),
)
FOUR_NODE_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))


def gen_four_node(n_records, rng):
    """Square graph; every node carries x, outputs are x +- 5 alternating.

    The two solutions are mirror images through the input: the matching
    group is {identity, y -> 2x - y}.
    """
    records = []
    for _ in range(n_records):
        x = rng.uniform(-50.0, 50.0)
        center = np.full(4, x)
        pattern = FOUR_NODE_PATTERNS[rng.integers(2)]
        records.append(ToyRecord(center, center + pattern,
                                 SymmetryGroup.solution_swap(center)))
    return records
