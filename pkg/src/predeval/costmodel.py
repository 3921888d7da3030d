"""Step costs, chain costs, and ordering weights.

Three model variants price an atom application on ``count`` records:

* ``basic``      -- ``count + kappa``; set operations cost ``epsilon * (count + kappa')``
* ``simplified`` -- ``F * count + kappa``; set operations are free
* ``hdd``        -- ``count + kappa`` below the scan threshold ``theta``
                    (as a fraction of ``total``), otherwise ``total + kappa``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

BASIC = "basic"
SIMPLIFIED = "simplified"
HDD = "hdd"
VARIANTS = (BASIC, SIMPLIFIED, HDD)

TOL = 1e-9


@dataclass(frozen=True)
class CostModel:
    variant: str = SIMPLIFIED
    epsilon: float = 0.0
    kappa: float = 0.0
    kappa_prime: float = 0.0
    theta: float = 1.0
    total_records: int | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown cost model {self.variant!r}; expected one of {VARIANTS}")
        for name in ("epsilon", "kappa", "kappa_prime"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")

    def atom_cost(self, cost_factor: float, count: float, total: float | None = None) -> float:
        if self.variant == SIMPLIFIED:
            return cost_factor * count + self.kappa
        if self.variant == BASIC:
            return count + self.kappa
        total = self.total_records if total is None else total
        if total is None:
            raise ValueError("hdd cost model needs the total record count")
        if total > 0 and count / total >= self.theta:
            return total + self.kappa
        return count + self.kappa

    def set_op_cost(self, count: float) -> float:
        if self.variant == BASIC:
            return self.epsilon * (count + self.kappa_prime)
        return 0.0


DEFAULT_MODEL = CostModel()


def step_cost(model: CostModel, atom, count: float, total: float | None = None) -> float:
    """Cost of applying ``atom`` to ``count`` of ``total`` records."""
    return model.atom_cost(atom.cost_factor, count, total)


def and_chain_cost(chain: Iterable[tuple[float, float]], start: float = 1.0) -> float:
    """Expected cost of a conjunction evaluated left to right.

    ``c1 + g1 * (c2 + g2 * (... cn))``, scaled by the starting fraction.
    """
    total = 0.0
    frac = start
    for cost, sel in chain:
        total += frac * cost
        frac *= sel
    return total


@dataclass
class OrChainState:
    """Probability ``y`` that some earlier disjunct already passed."""

    y: float = 0.0

    def advance(self, selectivity: float) -> None:
        self.y = self.y + selectivity * (1.0 - self.y)


def or_chain_cost(chain: Iterable[tuple[float, float]], start: float = 1.0) -> float:
    """Expected cost of a disjunction with bypass: ``sum c_i * (1 - Y_i)``."""
    state = OrChainState()
    total = 0.0
    for cost, sel in chain:
        total += start * cost * (1.0 - state.y)
        state.advance(sel)
    return total


def and_weight(cost: float, selectivity: float) -> float:
    """``c / (1 - g)``; ``+inf`` when the atom never filters anything."""
    if selectivity >= 1.0:
        return math.inf
    return cost / (1.0 - selectivity)


def or_weight(cost: float, selectivity: float) -> float:
    """``c / g``; ``+inf`` when the atom never passes anything."""
    if selectivity <= 0.0:
        return math.inf
    return cost / selectivity


def chain_of(atoms: Sequence) -> list[tuple[float, float]]:
    return [(a.cost_factor, a.selectivity) for a in atoms]
