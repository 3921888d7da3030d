"""Backend contract shared by the planner's three execution modes.

An evaluator owns opaque set handles.  The planner only ever builds sets
from ``ground()``/``empty()``, atom applications, and the three set
operations, and reads their size through ``measure``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any


class Evaluator(ABC):
    name = "abstract"

    @abstractmethod
    def ground(self) -> Any:
        """The set of everything (all vertices / all records)."""

    @abstractmethod
    def empty(self) -> Any: ...

    @abstractmethod
    def apply(self, atom_id: int, s: Any) -> Any:
        """Members of ``s`` satisfying the atom.  Always a subset of ``s``."""

    @abstractmethod
    def intersect(self, a: Any, b: Any) -> Any: ...

    @abstractmethod
    def union(self, a: Any, b: Any) -> Any: ...

    @abstractmethod
    def difference(self, a: Any, b: Any) -> Any: ...

    @abstractmethod
    def measure(self, s: Any) -> float:
        """Record count or probability mass of ``s``; zero for the empty set."""

    @abstractmethod
    def total(self) -> float:
        """``measure(ground())``, the denominator for threshold cost models."""

    def same(self, a: Any, b: Any) -> bool:
        return a == b

    def subset(self, a: Any, b: Any) -> bool:
        return self.same(self.difference(a, b), self.empty())
