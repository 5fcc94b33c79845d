"""Discrete monoid of (omega, maslov) disk classes with its norm and order.

A MonoidTable is generated by finitely many classes of strictly positive
energy; its closure is every sum of generators whose total energy stays
inside a finite window, plus the zero class.  The norm of a class is the
longest way to write it as a sum of generators plus ceil(omega) - 1, with
the zero class pinned at -1.  Pairs (beta, k) are ordered by norm + k,
ties broken by norm alone.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .novikov import EnergyCutoff, as_energy


class UnknownClassError(KeyError):
    """A class outside the table's closure was used."""


class MonoidError(ValueError):
    """Invalid generator or table data."""


@dataclass(frozen=True)
class BetaClass:
    """A disk class remembered through its energy and Maslov index.

    Equality and hashing ignore the id: two declarations with the same
    (omega, maslov) are the same class.
    """

    ident: str = field(compare=False)
    omega: Fraction
    maslov: int

    def __post_init__(self):
        object.__setattr__(self, "omega", as_energy(self.omega))
        if not isinstance(self.maslov, int) or self.maslov % 2 != 0:
            raise MonoidError(f"maslov index must be an even integer, got {self.maslov!r}")
        if self.omega == 0 and self.maslov != 0:
            raise MonoidError("a class with omega = 0 must be the zero class")

    @property
    def key(self) -> tuple:
        return (self.omega, self.maslov)

    def is_zero(self) -> bool:
        return self.omega == 0 and self.maslov == 0

    def __str__(self) -> str:
        return self.ident


ZERO_CLASS = BetaClass("0", Fraction(0), 0)


@dataclass(frozen=True)
class OrderKey:
    """A pair (beta, k) ordered by norm(beta) + k."""

    beta: BetaClass
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise MonoidError("k must be non-negative")


class Ordering(enum.Enum):
    PRECEDES = -1
    EQUIVALENT = 0
    SUCCEEDS = 1


class MonoidTable:
    """Finitely generated discrete monoid closed inside an energy window.

    Generators must have strictly positive energy; classes with omega = 0 and
    nonzero maslov are rejected outright, which keeps the closure finite.
    """

    def __init__(self, generators: Iterable[BetaClass], window: EnergyCutoff):
        gens = []
        seen = set()
        for g in generators:
            if g.omega <= 0:
                raise MonoidError(f"generator {g.ident!r} must have positive energy")
            if g.key in seen:
                continue
            seen.add(g.key)
            gens.append(g)
        gens.sort(key=lambda g: g.key)
        self.generators: tuple[BetaClass, ...] = tuple(gens)
        self.window = window
        self._closure: dict[tuple, BetaClass] = {ZERO_CLASS.key: ZERO_CLASS}
        self._build_closure()
        self._norm_cache: dict[tuple, int] = {}

    def _build_closure(self):
        frontier = [ZERO_CLASS]
        while frontier:
            nxt = []
            for beta in frontier:
                for g in self.generators:
                    omega = beta.omega + g.omega
                    if omega > self.window.bound:
                        continue
                    key = (omega, beta.maslov + g.maslov)
                    if key in self._closure:
                        continue
                    total = BetaClass(self._synthesize_ident(key), *key)
                    self._closure[key] = total
                    nxt.append(total)
            frontier = nxt
        # keep the declared spellings for the generators themselves
        for g in self.generators:
            if g.key in self._closure:
                self._closure[g.key] = g

    @staticmethod
    def _synthesize_ident(key: tuple) -> str:
        omega, maslov = key
        return f"b[{omega},{maslov}]"

    # -- membership ---------------------------------------------------------

    def classes(self) -> list[BetaClass]:
        return [self._closure[k] for k in sorted(self._closure)]

    def __contains__(self, beta: BetaClass) -> bool:
        return beta.key in self._closure

    def resolve(self, beta: BetaClass) -> BetaClass:
        """Return the closure's representative of beta (canonical ident)."""
        try:
            return self._closure[beta.key]
        except KeyError:
            raise UnknownClassError(f"class {beta.ident!r} ({beta.key}) not in closure")

    def subtract(self, beta: BetaClass, part: BetaClass) -> Optional[BetaClass]:
        """beta - part when the difference lies in the closure, else None."""
        omega = beta.omega - part.omega
        if omega < 0:
            return None
        return self._closure.get((omega, beta.maslov - part.maslov))

    def splittings(self, beta: BetaClass) -> list[tuple[BetaClass, BetaClass]]:
        """All ordered pairs (b1, b2) in the closure with b1 + b2 = beta."""
        self.resolve(beta)
        out = []
        for key in sorted(self._closure):
            b1 = self._closure[key]
            b2 = self.subtract(beta, b1)
            if b2 is not None:
                out.append((b1, b2))
        return out

    # -- decompositions and the norm -----------------------------------------

    def decompositions(self, beta: BetaClass) -> list[tuple[BetaClass, ...]]:
        """All multisets of generators summing to beta, as sorted tuples.

        Finite because generator energies are bounded below by the least
        generator energy.
        """
        beta = self.resolve(beta)
        results: list[tuple[BetaClass, ...]] = []

        def extend(remaining_key, start, chosen):
            omega, maslov = remaining_key
            if omega == 0:
                if maslov == 0:
                    results.append(tuple(chosen))
                return
            for idx in range(start, len(self.generators)):
                g = self.generators[idx]
                if g.omega > omega:
                    continue
                chosen.append(g)
                extend((omega - g.omega, maslov - g.maslov), idx, chosen)
                chosen.pop()

        extend(beta.key, 0, [])
        return results

    def norm(self, beta: BetaClass) -> int:
        """Longest generator decomposition plus ceil(omega) - 1; -1 for zero."""
        beta = self.resolve(beta)
        if beta.is_zero():
            return -1
        cached = self._norm_cache.get(beta.key)
        if cached is not None:
            return cached
        decs = self.decompositions(beta)
        if not decs:
            raise UnknownClassError(
                f"class {beta.ident!r} admits no generator decomposition"
            )
        value = max(len(d) for d in decs) + math.ceil(beta.omega) - 1
        self._norm_cache[beta.key] = value
        return value

    # -- the order on pairs ---------------------------------------------------

    def order_value(self, key: OrderKey) -> tuple[int, int]:
        n = self.norm(key.beta)
        return (n + key.k, n)

    def compare(self, a: OrderKey, b: OrderKey) -> Ordering:
        sa, na = self.order_value(a)
        sb, nb = self.order_value(b)
        if sa < sb or (sa == sb and na < nb):
            return Ordering.PRECEDES
        if sa == sb and na == nb:
            return Ordering.EQUIVALENT
        return Ordering.SUCCEEDS
