"""Operation tables m_{k,beta} on a free graded module and their relations.

The table stores sparse integer operations indexed by (arity k, disk class
beta, input generator tuple).  Absent entries of arity at most max_arity are
zero; anything of higher arity is unknown, and the verifier skips relations
that would need it.  The defining relation at (k, beta) is

    sum over k1+k2 = k+1, b1+b2 = beta, insertion slots i in 0..k-k1 of
    (-1)^{|x_1|' + ... + |x_i|'} m_{k2,b2}(x_1..x_i, m_{k1,b1}(x_{i+1}..), ..x_k)

with |x|' = deg(x) - 1, inputs indexed 1..k.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .monoid import BetaClass, MonoidTable, OrderKey, ZERO_CLASS
from .novikov import EnergyCutoff, NovikovElement

Combination = dict[str, int]
EntryKey = tuple[int, BetaClass, tuple[str, ...]]


class TableError(ValueError):
    """Inconsistent operation table data."""


@dataclass(frozen=True)
class Generator:
    """Module generator with its integer degree."""

    name: str
    degree: int

    def __post_init__(self):
        if not self.name or any(ch.isspace() or ch == "," for ch in self.name):
            raise TableError(f"bad generator name {self.name!r}")
        if self.degree < 0:
            raise TableError(f"generator degree must be >= 0, got {self.degree}")


@dataclass(frozen=True)
class Defect:
    """Nonzero left-hand sides of the relation at one key (k, beta)."""

    k: int
    beta: BetaClass
    value: dict[tuple[str, ...], Combination]

    def is_zero(self) -> bool:
        return not self.value


@dataclass(frozen=True)
class KeyReport:
    k: int
    beta: BetaClass
    status: str  # "ok" | "defect" | "skipped"
    defect: Optional[Defect] = None
    reason: str = ""


def _acc(dst: Combination, src: Mapping[str, int], scale: int = 1) -> None:
    for name, coeff in src.items():
        value = dst.get(name, 0) + scale * coeff
        if value:
            dst[name] = value
        else:
            dst.pop(name, None)


class OperationTable:
    """Immutable sparse table of the operations m_{k,beta}.

    max_arity is the completeness frontier: operations with k <= max_arity
    are fully known (absent means zero), higher arities are undefined.
    """

    def __init__(
        self,
        generators: Sequence[Generator],
        monoid: MonoidTable,
        entries: Mapping[EntryKey, Mapping[str, int]],
        max_arity: Optional[int] = None,
        strict_degree: bool = False,
        validate: bool = True,
    ):
        self.generators = tuple(generators)
        if len({g.name for g in self.generators}) != len(self.generators):
            raise TableError("duplicate generator names")
        self.monoid = monoid
        self.strict_degree = strict_degree
        self._by_name = {g.name: g for g in self.generators}

        canon: dict[EntryKey, Combination] = {}
        observed_arity = 0
        for (k, beta, inputs), combo in entries.items():
            cleaned = {name: int(c) for name, c in combo.items() if c}
            if not cleaned:
                continue
            key = (int(k), beta, tuple(inputs))
            if key in canon:
                raise TableError(f"duplicate entry key {key}")
            canon[key] = cleaned
            observed_arity = max(observed_arity, key[0])
        self._entries = canon
        self.max_arity = observed_arity if max_arity is None else int(max_arity)
        if self.max_arity < observed_arity:
            raise TableError(
                f"declared arity {self.max_arity} below an entry of arity {observed_arity}"
            )
        if validate:
            self.validate()

    # -- integrity -----------------------------------------------------------

    def validate(self) -> None:
        for (k, beta, inputs), combo in self._entries.items():
            if k < 0:
                raise TableError("negative arity")
            if len(inputs) != k:
                raise TableError(f"entry ({k}, {beta}, {inputs}) has {len(inputs)} inputs")
            if k == 0 and beta.is_zero():
                raise TableError("m_{0,0} must vanish: curvature needs positive energy")
            if beta not in self.monoid:
                raise TableError(f"entry class {beta} outside the monoid closure")
            for name in inputs:
                if name not in self._by_name:
                    raise TableError(f"undeclared input generator {name!r}")
            for name in combo:
                if name not in self._by_name:
                    raise TableError(f"undeclared output generator {name!r}")

    def gapped_check(self) -> bool:
        """True iff every populated class sits in the closure with omega >= 0,
        omega = 0 only for the zero class."""
        for (_, beta, _) in self._entries:
            if beta not in self.monoid:
                return False
            if beta.omega < 0:
                return False
            if beta.omega == 0 and not beta.is_zero():
                return False
        return True

    # -- access ---------------------------------------------------------------

    def generator(self, name: str) -> Generator:
        try:
            return self._by_name[name]
        except KeyError:
            raise TableError(f"unknown generator {name!r}")

    def degree(self, name: str) -> int:
        return self.generator(name).degree

    def entries(self) -> list[tuple[EntryKey, Combination]]:
        def sort_key(item):
            (k, beta, inputs), _ = item
            return (k, beta.omega, beta.maslov, inputs)

        return sorted(((key, dict(val)) for key, val in self._entries.items()),
                      key=sort_key)

    def op(self, k: int, beta: BetaClass, inputs: Sequence[str]) -> Combination:
        """m_{k,beta} on a basis tuple; {} means zero (within max_arity)."""
        return dict(self._entries.get((k, beta, tuple(inputs)), {}))

    def is_known_zero(self, k: int, beta: BetaClass) -> bool:
        if k > self.max_arity:
            return False
        return not any(key[0] == k and key[1] == beta for key in self._entries)

    def has_operations(self, k: int, beta: BetaClass) -> bool:
        return any(key[0] == k and key[1] == beta for key in self._entries)

    # -- derived tables --------------------------------------------------------

    def with_entry(self, k: int, beta: BetaClass, inputs: Sequence[str],
                   out: str, delta: int) -> "OperationTable":
        """Copy with one coefficient shifted by delta (mutation testing)."""
        key = (k, self.monoid.resolve(beta), tuple(inputs))
        entries: dict[EntryKey, Combination] = {
            k2: dict(v) for k2, v in self._entries.items()
        }
        combo = entries.setdefault(key, {})
        combo[out] = combo.get(out, 0) + delta
        return OperationTable(
            self.generators, self.monoid, entries,
            max_arity=self.max_arity, strict_degree=self.strict_degree,
            validate=False,
        )


def assemble_mk(table: OperationTable, k: int, cutoff: EnergyCutoff
                ) -> dict[tuple[str, ...], dict[str, NovikovElement]]:
    """Collect m_k = sum_beta m_{k,beta} T^{omega} e^{maslov/2} inside the window."""
    if k < 0:
        raise TableError("negative arity")
    out: dict[tuple[str, ...], dict[str, NovikovElement]] = {}
    for (arity, beta, inputs), combo in table._entries.items():
        if arity != k or not cutoff.admits(beta.omega):
            continue
        scale = {
            name: NovikovElement.monomial(c, beta.omega, beta.maslov // 2,
                                          cutoff=cutoff)
            for name, c in combo.items()
        }
        slot = out.setdefault(inputs, {})
        for name, elem in scale.items():
            slot[name] = slot.get(name, NovikovElement.zero(cutoff)) + elem
    for inputs in list(out):
        out[inputs] = {n: v for n, v in out[inputs].items() if not v.is_zero()}
        if not out[inputs]:
            del out[inputs]
    return out


def ank_defect(table: OperationTable, k: int, beta: BetaClass,
               inputs: Sequence[str]) -> Combination:
    """Left-hand side of the relation at (k, beta) on one input tuple."""
    inputs = tuple(inputs)
    if len(inputs) != k:
        raise TableError(f"expected {k} inputs, got {len(inputs)}")
    beta = table.monoid.resolve(beta)
    degrees = [table.degree(name) for name in inputs]
    total: Combination = {}
    for b1, b2 in table.monoid.splittings(beta):
        for k1 in range(0, k + 1):
            k2 = k + 1 - k1
            sign = 1
            for i in range(0, k - k1 + 1):
                if i > 0 and (degrees[i - 1] - 1) % 2 == 1:
                    sign = -sign
                inner = table.op(k1, b1, inputs[i:i + k1])
                if not inner:
                    continue
                for mid, c in inner.items():
                    outer_inputs = inputs[:i] + (mid,) + inputs[i + k1:]
                    outer = table.op(k2, b2, outer_inputs)
                    if outer:
                        _acc(total, outer, sign * c)
    return total


def relation_is_checkable(table: OperationTable, k: int, beta: BetaClass
                          ) -> tuple[bool, str]:
    """Whether every term of the relation at (k, beta) is determined.

    A splitting whose outer arity exceeds max_arity is harmless only when the
    inner operation is known to vanish, and vice versa.
    """
    beta = table.monoid.resolve(beta)
    for b1, b2 in table.monoid.splittings(beta):
        for k1 in range(0, k + 1):
            k2 = k + 1 - k1
            inner_known = k1 <= table.max_arity
            outer_known = k2 <= table.max_arity
            if inner_known and outer_known:
                continue
            if not inner_known and not outer_known:
                return False, (f"needs m_{{{k1},{b1}}} inside m_{{{k2},{b2}}}, "
                               f"both beyond declared arity {table.max_arity}")
            if not outer_known and not table.is_known_zero(k1, b1):
                return False, f"needs m_{{{k2},{b2}}} beyond declared arity {table.max_arity}"
            if not inner_known and not table.is_known_zero(k2, b2):
                return False, f"needs m_{{{k1},{b1}}} beyond declared arity {table.max_arity}"
    return True, ""


def _verify_keys(table: OperationTable, bound: int,
                 beta_filter=None) -> list[tuple[int, BetaClass]]:
    keys = []
    for beta in table.monoid.classes():
        if beta_filter is not None and not beta_filter(beta):
            continue
        n = table.monoid.norm(beta)
        for k in range(0, bound - n + 1):
            keys.append((k, beta))

    def sort_key(item):
        k, beta = item
        n = table.monoid.norm(beta)
        return (n + k, n, beta.omega, beta.maslov, k)

    keys.sort(key=sort_key)
    return keys


def verify(table: OperationTable, bound: int, beta_filter=None,
           fail_fast: bool = False) -> list[KeyReport]:
    """Evaluate the relation at every (k, beta) with norm(beta) + k <= bound.

    Keys whose relation needs operations beyond the declared arity are
    reported as skipped.  Reports come back in the order induced by the
    norm-plus-k comparison, ties resolved deterministically.
    """
    if bound < 0:
        raise TableError("bound must be non-negative")
    names = [g.name for g in table.generators]
    reports: list[KeyReport] = []
    for k, beta in _verify_keys(table, bound, beta_filter):
        ok, reason = relation_is_checkable(table, k, beta)
        if not ok:
            reports.append(KeyReport(k, beta, "skipped", reason=reason))
            continue
        bad: dict[tuple[str, ...], Combination] = {}
        for inputs in itertools.product(names, repeat=k):
            value = ank_defect(table, k, beta, inputs)
            if value:
                bad[inputs] = value
                if fail_fast:
                    break
        if bad:
            defect = Defect(k, beta, dict(sorted(bad.items())))
            reports.append(KeyReport(k, beta, "defect", defect=defect))
            if fail_fast:
                return reports
        else:
            reports.append(KeyReport(k, beta, "ok"))
    return reports


def degree_defects(table: OperationTable) -> list[tuple[EntryKey, str, int]]:
    """Entries violating deg(out) = sum deg(in) + 2 - k - maslov(beta)."""
    bad = []
    for (k, beta, inputs), combo in table.entries():
        expected = sum(table.degree(n) for n in inputs) + 2 - k - beta.maslov
        for out in sorted(combo):
            if table.degree(out) != expected:
                bad.append(((k, beta, inputs), out, expected))
    return bad


def _rank(rows: list[list[Fraction]]) -> int:
    """Rank over the rationals by Gaussian elimination (exact)."""
    rows = [row[:] for row in rows]
    rank = 0
    cols = len(rows[0]) if rows else 0
    for col in range(cols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        lead = rows[rank][col]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                factor = rows[r][col] / lead
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def homology_ranks(table: OperationTable) -> tuple[int, ...]:
    """Free ranks of the homology of (module, m_{1,0}) per degree.

    The differential raises degree by one; rank H^i = dim_i - rank d_i -
    rank d_{i-1} over the rationals.
    """
    degrees = sorted({g.degree for g in table.generators})
    if not degrees:
        return ()
    top = max(degrees)
    basis = {d: [g.name for g in table.generators if g.degree == d]
             for d in range(top + 1)}

    def diff_rank(d: int) -> int:
        src, dst = basis.get(d, []), basis.get(d + 1, [])
        if not src or not dst:
            return 0
        rows = []
        for name in src:
            image = table.op(1, ZERO_CLASS, (name,))
            rows.append([Fraction(image.get(t, 0)) for t in dst])
        return _rank(rows)

    ranks = []
    for d in range(top + 1):
        ranks.append(len(basis.get(d, [])) - diff_rank(d) - diff_rank(d - 1))
    return tuple(ranks)
