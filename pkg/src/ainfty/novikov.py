"""Exact arithmetic in the integer Novikov ring, truncated at a finite energy.

Elements are finite sums  sum_i a_i * T^l_i * e^n_i  with integer coefficients
a_i, non-negative rational energies l_i and integer e-exponents n_i.  An
optional energy cutoff stands in for the completion: every operation drops
terms whose energy exceeds the active window, so associativity etc. hold
exactly inside the window.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

RationalLike = Union[Fraction, int, str]

INFINITE_VALUATION = float("inf")


class NovikovError(ValueError):
    """Malformed term data or unparseable element text."""


def as_energy(value: RationalLike) -> Fraction:
    """Coerce to a non-negative Fraction."""
    q = value if type(value) is Fraction else Fraction(value)
    if q < 0:
        raise NovikovError(f"energy must be non-negative, got {q}")
    return q


def format_rational(q: Fraction) -> str:
    return str(q)  # Fraction prints reduced "p/q", or "p" when q == 1


@dataclass(frozen=True)
class EnergyCutoff:
    """Finite energy window; terms with energy > bound are discarded."""

    bound: Fraction

    def __post_init__(self):
        object.__setattr__(self, "bound", as_energy(self.bound))

    def admits(self, energy: Fraction) -> bool:
        return energy <= self.bound

    def __str__(self) -> str:
        return format_rational(self.bound)


def _merge_cutoffs(a: Optional[Fraction], b: Optional[Fraction]) -> Optional[Fraction]:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


def _coerce_cutoff(cutoff) -> Optional[Fraction]:
    if cutoff is None:
        return None
    if type(cutoff) is Fraction:
        if cutoff < 0:
            raise NovikovError(f"cutoff must be non-negative, got {cutoff}")
        return cutoff
    if isinstance(cutoff, EnergyCutoff):
        return cutoff.bound
    return as_energy(cutoff)


@dataclass(frozen=True)
class NovikovTerm:
    """One monomial a * T^energy * e^maslov_half."""

    coeff: int
    energy: Fraction
    maslov_half: int

    def __post_init__(self):
        if not isinstance(self.coeff, int) or self.coeff == 0:
            raise NovikovError(f"term coefficient must be a nonzero integer, got {self.coeff!r}")
        object.__setattr__(self, "energy", as_energy(self.energy))
        if not isinstance(self.maslov_half, int):
            raise NovikovError(f"e-exponent must be an integer, got {self.maslov_half!r}")

    @property
    def key(self) -> tuple:
        return (self.energy, self.maslov_half)


@dataclass(frozen=True)
class NovikovElement:
    """Canonical truncated Novikov ring element.

    terms are sorted by (energy, maslov_half) with no duplicate keys and no
    zero coefficients; when a cutoff is present every energy lies inside it.
    """

    terms: tuple[NovikovTerm, ...] = ()
    cutoff: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "cutoff", _coerce_cutoff(self.cutoff))
        previous = None
        for t in self.terms:
            key = t.key
            if previous is not None and not previous < key:
                raise NovikovError(
                    "terms out of canonical order or with duplicate keys")
            previous = key
            if self.cutoff is not None and t.energy > self.cutoff:
                raise NovikovError(
                    f"term energy {t.energy} exceeds cutoff {self.cutoff}")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(cutoff=None) -> "NovikovElement":
        return NovikovElement((), _coerce_cutoff(cutoff))

    @staticmethod
    def monomial(coeff: int, energy: RationalLike = 0, maslov_half: int = 0,
                 cutoff=None) -> "NovikovElement":
        return NovikovElement.from_terms(
            [NovikovTerm(coeff, as_energy(energy), maslov_half)] if coeff else [],
            cutoff=cutoff,
        )

    @staticmethod
    def one(cutoff=None) -> "NovikovElement":
        return NovikovElement.monomial(1, 0, 0, cutoff=cutoff)

    @staticmethod
    def from_terms(terms: Iterable[NovikovTerm], cutoff=None) -> "NovikovElement":
        """Canonicalize: merge duplicate keys, drop zeros and beyond-window terms."""
        bound = _coerce_cutoff(cutoff)
        # keyed by integer tuples: Fraction hashing is far more expensive
        acc: dict[tuple, list] = {}
        for t in terms:
            ik = (t.energy.numerator, t.energy.denominator, t.maslov_half)
            slot = acc.get(ik)
            if slot is None:
                acc[ik] = [t.coeff, t.energy]
            else:
                slot[0] += t.coeff
        kept = tuple(
            NovikovTerm(coeff, energy, ik[2])
            for ik, (coeff, energy) in sorted(
                acc.items(), key=lambda item: (item[1][1], item[0][2]))
            if coeff != 0 and (bound is None or energy <= bound)
        )
        return NovikovElement(kept, bound)

    # -- queries -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, energy: RationalLike, maslov_half: int) -> int:
        key = (as_energy(energy), maslov_half)
        for t in self.terms:
            if t.key == key:
                return t.coeff
        return 0

    def valuation(self):
        """Minimum energy of a term, +inf for the zero element."""
        if not self.terms:
            return INFINITE_VALUATION
        return self.terms[0].energy

    def degree(self) -> Optional[int]:
        """2 * maslov_half when all terms agree, else None.

        The zero element is homogeneous of every degree by convention; it also
        returns None here, so use has_degree for the graded membership test.
        """
        if not self.terms:
            return None
        halves = {t.maslov_half for t in self.terms}
        if len(halves) == 1:
            return 2 * halves.pop()
        return None

    def has_degree(self, degree: int) -> bool:
        if not self.terms:
            return True
        return all(2 * t.maslov_half == degree for t in self.terms)

    # -- ring operations ---------------------------------------------------

    def _binary_cutoff(self, other: "NovikovElement") -> Optional[Fraction]:
        return _merge_cutoffs(self.cutoff, other.cutoff)

    def __add__(self, other: "NovikovElement") -> "NovikovElement":
        if not isinstance(other, NovikovElement):
            return NotImplemented
        return NovikovElement.from_terms(
            self.terms + other.terms, cutoff=self._binary_cutoff(other)
        )

    def __neg__(self) -> "NovikovElement":
        return NovikovElement(
            tuple(NovikovTerm(-t.coeff, t.energy, t.maslov_half) for t in self.terms),
            self.cutoff,
        )

    def __sub__(self, other: "NovikovElement") -> "NovikovElement":
        if not isinstance(other, NovikovElement):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other: "NovikovElement") -> "NovikovElement":
        if isinstance(other, int):
            return self.scale(other)
        if not isinstance(other, NovikovElement):
            return NotImplemented
        bound = self._binary_cutoff(other)
        acc: dict[tuple, list] = {}
        for s in self.terms:
            for t in other.terms:
                energy = s.energy + t.energy
                if bound is not None and energy > bound:
                    continue
                ik = (energy.numerator, energy.denominator,
                      s.maslov_half + t.maslov_half)
                slot = acc.get(ik)
                if slot is None:
                    acc[ik] = [s.coeff * t.coeff, energy]
                else:
                    slot[0] += s.coeff * t.coeff
        terms = tuple(
            NovikovTerm(coeff, energy, ik[2])
            for ik, (coeff, energy) in sorted(
                acc.items(), key=lambda item: (item[1][1], item[0][2]))
            if coeff != 0
        )
        return NovikovElement(terms, bound)

    def __rmul__(self, other):
        if isinstance(other, int):
            return self.scale(other)
        return NotImplemented

    def scale(self, n: int) -> "NovikovElement":
        if n == 0:
            return NovikovElement.zero(self.cutoff)
        return NovikovElement(
            tuple(NovikovTerm(n * t.coeff, t.energy, t.maslov_half) for t in self.terms),
            self.cutoff,
        )

    def truncate(self, cutoff) -> "NovikovElement":
        """Drop terms above the window and record the window."""
        bound = _coerce_cutoff(cutoff)
        if bound is None:
            raise NovikovError("truncate requires a finite cutoff")
        return NovikovElement(
            tuple(t for t in self.terms if t.energy <= bound), bound
        )

    # -- textual form (bit-exact grammar) -----------------------------------

    def __str__(self) -> str:
        return format_element(self)

    def __repr__(self) -> str:
        return f"NovikovElement({format_element(self)!r}, cutoff={self.cutoff})"


def format_element(x: NovikovElement) -> str:
    """Canonical text: `<int>*T^<p/q>*e^<int>` terms joined by ` + `.

    A coefficient of 1 and the factor e^0 are omitted; the zero element
    prints as `0`.
    """
    if x.is_zero():
        return "0"
    parts = []
    for t in x.terms:
        s = "" if t.coeff == 1 else f"{t.coeff}*"
        s += f"T^{format_rational(t.energy)}"
        if t.maslov_half != 0:
            s += f"*e^{t.maslov_half}"
        parts.append(s)
    return " + ".join(parts)


_TERM_RE = re.compile(
    r"^(?:(?P<coeff>[+-]?\d+)\*)?"
    r"T\^(?P<energy>\d+(?:/\d+)?)"
    r"(?:\*e\^(?P<maslov>[+-]?\d+))?$"
)


def parse_element(text: str, cutoff=None) -> NovikovElement:
    """Parse the textual element syntax; whitespace is insignificant."""
    compact = re.sub(r"\s+", "", text)
    if not compact:
        raise NovikovError("empty element text")
    if compact == "0":
        return NovikovElement.zero(cutoff)
    terms = []
    for chunk in compact.split("+"):
        if not chunk:
            raise NovikovError(f"empty term in {text!r}")
        m = _TERM_RE.match(chunk)
        if m is None:
            raise NovikovError(f"cannot parse term {chunk!r}")
        coeff = int(m.group("coeff")) if m.group("coeff") is not None else 1
        energy = Fraction(m.group("energy"))
        maslov = int(m.group("maslov")) if m.group("maslov") is not None else 0
        if coeff != 0:
            terms.append(NovikovTerm(coeff, energy, maslov))
    return NovikovElement.from_terms(terms, cutoff=cutoff)
