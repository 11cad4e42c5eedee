"""Election, ballot and parcel types plus exact rational helpers.

All amounts are held as :class:`fractions.Fraction`, which is already a
signed, arbitrary precision rational kept in lowest terms with a positive
denominator. Negative values are legal everywhere; some legislated formulas
produce them.
"""

from __future__ import annotations

import enum
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

Rational = Fraction

MICRO = Fraction(1, 10**6)


class EngineError(Exception):
    """Raised when a count cannot proceed under the chosen rules."""

    def __init__(self, message: str, count_index: Optional[int] = None):
        self.count_index = count_index
        if count_index is not None:
            message = f"count {count_index}: {message}"
        super().__init__(message)


class ZeroDenominatorError(EngineError):
    pass


class RoundingMode(str, enum.Enum):
    EXACT = "exact"
    FLOOR_INTEGER = "floor_integer"
    FLOOR_6DP = "floor_6dp"


class Status(str, enum.Enum):
    CONTINUING = "continuing"
    ELECTED = "elected"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class Candidate:
    index: int
    name: str


@dataclass(frozen=True)
class Ballot:
    preferences: tuple[int, ...]
    multiplicity: int = 1

    def __post_init__(self):
        object.__setattr__(self, "preferences", tuple(self.preferences))


@dataclass(frozen=True)
class Election:
    candidates: tuple[Candidate, ...]
    vacancies: int
    ballots: tuple[Ballot, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "ballots", tuple(self.ballots))

    @classmethod
    def from_names(cls, names: Sequence[str], vacancies: int,
                   ballots: Sequence[tuple[int, Sequence[str]]],
                   name: str = "") -> "Election":
        """Build an election from candidate names and ``(count, [names])`` pairs."""
        lookup = {n: i for i, n in enumerate(names)}
        return cls(
            candidates=tuple(Candidate(i, n) for i, n in enumerate(names)),
            vacancies=vacancies,
            ballots=tuple(Ballot(tuple(lookup[p] for p in prefs), count)
                          for count, prefs in ballots),
            name=name,
        )

    @property
    def total_papers(self) -> int:
        return sum(b.multiplicity for b in self.ballots)

    def candidate_index(self, name: str) -> int:
        for c in self.candidates:
            if c.name == name:
                return c.index
        raise KeyError(name)

    def compressed(self) -> "Election":
        """Merge ballots with identical preferences, keeping first-seen order."""
        merged: dict[tuple[int, ...], int] = {}
        for b in self.ballots:
            merged[b.preferences] = merged.get(b.preferences, 0) + b.multiplicity
        return Election(self.candidates, self.vacancies,
                        tuple(Ballot(p, m) for p, m in merged.items()), self.name)


@dataclass(frozen=True)
class Holding:
    """A number of identical papers, positioned at ``position`` in their ballot."""
    ballot: int
    papers: int
    position: int


@dataclass(frozen=True)
class Parcel:
    holdings: tuple[Holding, ...]
    transfer_value: Fraction
    received_at_count: int
    # Amount added to the holder's tally when this parcel arrived.
    credited: Fraction = Fraction(0)

    @property
    def papers(self) -> int:
        return sum(h.papers for h in self.holdings)


@dataclass(frozen=True)
class CandidateState:
    status: Status
    tally: Fraction
    parcels: tuple[Parcel, ...] = field(default=())
    order_elected: Optional[int] = None


def validate_election(e: Election) -> list[str]:
    """Return one description per violated election invariant."""
    problems = []
    n = len(e.candidates)
    for pos, c in enumerate(e.candidates):
        if c.index != pos:
            problems.append(f"candidate {c.name!r} has index {c.index}, expected {pos}")
    names = [c.name for c in e.candidates]
    for name in sorted({x for x in names if names.count(x) > 1}):
        problems.append(f"duplicate candidate name {name!r}")
    if e.vacancies < 1:
        problems.append("vacancies must be positive")
    if e.vacancies >= n:
        problems.append("vacancies must be fewer than candidates")
    for i, b in enumerate(e.ballots):
        if b.multiplicity < 1:
            problems.append(f"multiplicity must be positive in ballot {i}")
        if not b.preferences:
            problems.append(f"empty preferences in ballot {i}")
        seen = set()
        for p in b.preferences:
            if not 0 <= p < n:
                problems.append(f"unknown candidate {p} in ballot {i}")
            elif p in seen:
                problems.append(f"duplicate candidate {p} in ballot {i}")
            seen.add(p)
    if e.total_papers <= 0:
        problems.append("election has no ballot papers")
    return problems


def round_down(x: Fraction, mode: Union[RoundingMode, str]) -> Fraction:
    """Round ``x`` towards minus infinity onto the grid of ``mode``."""
    mode = RoundingMode(mode)
    if mode is RoundingMode.EXACT:
        return x
    if mode is RoundingMode.FLOOR_INTEGER:
        return Fraction(math.floor(x))
    return Fraction(math.floor(x / MICRO)) * MICRO


_OPS = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
}


def rational_arithmetic(a: Fraction, b: Fraction, op: str):
    """Apply ``op`` to two rationals; ``compare`` returns -1, 0 or 1."""
    if op == "compare":
        return (a > b) - (a < b)
    if op == "div" and b == 0:
        raise ZeroDenominatorError(f"division of {format_rational(a)} by zero")
    return Fraction(_OPS[op](Fraction(a), Fraction(b)))


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rational(text: str) -> Fraction:
    """Parse ``"n/d"`` or an integer string. Decimals are rejected."""
    text = text.strip()
    num, sep, den = text.partition("/")
    try:
        if sep:
            return Fraction(int(num), int(den))
        return Fraction(int(num))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not an exact rational: {text!r}") from exc
