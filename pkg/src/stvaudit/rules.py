"""Rulesets and the per-jurisdiction surplus formulas."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .model import RoundingMode, ZeroDenominatorError


class SurplusMethod(str, enum.Enum):
    LAST_PARCEL = "last_parcel"
    RANDOM_SAMPLE = "random_sample"
    GREGORY_WEIGHTED = "gregory_weighted"
    UNIFIED_TV = "unified_tv"


@dataclass(frozen=True)
class Ruleset:
    name: str
    surplus_method: SurplusMethod
    rounding: RoundingMode
    exhausted_reduce_denominator: bool
    batch_by_incoming_tv: bool
    surplus_cap_at_one: bool
    sample_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "surplus_method", SurplusMethod(self.surplus_method))
        object.__setattr__(self, "rounding", RoundingMode(self.rounding))
        if not 0 <= self.sample_seed < 2**64:
            raise ValueError("sample_seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> "Ruleset":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "surplus_method": self.surplus_method.value,
            "rounding": self.rounding.value,
            "exhausted_reduce_denominator": self.exhausted_reduce_denominator,
            "batch_by_incoming_tv": self.batch_by_incoming_tv,
            "surplus_cap_at_one": self.surplus_cap_at_one,
            "sample_seed": self.sample_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Ruleset":
        return cls(**d)


PRESETS: dict[str, Ruleset] = {
    "federal": Ruleset("federal", SurplusMethod.UNIFIED_TV, RoundingMode.FLOOR_INTEGER,
                       exhausted_reduce_denominator=False, batch_by_incoming_tv=False,
                       surplus_cap_at_one=False),
    "nsw_local": Ruleset("nsw_local", SurplusMethod.GREGORY_WEIGHTED, RoundingMode.FLOOR_INTEGER,
                         exhausted_reduce_denominator=True, batch_by_incoming_tv=True,
                         surplus_cap_at_one=True),
    "act_pre2020": Ruleset("act_pre2020", SurplusMethod.LAST_PARCEL, RoundingMode.FLOOR_INTEGER,
                           exhausted_reduce_denominator=True, batch_by_incoming_tv=True,
                           surplus_cap_at_one=True),
    "act2020": Ruleset("act2020", SurplusMethod.LAST_PARCEL, RoundingMode.FLOOR_6DP,
                       exhausted_reduce_denominator=True, batch_by_incoming_tv=True,
                       surplus_cap_at_one=True),
    "victoria": Ruleset("victoria", SurplusMethod.UNIFIED_TV, RoundingMode.FLOOR_INTEGER,
                        exhausted_reduce_denominator=False, batch_by_incoming_tv=False,
                        surplus_cap_at_one=False),
}


def preset(name: str) -> Ruleset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown ruleset {name!r}; choose from {', '.join(PRESETS)}") from None


def compute_quota(total_papers: int, vacancies: int) -> int:
    """Droop quota: the smallest integer no vacancies+1 candidates can all reach."""
    if total_papers < 1 or vacancies < 1:
        raise ValueError("total_papers and vacancies must be positive")
    return total_papers // (vacancies + 1) + 1


def surplus_fraction_nsw(tally: Fraction, quota: int, exhausted: Fraction, cap: bool,
                         count_index: Optional[int] = None) -> Fraction:
    """Surplus divided by the tally less the exact value of exhausted papers.

    ``tally`` is the rounded running tally while ``exhausted`` is an unrounded
    sum, so the denominator can go negative and the result with it. The cap
    only applies to fractions above one; negative results pass through.
    """
    denominator = Fraction(tally) - Fraction(exhausted)
    if denominator == 0:
        raise ZeroDenominatorError(
            f"surplus fraction denominator is zero (tally {tally} equals exhausted value)",
            count_index)
    fraction = (Fraction(tally) - quota) / denominator
    if cap and fraction > 1:
        return Fraction(1)
    return fraction


def transfer_value_unified(surplus: Fraction, ballot_count: int) -> Fraction:
    """Surplus spread over physical papers, regardless of what each is worth."""
    if ballot_count < 1:
        raise ValueError("ballot_count must be positive")
    return Fraction(surplus) / ballot_count


def transfer_value_weighted(incoming_tv: Fraction, surplus: Fraction,
                            total_value: Fraction) -> Fraction:
    return Fraction(incoming_tv) * Fraction(surplus) / Fraction(total_value)
