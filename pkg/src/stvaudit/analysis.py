"""Anomaly detectors over count transcripts, manipulation search and ruleset comparison.

The detectors only look at :class:`~stvaudit.engine.CountTranscript` data so
they work equally on transcripts loaded from disk.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .engine import SURPLUS, CountTranscript, run_count
from .model import Ballot, Election
from .rules import Ruleset

NEGATIVE_TRANSFER_VALUE = "negative_transfer_value"
NEGATIVE_TALLY = "negative_tally"
VALUE_INCREASE = "value_increase"
MONOTONICITY_VIOLATION = "monotonicity_violation"
RULESET_DISAGREEMENT = "ruleset_disagreement"

FINDING_KINDS = (NEGATIVE_TRANSFER_VALUE, NEGATIVE_TALLY, VALUE_INCREASE,
                 MONOTONICITY_VIOLATION, RULESET_DISAGREEMENT)


@dataclass(frozen=True)
class Finding:
    kind: str
    count_index: Optional[int]
    candidates: tuple[int, ...]
    evidence: dict = field(default_factory=dict, hash=False)
    message: str = ""


@dataclass
class AnomalyReport:
    findings: list[Finding] = field(default_factory=list)

    def __bool__(self):
        return bool(self.findings)

    def __len__(self):
        return len(self.findings)

    def __iter__(self):
        return iter(self.findings)

    def of_kind(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]


def _names(t: CountTranscript, cands) -> str:
    return ", ".join(t.election.candidates[c].name for c in cands)


def _negative_values(step) -> list[Fraction]:
    values = [step.transfer_value, step.surplus_fraction]
    values += [tr.outgoing_tv for tr in step.transfers]
    return [v for v in values if v is not None and v < 0]


def detect_negative(t: CountTranscript) -> list[Finding]:
    """One finding per count with a negative transfer value or a negative tally."""
    findings = []
    for step in t.steps:
        negative_tvs = _negative_values(step)
        below_zero = tuple(c for c, v in enumerate(step.tallies) if v < 0)
        if not negative_tvs and not below_zero:
            continue
        evidence = {"negative_tallies": {t.election.candidates[c].name: step.tallies[c]
                                         for c in below_zero}}
        if negative_tvs:
            previous = t.steps[step.index - 2].tallies[step.source]
            evidence.update(transfer_value=min(negative_tvs), source_tally=previous,
                            exhausted_aggregate=step.exhausted_aggregate,
                            surplus_fraction=step.surplus_fraction)
            cands = (step.source,) + tuple(c for c in below_zero if c != step.source)
            message = (f"count {step.index}: {_names(t, [step.source])} distributes at "
                       f"negative transfer value {min(negative_tvs)}")
            findings.append(Finding(NEGATIVE_TRANSFER_VALUE, step.index, cands, evidence, message))
        else:
            message = f"count {step.index}: negative tally for {_names(t, below_zero)}"
            findings.append(Finding(NEGATIVE_TALLY, step.index, below_zero, evidence, message))
    return findings


def detect_value_increase(t: CountTranscript) -> list[Finding]:
    """One finding per surplus parcel that leaves worth more than it arrived."""
    findings = []
    for step in t.steps:
        if step.action != SURPLUS:
            continue
        for tr in step.transfers:
            if tr.outgoing_tv > tr.incoming_tv:
                findings.append(Finding(
                    VALUE_INCREASE, step.index, (step.source,),
                    {"received_at_count": tr.received_at_count, "papers": tr.papers,
                     "incoming_tv": tr.incoming_tv, "outgoing_tv": tr.outgoing_tv},
                    f"count {step.index}: {tr.papers} papers received by "
                    f"{_names(t, [step.source])} at count {tr.received_at_count} rise "
                    f"from {tr.incoming_tv} to {tr.outgoing_tv}"))
    return findings


DETECTORS = {
    "negative": detect_negative,
    "value_increase": detect_value_increase,
}


def detect_all(t: CountTranscript, only: Optional[Sequence[str]] = None) -> AnomalyReport:
    report = AnomalyReport()
    for name, detector in DETECTORS.items():
        if only is None or name in only:
            report.findings.extend(detector(t))
    return report


@dataclass(frozen=True)
class SwapManipulation:
    donor: int
    recipient: int
    papers_moved: int
    description: str
    winners_before: tuple[int, ...] = ()
    winners_after: tuple[int, ...] = ()


def eligible_papers(e: Election, donor: int, beneficiary: int) -> int:
    """Papers ranking ``donor`` ahead of ``beneficiary`` (both must appear)."""
    total = 0
    for b in e.ballots:
        p = b.preferences
        if donor in p and beneficiary in p and p.index(donor) < p.index(beneficiary):
            total += b.multiplicity
    return total


def apply_swap(e: Election, donor: int, beneficiary: int, m: int) -> Election:
    """Swap donor and beneficiary on the first ``m`` eligible papers, in input order."""
    left = m
    ballots = []
    for b in e.ballots:
        p = b.preferences
        if left and donor in p and beneficiary in p and p.index(donor) < p.index(beneficiary):
            take = min(left, b.multiplicity)
            left -= take
            swapped = tuple(beneficiary if c == donor else donor if c == beneficiary else c
                            for c in p)
            ballots.append(Ballot(swapped, take))
            if take < b.multiplicity:
                ballots.append(Ballot(p, b.multiplicity - take))
        else:
            ballots.append(b)
    if left:
        raise ValueError(f"only {m - left} eligible papers, {m} requested")
    return Election(e.candidates, e.vacancies, tuple(ballots), e.name)


def search_monotonicity(e: Election, r: Ruleset, donor: int, beneficiary: int,
                        max_papers: int) -> Optional[SwapManipulation]:
    """Smallest number of donor-to-beneficiary swaps that make the losing donor win.

    Winning is not monotone in the number of swaps, so every m from 1 up is
    tried in turn.
    """
    before = run_count(e, r).winners
    if donor in before:
        raise ValueError(f"{e.candidates[donor].name} already wins")
    available = eligible_papers(e, donor, beneficiary)
    if max_papers > available:
        raise ValueError(f"max_papers {max_papers} exceeds the {available} eligible papers")
    for m in range(1, max_papers + 1):
        changed = apply_swap(e, donor, beneficiary, m)
        after = run_count(changed, r).winners
        if donor in after:
            d, b = e.candidates[donor].name, e.candidates[beneficiary].name
            return SwapManipulation(
                donor, beneficiary, m,
                f"on the first {m} papers ranking {d} above {b}, swap {d} and {b}",
                before, after)
    return None


def monotonicity_finding(e: Election, s: SwapManipulation) -> Finding:
    return Finding(MONOTONICITY_VIOLATION, None, (s.donor, s.recipient),
                   {"papers_moved": s.papers_moved,
                    "winners_before": [e.candidates[c].name for c in s.winners_before],
                    "winners_after": [e.candidates[c].name for c in s.winners_after]},
                   s.description)


@dataclass
class Comparison:
    names: list[str]
    winners: list[tuple[int, ...]]
    agreement: list[list[bool]]
    findings: list[Finding]

    @property
    def agree(self) -> bool:
        return not self.findings


def compare_rulesets(e: Election, rulesets: Sequence[Ruleset]) -> Comparison:
    """Count under each ruleset and flag every pair whose winner sets differ."""
    if len(rulesets) < 2:
        raise ValueError("need at least two rulesets to compare")
    winners = [run_count(e, r).winners for r in rulesets]
    names = [r.name for r in rulesets]
    n = len(rulesets)
    agreement = [[set(winners[i]) == set(winners[j]) for j in range(n)] for i in range(n)]
    findings = []
    for i in range(n):
        for j in range(i + 1, n):
            if not agreement[i][j]:
                differ = tuple(sorted(set(winners[i]) ^ set(winners[j])))
                findings.append(Finding(
                    RULESET_DISAGREEMENT, None, differ,
                    {names[i]: [e.candidates[c].name for c in winners[i]],
                     names[j]: [e.candidates[c].name for c in winners[j]]},
                    f"{names[i]} and {names[j]} elect different candidates"))
    return Comparison(names, winners, agreement, findings)
