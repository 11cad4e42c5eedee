"""The STV count loop.

A count starts by placing every paper with its first preference, elects
anyone at or above the quota, then alternates between distributing surpluses
(largest first) and excluding the lowest continuing candidate until every
vacancy is filled or the continuing candidates exactly fill what is left.

Every count is recorded as a :class:`CountStep`. Each step satisfies::

    sum(credited) + exhausted_value + rounding_loss == removed

where ``removed`` is what left the source candidate's tally, so the sum of
all tallies, exhausted value and rounding loss always equals the number of
papers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .model import (CandidateState, Election, EngineError, Holding, Parcel,
                    Status, round_down, validate_election)
from .rules import (Ruleset, SurplusMethod, compute_quota, surplus_fraction_nsw,
                    transfer_value_unified, transfer_value_weighted)

ZERO = Fraction(0)
ONE = Fraction(1)

FIRST_PREFERENCES = "first_preferences"
SURPLUS = "surplus"
EXCLUSION = "exclusion"


@dataclass(frozen=True)
class ParcelTransfer:
    """Papers from one source parcel and the value they left with."""
    received_at_count: int
    papers: int
    incoming_tv: Fraction
    outgoing_tv: Fraction


@dataclass(frozen=True)
class CountStep:
    index: int
    action: str
    source: Optional[int]
    removed: Fraction
    credited: tuple[Fraction, ...]
    papers_received: tuple[int, ...]
    exhausted_papers: int
    exhausted_value: Fraction
    rounding_loss: Fraction
    tallies: tuple[Fraction, ...]
    elected_now: tuple[int, ...] = ()
    excluded_now: Optional[int] = None
    batch: Optional[int] = None
    transfer_value: Optional[Fraction] = None
    surplus_fraction: Optional[Fraction] = None
    exhausted_aggregate: Optional[Fraction] = None
    transfers: tuple[ParcelTransfer, ...] = field(default=())


@dataclass(frozen=True)
class CountTranscript:
    election: Election
    ruleset: Ruleset
    quota: int
    steps: tuple[CountStep, ...]
    winners: tuple[int, ...]
    final_states: tuple[CandidateState, ...]

    def winner_names(self) -> list[str]:
        return [self.election.candidates[i].name for i in self.winners]

    def step(self, index: int) -> CountStep:
        return self.steps[index - 1]


CONTINUE = "continue"
ELECTED_ALL = "elected_all"
FILL_REMAINING = "fill_remaining"


def check_termination(statuses, vacancies: int) -> str:
    elected = sum(1 for s in statuses if s is Status.ELECTED)
    continuing = sum(1 for s in statuses if s is Status.CONTINUING)
    if elected >= vacancies:
        return ELECTED_ALL
    if continuing == vacancies - elected:
        return FILL_REMAINING
    return CONTINUE


def distribute_first_preferences(e: Election) -> list[Parcel]:
    """One parcel per candidate holding its first-preference papers at value 1."""
    holdings: list[list[Holding]] = [[] for _ in e.candidates]
    for i, b in enumerate(e.ballots):
        holdings[b.preferences[0]].append(Holding(i, b.multiplicity, 0))
    return [Parcel(tuple(hs), ONE, 1, Fraction(sum(h.papers for h in hs)))
            for hs in holdings]


@dataclass
class _Move:
    source: Holding
    dest: Optional[Holding]
    incoming_tv: Fraction
    outgoing_tv: Fraction
    received_at: int


class _Count:

    def __init__(self, election: Election, ruleset: Ruleset):
        self.e = election
        self.r = ruleset
        self.n = len(election.candidates)
        self.quota = compute_quota(election.total_papers, election.vacancies)
        self.status = [Status.CONTINUING] * self.n
        self.tally = [ZERO] * self.n
        self.parcels: list[list[Parcel]] = [[] for _ in range(self.n)]
        self.order_elected: list[Optional[int]] = [None] * self.n
        self.pending: list[int] = []
        self.history: list[tuple[Fraction, ...]] = []
        self.steps: list[CountStep] = []
        self.rng = random.Random(ruleset.sample_seed)

    # -- helpers ---------------------------------------------------------

    def _route(self, h: Holding) -> Optional[Holding]:
        prefs = self.e.ballots[h.ballot].preferences
        pos = h.position + 1
        while pos < len(prefs) and self.status[prefs[pos]] is not Status.CONTINUING:
            pos += 1
        if pos == len(prefs):
            return None
        return Holding(h.ballot, h.papers, pos)

    def _dest(self, h: Holding) -> int:
        return self.e.ballots[h.ballot].preferences[h.position]

    def _ladder(self, tied: list[int], lowest: bool) -> int:
        """Break a tie by count-back through earlier counts, then by index."""
        pick = min if lowest else max
        group = sorted(tied)
        for tallies in reversed(self.history[:-1]):
            if len(group) == 1:
                break
            target = pick(tallies[c] for c in group)
            group = [c for c in group if tallies[c] == target]
        return group[0]

    def _select(self, candidates: list[int], lowest: bool) -> int:
        pick = min if lowest else max
        best = pick(self.tally[c] for c in candidates)
        return self._ladder([c for c in candidates if self.tally[c] == best], lowest)

    def _ranked(self, candidates: list[int]) -> list[int]:
        remaining = list(candidates)
        ordered = []
        while remaining:
            c = self._select(remaining, lowest=False)
            ordered.append(c)
            remaining.remove(c)
        return ordered

    def _continuing(self) -> list[int]:
        return [c for c in range(self.n) if self.status[c] is Status.CONTINUING]

    def _elect(self, c: int):
        self.status[c] = Status.ELECTED
        self.order_elected[c] = sum(1 for s in self.status if s is Status.ELECTED)

    def _elect_quota_holders(self) -> tuple[int, ...]:
        reached = [c for c in self._continuing() if self.tally[c] >= self.quota]
        unfilled = self.e.vacancies - sum(1 for s in self.status if s is Status.ELECTED)
        chosen = self._ranked(reached)[:unfilled]
        for c in chosen:
            self._elect(c)
            if self.tally[c] > self.quota:
                self.pending.append(c)
        return tuple(chosen)

    def _deliver(self, moves: list[_Move], index: int, batched: bool):
        """Credit routed papers to their new holders, rounding per batch."""
        credited = [ZERO] * self.n
        papers = [0] * self.n
        exhausted_papers = 0
        exhausted_value = ZERO
        batches: dict[Fraction, list[_Move]] = {}
        for m in moves:
            batches.setdefault(m.incoming_tv if batched else ZERO, []).append(m)
        for batch in batches.values():
            # dest -> outgoing tv -> holdings, all in first-seen order
            received: dict[int, dict[Fraction, list[Holding]]] = {}
            for m in batch:
                if m.dest is None:
                    exhausted_papers += m.source.papers
                    exhausted_value += m.source.papers * m.outgoing_tv
                    continue
                d = self._dest(m.dest)
                received.setdefault(d, {}).setdefault(m.outgoing_tv, []).append(m.dest)
            for d, by_tv in received.items():
                exact = [tv * sum(h.papers for h in hs) for tv, hs in by_tv.items()]
                total = round_down(sum(exact, ZERO), self.r.rounding)
                shares = [round_down(x, self.r.rounding) for x in exact[:-1]]
                shares.append(total - sum(shares, ZERO))
                for (tv, hs), share in zip(by_tv.items(), shares):
                    self.parcels[d].append(Parcel(tuple(hs), tv, index, share))
                    papers[d] += sum(h.papers for h in hs)
                credited[d] += total
        for d in range(self.n):
            self.tally[d] += credited[d]
        return credited, papers, exhausted_papers, exhausted_value

    def _record(self, *, action, source, removed, credited, papers, exhausted_papers,
                exhausted_value, excluded=None, **extra) -> CountStep:
        index = len(self.steps) + 1
        loss = removed - sum(credited, ZERO) - exhausted_value
        self.history.append(tuple(self.tally))
        elected = self._elect_quota_holders()
        step = CountStep(index=index, action=action, source=source, removed=removed,
                         credited=tuple(credited), papers_received=tuple(papers),
                         exhausted_papers=exhausted_papers, exhausted_value=exhausted_value,
                         rounding_loss=loss, tallies=tuple(self.tally), elected_now=elected,
                         excluded_now=excluded, **extra)
        self.steps.append(step)
        return step

    @staticmethod
    def _transfers(moves: list[_Move]) -> tuple[ParcelTransfer, ...]:
        merged: dict[tuple, int] = {}
        for m in moves:
            key = (m.received_at, m.incoming_tv, m.outgoing_tv)
            merged[key] = merged.get(key, 0) + m.source.papers
        return tuple(ParcelTransfer(k[0], p, k[1], k[2]) for k, p in merged.items())

    # -- counts ----------------------------------------------------------

    def first_preferences(self):
        for c, parcel in enumerate(distribute_first_preferences(self.e)):
            if parcel.holdings:
                self.parcels[c].append(parcel)
                self.tally[c] = parcel.credited
        papers = [int(t) for t in self.tally]
        self._record(action=FIRST_PREFERENCES, source=None, removed=Fraction(self.e.total_papers),
                     credited=list(self.tally), papers=papers, exhausted_papers=0,
                     exhausted_value=ZERO)

    def distribute_surplus(self, c: int):
        index = len(self.steps) + 1
        r = self.r
        surplus = self.tally[c] - self.quota
        method = r.surplus_method
        extra: dict = {}
        held: list[Parcel] = []
        stranded = ZERO

        if method is SurplusMethod.LAST_PARCEL:
            last = self.parcels[c][-1]
            held = self.parcels[c][:-1]
            moves = [_Move(h, self._route(h), last.transfer_value, ZERO, last.received_at_count)
                     for h in last.holdings]
            if r.exhausted_reduce_denominator:
                left = [m for m in moves if m.dest is None]
                moves = [m for m in moves if m.dest is not None]
                if left:
                    held.append(replace(last, holdings=tuple(m.source for m in left)))
            count = sum(m.source.papers for m in moves)
            if count:
                tv = surplus / count
                if r.surplus_cap_at_one and tv > last.transfer_value:
                    tv = last.transfer_value
                for m in moves:
                    m.outgoing_tv = tv
                stranded = surplus - tv * count
                extra["transfer_value"] = tv
            else:
                stranded = surplus

        elif method is SurplusMethod.RANDOM_SAMPLE:
            parcels = self.parcels[c]
            latest = max(p.received_at_count for p in parcels)
            in_pool = [latest == 1 or p.received_at_count == latest for p in parcels]
            pool = [p for p, keep in zip(parcels, in_pool) if keep]
            held = [p for p, keep in zip(parcels, in_pool) if not keep]
            candidates = [_Move(h, self._route(h), p.transfer_value, ONE, p.received_at_count)
                          for p in pool for h in p.holdings]
            if r.exhausted_reduce_denominator:
                held += [Parcel((m.source,), m.incoming_tv, m.received_at)
                         for m in candidates if m.dest is None]
                candidates = [m for m in candidates if m.dest is not None]
            size = sum(m.source.papers for m in candidates)
            k = min(math.floor(surplus), size)
            chosen = sorted(self.rng.sample(range(size), k))
            moves = []
            start = 0
            pos = 0
            for m in candidates:
                end = start + m.source.papers
                take = 0
                while pos < len(chosen) and chosen[pos] < end:
                    take += 1
                    pos += 1
                if take:
                    moves.append(_Move(replace(m.source, papers=take),
                                       m.dest and replace(m.dest, papers=take),
                                       m.incoming_tv, ONE, m.received_at))
                if take < m.source.papers:
                    held.append(Parcel((replace(m.source, papers=m.source.papers - take),),
                                       m.incoming_tv, m.received_at))
                start = end
            stranded = surplus - k
            extra["transfer_value"] = ONE

        else:
            moves = [_Move(h, self._route(h), p.transfer_value, ZERO, p.received_at_count)
                     for p in self.parcels[c] for h in p.holdings]
            if r.exhausted_reduce_denominator:
                left = [m for m in moves if m.dest is None]
                moves = [m for m in moves if m.dest is not None]
                held = [Parcel((m.source,), m.incoming_tv, m.received_at) for m in left]
                exhausted = sum((m.source.papers * m.incoming_tv for m in left), ZERO)
                extra["exhausted_aggregate"] = exhausted
                if moves:
                    fraction = surplus_fraction_nsw(self.tally[c], self.quota, exhausted,
                                                    r.surplus_cap_at_one, index)
                    for m in moves:
                        m.outgoing_tv = m.incoming_tv * fraction
                    extra["surplus_fraction"] = fraction
                    # exhausted papers beyond the quota have nowhere to go
                    if fraction == 1 and exhausted > self.quota:
                        stranded = exhausted - self.quota
                else:
                    stranded = surplus
            elif method is SurplusMethod.UNIFIED_TV:
                tv = transfer_value_unified(surplus, sum(m.source.papers for m in moves))
                for m in moves:
                    m.outgoing_tv = tv
                extra["transfer_value"] = tv
            else:
                for m in moves:
                    m.outgoing_tv = transfer_value_weighted(m.incoming_tv, surplus, self.tally[c])
                extra["surplus_fraction"] = surplus / self.tally[c]

        self.tally[c] = Fraction(self.quota)
        self.parcels[c] = held
        credited, papers, ex_papers, ex_value = self._deliver(moves, index, r.batch_by_incoming_tv)
        self._record(action=SURPLUS, source=c, removed=surplus, credited=credited, papers=papers,
                     exhausted_papers=ex_papers, exhausted_value=ex_value + stranded,
                     transfers=self._transfers(moves), **extra)

    def exclude(self, c: int) -> bool:
        """Exclude ``c`` batch by batch; returns True if the count finished."""
        self.status[c] = Status.EXCLUDED
        batches: dict[Fraction, list[Parcel]] = {}
        for p in self.parcels[c]:
            batches.setdefault(p.transfer_value, []).append(p)
        self.parcels[c] = []
        if not batches:
            batches[ONE] = []
        for number, (tv, parcels) in enumerate(batches.items(), start=1):
            index = len(self.steps) + 1
            removed = sum((p.credited for p in parcels), ZERO)
            moves = [_Move(h, self._route(h), tv, tv, p.received_at_count)
                     for p in parcels for h in p.holdings]
            self.tally[c] -= removed
            credited, papers, ex_papers, ex_value = self._deliver(moves, index, False)
            self._record(action=EXCLUSION, source=c, removed=removed, credited=credited,
                         papers=papers, exhausted_papers=ex_papers, exhausted_value=ex_value,
                         excluded=c if number == 1 else None, batch=number, transfer_value=tv,
                         transfers=self._transfers(moves))
            if self._terminate():
                return True
        assert self.tally[c] == 0, "excluded candidate kept value"
        return False

    def _terminate(self) -> bool:
        state = check_termination(self.status, self.e.vacancies)
        if state == CONTINUE:
            return False
        if state == FILL_REMAINING:
            remaining = self._ranked(self._continuing())
            for c in remaining:
                self._elect(c)
            last = self.steps[-1]
            self.steps[-1] = replace(last, elected_now=last.elected_now + tuple(remaining))
        return True

    def run(self) -> CountTranscript:
        self.first_preferences()
        while not self._terminate():
            if self.pending:
                c = max(self.pending, key=lambda x: (self.tally[x], -self.order_elected[x]))
                self.pending.remove(c)
                self.distribute_surplus(c)
            else:
                c = self._select(self._continuing(), lowest=True)
                if self.exclude(c):
                    break
        return self._transcript()

    def _transcript(self) -> CountTranscript:
        winners = sorted((c for c in range(self.n) if self.status[c] is Status.ELECTED),
                         key=lambda c: self.order_elected[c])
        states = tuple(CandidateState(self.status[c], self.tally[c], tuple(self.parcels[c]),
                                      self.order_elected[c]) for c in range(self.n))
        return CountTranscript(self.e, self.r, self.quota, tuple(self.steps), tuple(winners),
                               states)


def run_count(e: Election, r: Ruleset) -> CountTranscript:
    """Count ``e`` under ``r`` and return the full transcript."""
    problems = validate_election(e)
    if problems:
        raise ValueError("invalid election: " + "; ".join(problems))
    return _Count(e, r).run()


__all__ = [
    "CountStep", "CountTranscript", "EngineError", "ParcelTransfer", "check_termination",
    "distribute_first_preferences", "run_count",
]
