import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from stvaudit import (PRESETS, Ballot, Candidate, Election, RoundingMode, Status,
                      ZeroDenominatorError, check_termination, preset, run_count)
from stvaudit.engine import ELECTED_ALL, EXCLUSION, FILL_REMAINING, CONTINUE, SURPLUS
from stvaudit.rules import SurplusMethod

from conftest import load_fixture, random_election
from oracles import irv_winner

ALL_RULES = list(PRESETS.values()) + [
    preset("nsw_local").replace(name="nsw_random", surplus_method=SurplusMethod.RANDOM_SAMPLE),
    preset("nsw_local").replace(name="nsw_exact", rounding=RoundingMode.EXACT),
    preset("federal").replace(name="federal_exact", rounding=RoundingMode.EXACT),
    preset("federal").replace(name="gregory_plain", surplus_method=SurplusMethod.GREGORY_WEIGHTED,
                              batch_by_incoming_tv=True),
]


def named(names, vacancies, ballots):
    return Election.from_names(names, vacancies, ballots)


def test_majority_first_preferences():
    t = run_count(named("AB", 1, [(3, "A"), (1, "B")]), preset("federal"))
    assert t.quota == 3
    assert t.winner_names() == ["A"]
    assert len(t.steps) == 1 and t.steps[0].elected_now == (0,)


def test_federal_surplus_hand_trace():
    e = named("ABC", 2, [(10, "ABC"), (6, "B"), (3, "C")])
    t = run_count(e, preset("federal"))
    # quota 19 // 3 + 1 = 7; A's surplus 3 over 10 papers
    assert t.quota == 7
    first, surplus = t.steps
    assert first.elected_now == (0,)
    assert surplus.action == SURPLUS and surplus.source == 0
    assert surplus.transfer_value == Fraction(3, 10)
    assert [(tr.papers, tr.incoming_tv, tr.outgoing_tv) for tr in surplus.transfers] == [
        (10, 1, Fraction(3, 10))]
    assert surplus.tallies == (7, 9, 3)
    assert t.winner_names() == ["A", "B"]


def test_last_parcel_hand_trace():
    e = named("ABCD", 2, [(6, "AB"), (5, "B"), (4, "CAD"), (5, "D")])
    t = run_count(e, preset("act_pre2020"))
    assert t.quota == 7
    # count 2 excludes C, whose 4 papers lift A to 10
    assert t.steps[1].excluded_now == 2 and t.steps[1].tallies[0] == 10
    last = t.steps[2]
    assert last.action == SURPLUS
    # only the 4 papers of the last parcel move, at surplus 3 over 4 papers
    assert last.transfer_value == Fraction(3, 4)
    assert [(tr.received_at_count, tr.papers) for tr in last.transfers] == [(2, 4)]
    assert last.credited[3] == 3 and last.credited[1] == 0
    assert t.winner_names() == ["A", "D"]


def test_last_parcel_with_no_continuing_papers_strands_surplus():
    t = run_count(load_fixture("last_parcel_vs_gregory"), preset("act_pre2020"))
    step = t.steps[2]
    assert step.action == SURPLUS and step.transfers == ()
    assert step.exhausted_value == 2 and sum(step.credited) == 0


def test_nsw_negative_fixture_hand_trace():
    t = run_count(load_fixture("nsw_negative"), preset("nsw_local"))
    assert t.quota == 6
    a_surplus = t.steps[1]
    assert a_surplus.surplus_fraction == Fraction(3, 5)
    assert a_surplus.tallies[1:3] == (1, 2)
    x_surplus = t.steps[4]
    assert x_surplus.source == 3
    assert x_surplus.exhausted_aggregate == Fraction(36, 5)
    assert t.steps[3].tallies[3] == 7
    assert x_surplus.surplus_fraction == -5
    assert x_surplus.credited[4] == -5
    assert x_surplus.tallies[4] == -2


def test_nsw_negative_fixture_exact_mode_is_positive():
    t = run_count(load_fixture("nsw_negative"), preset("nsw_local").replace(rounding="exact"))
    fractions = [s.surplus_fraction for s in t.steps if s.surplus_fraction is not None]
    assert fractions and all(f > 0 for f in fractions)
    assert all(v >= 0 for s in t.steps for v in s.tallies)


def test_zero_denominator_carries_count_index():
    with pytest.raises(ZeroDenominatorError) as info:
        run_count(load_fixture("nsw_zero_denominator"), preset("nsw_local"))
    assert info.value.count_index == 4


def test_exclusion_passes_papers_on():
    t = run_count(named("ABC", 1, [(5, "A"), (3, "B"), (2, "CA")]), preset("federal"))
    step = t.steps[1]
    assert step.action == EXCLUSION and step.excluded_now == 2
    assert step.credited == (2, 0, 0)
    assert t.winner_names() == ["A"]


def test_exclusion_tie_uses_count_back_before_index():
    # after D is excluded B and C both hold 4; C had fewer at count 1
    e = named("ABCD", 1, [(8, "A"), (4, "B"), (3, "C"), (1, "DC")])
    t = run_count(e, preset("federal"))
    assert t.steps[1].tallies[1] == t.steps[1].tallies[2] == 4
    assert t.steps[2].excluded_now == 2


def test_exclusion_tie_without_history_uses_index():
    e = named("ABC", 1, [(4, "A"), (2, "B"), (2, "C")])
    t = run_count(e, preset("federal"))
    assert t.steps[1].excluded_now == 1


def test_exhausted_on_exclusion():
    e = named("ABC", 1, [(5, "A"), (4, "B"), (2, "C")])
    step = run_count(e, preset("federal")).steps[1]
    assert step.exhausted_papers == 2 and step.exhausted_value == 2


def test_exact_quota_has_no_surplus_step():
    e = named("ABC", 2, [(4, "AB"), (3, "B"), (2, "C")])
    t = run_count(e, preset("federal"))
    assert t.quota == 4
    assert all(s.action != SURPLUS for s in t.steps)


def test_exclusion_batches_by_transfer_value():
    t = run_count(load_fixture("nsw_negative"), preset("nsw_local"))
    y_steps = [s for s in t.steps if s.source == 4]
    # Y holds papers at 1 and at -5; the count ends after the first batch
    assert [s.batch for s in y_steps] == [1]
    assert y_steps[0].transfer_value == 1
    t = run_count(load_fixture("federal_value_increase"), preset("federal"))
    assert [s.action for s in t.steps] == ["first_preferences", SURPLUS, EXCLUSION, SURPLUS]


def test_candidate_elected_mid_exclusion_is_skipped_later():
    # quota 14; A's surplus reaches B at 3/10. Excluding B, the first batch
    # (value 1) lifts C to 14; the second batch (3/10) skips C for D.
    e = named("ABCDEF", 3, [(10, "ABCD"), (10, "AF"), (4, "BCD"), (10, "C"), (8, "D"),
                            (5, "E"), (7, "F")])
    t = run_count(e, preset("federal"))
    assert t.quota == 14
    first, second = [s for s in t.steps if s.action == EXCLUSION and s.source == 1]
    assert first.transfer_value == 1 and first.elected_now == (2,)
    assert second.transfer_value == Fraction(3, 10)
    assert second.credited[2] == 0 and second.credited[3] == 3
    assert t.winner_names() == ["A", "C", "D"]


@pytest.mark.parametrize("statuses, vacancies, expected", [
    ([Status.ELECTED, Status.ELECTED, Status.CONTINUING], 2, ELECTED_ALL),
    ([Status.ELECTED, Status.CONTINUING, Status.EXCLUDED], 2, FILL_REMAINING),
    ([Status.ELECTED, Status.CONTINUING, Status.CONTINUING, Status.CONTINUING], 2, CONTINUE),
])
def test_check_termination(statuses, vacancies, expected):
    assert check_termination(statuses, vacancies) == expected


def test_fill_remaining_in_tally_order():
    e = named("ABCD", 3, [(9, "A"), (2, "B"), (3, "C"), (1, "D")])
    t = run_count(e, preset("federal"))
    last = t.steps[-1]
    assert t.winner_names() == ["A", "C", "B"]
    assert last.elected_now[-2:] == (2, 1)


def test_random_sample_is_seeded():
    e = named("ABCD", 2, [(5, "AB"), (5, "AC"), (3, "B"), (3, "C"), (4, "D")])
    r = preset("nsw_local").replace(surplus_method=SurplusMethod.RANDOM_SAMPLE)
    runs = [run_count(e, r.replace(sample_seed=s)).steps[1].credited for s in range(20)]
    assert run_count(e, r).steps[1].credited == runs[0]
    assert len(set(runs)) > 1
    for credited in runs:
        assert sum(credited) == 3 and all(c == int(c) for c in credited)


def test_compression_does_not_change_result():
    e = named("ABC", 2, [(3, "AB"), (2, "C"), (4, "AB"), (4, "BC"), (1, "C")])
    for r in PRESETS.values():
        assert run_count(e, r).winners == run_count(e.compressed(), r).winners


def test_invalid_election_rejected():
    e = Election((Candidate(0, "A"), Candidate(1, "B")), 2, (Ballot((0,), 1),))
    with pytest.raises(ValueError):
        run_count(e, preset("federal"))


@st.composite
def elections(draw, max_candidates=6):
    seed = draw(st.integers(0, 2**32))
    return random_election(random.Random(seed), max_candidates=max_candidates)


def counts(e, r):
    try:
        return run_count(e, r)
    except ZeroDenominatorError:
        return None


@settings(max_examples=60, deadline=None)
@given(elections(), st.sampled_from(ALL_RULES))
def test_transcript_invariants(e, r):
    t = counts(e, r)
    if t is None:
        return
    assert len(t.winners) == e.vacancies
    exhausted = loss = Fraction(0)
    seen = {}
    for s in t.steps:
        exhausted += s.exhausted_value
        loss += s.rounding_loss
        assert sum(s.tallies) + exhausted + loss == e.total_papers
        assert sum(s.credited) + s.exhausted_value + s.rounding_loss == s.removed
        if r.rounding is RoundingMode.EXACT:
            assert s.rounding_loss == 0
        if r.rounding is RoundingMode.FLOOR_INTEGER:
            assert all(v.denominator == 1 for v in s.tallies)
        if r.rounding is RoundingMode.FLOOR_6DP:
            assert all(10**6 % v.denominator == 0 for v in s.tallies)
        if s.action == SURPLUS and r.surplus_method is SurplusMethod.UNIFIED_TV \
                and not r.exhausted_reduce_denominator:
            assert s.rounding_loss >= 0
        for c in s.elected_now:
            assert c not in seen
            seen[c] = s.index
        if s.excluded_now is not None:
            assert s.excluded_now not in seen
            seen[s.excluded_now] = s.index
    # elected tallies freeze at the quota once their surplus has gone
    for c, state in enumerate(t.final_states):
        if state.status is Status.ELECTED and any(s.source == c for s in t.steps):
            after = [s.tallies[c] for s in t.steps if s.index >= next(
                x.index for x in t.steps if x.source == c)]
            assert all(v == t.quota for v in after)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_single_vacancy_matches_irv(seed):
    e = random_election(random.Random(seed), max_candidates=5, vacancies=1)
    want = irv_winner(len(e.candidates), [(b.preferences, b.multiplicity) for b in e.ballots])
    for r in PRESETS.values():
        assert run_count(e, r).winners == (want,)


def test_same_count_twice_is_identical():
    e = load_fixture("nsw_negative")
    for r in ALL_RULES:
        assert run_count(e, r) == run_count(e, r)
