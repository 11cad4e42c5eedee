"""Election files, transcript files and finding reports.

Election text format::

    # comments and blank lines are ignored
    name: Example
    vacancies: 2
    candidates: Alice, Bob, Carol
    10: Alice > Bob > Carol
    6: Bob

Preferences may name a candidate or give its 0-based index. The same
document may be written as JSON with keys ``name``, ``vacancies``,
``candidates`` and ``ballots`` (a list of ``{"count": n, "preferences": [...]}``).

Transcripts and reports are canonical JSON: sorted keys, fixed indentation,
and every rational written exactly as ``"numerator/denominator"``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Any, Optional

from .analysis import Finding
from .engine import CountStep, CountTranscript, ParcelTransfer
from .model import (Ballot, Candidate, CandidateState, Election, Holding, Parcel, Status,
                    format_rational, parse_rational, validate_election)
from .rules import Ruleset

TRANSCRIPT_FORMAT = "stvaudit-transcript/1"
REPORT_FORMAT = "stvaudit-report/1"


class ElectionParseError(ValueError):
    """Carries every problem found, each as ``(position, message)``."""

    def __init__(self, errors: list[tuple[Any, str]]):
        self.errors = errors
        super().__init__("\n".join(f"{_where(pos)}: {msg}" for pos, msg in errors))


def _where(pos) -> str:
    return f"line {pos}" if isinstance(pos, int) else str(pos)


def _resolve(token, names: dict[str, int], n: int) -> Optional[int]:
    if isinstance(token, str):
        token = token.strip()
        if token in names:
            return names[token]
        if token.lstrip("-").isdigit():
            token = int(token)
    if isinstance(token, int) and not isinstance(token, bool) and 0 <= token < n:
        return token
    return None


def _build(name, vacancies, cand_names, raw_ballots, errors, positions) -> Election:
    """Shared validation for text and JSON input; ``positions`` locate each field."""
    names = {}
    for c in cand_names:
        if c in names:
            errors.append((positions["candidates"], f"duplicate candidate name {c!r}"))
        names[c] = len(names)
    n = len(cand_names)
    if vacancies is not None and n and not 0 < vacancies < n:
        errors.append((positions["vacancies"], "vacancies must be fewer than candidates"
                       if vacancies >= n else "vacancies must be positive"))
    ballots = []
    for pos, count, prefs in raw_ballots:
        if count < 1:
            errors.append((pos, "multiplicity must be positive"))
        resolved = []
        for token in prefs:
            idx = _resolve(token, names, n)
            if idx is None:
                errors.append((pos, f"unknown candidate {token!r}"))
            elif idx in resolved:
                errors.append((pos, f"duplicate preference {cand_names[idx]!r}"))
            else:
                resolved.append(idx)
        if not prefs:
            errors.append((pos, "ballot has no preferences"))
        ballots.append(Ballot(tuple(resolved), count))
    if not raw_ballots:
        errors.append((positions["ballots"], "no ballots"))
    if errors:
        # line-numbered errors first, in file order
        errors.sort(key=lambda err: (not isinstance(err[0], int),
                                     err[0] if isinstance(err[0], int) else 0))
        raise ElectionParseError(errors)
    e = Election(tuple(Candidate(i, c) for i, c in enumerate(cand_names)), vacancies,
                 tuple(ballots), name or "")
    problems = validate_election(e)
    if problems:
        raise ElectionParseError([("election", p) for p in problems])
    return e


def parse_election(source: str) -> Election:
    """Parse an election document in the text or JSON encoding."""
    if source.lstrip().startswith("{"):
        return _parse_election_json(source)
    errors: list[tuple[Any, str]] = []
    header: dict[str, tuple[int, str]] = {}
    raw_ballots = []
    for lineno, line in enumerate(source.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key, value = key.strip(), value.strip()
        if not sep:
            errors.append((lineno, f"expected 'key: value' or 'COUNT: prefs', got {line!r}"))
        elif key.isdigit():
            prefs = [p.strip() for p in value.split(">")] if value else []
            if any(not p for p in prefs):
                errors.append((lineno, "empty preference"))
                prefs = [p for p in prefs if p]
            raw_ballots.append((lineno, int(key), prefs))
        elif key in ("name", "vacancies", "candidates"):
            if key in header:
                errors.append((lineno, f"repeated header {key!r}"))
            header[key] = (lineno, value)
        else:
            errors.append((lineno, f"unknown header or malformed count {key!r}"))
    positions = {k: header.get(k, ("header", ""))[0] for k in ("name", "vacancies", "candidates")}
    positions["ballots"] = "document"
    vacancies = None
    if "vacancies" in header:
        lineno, value = header["vacancies"]
        try:
            vacancies = int(value)
        except ValueError:
            errors.append((lineno, f"vacancies must be an integer, got {value!r}"))
    else:
        errors.append(("header", "missing 'vacancies:'"))
    cand_names = []
    if "candidates" in header:
        cand_names = [c.strip() for c in header["candidates"][1].split(",")]
        if any(not c for c in cand_names):
            errors.append((header["candidates"][0], "empty candidate name"))
    else:
        errors.append(("header", "missing 'candidates:'"))
    name = header.get("name", (0, ""))[1]
    return _build(name, vacancies, cand_names, raw_ballots, errors, positions)


def _parse_election_json(source: str) -> Election:
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ElectionParseError([(exc.lineno, exc.msg)]) from None
    errors: list[tuple[Any, str]] = []
    if not isinstance(doc, dict):
        raise ElectionParseError([("document", "expected a JSON object")])
    vacancies = doc.get("vacancies")
    if not isinstance(vacancies, int) or isinstance(vacancies, bool):
        errors.append(("field vacancies", "vacancies must be an integer"))
        vacancies = None
    cand_names = doc.get("candidates")
    if not isinstance(cand_names, list) or not all(isinstance(c, str) for c in cand_names):
        errors.append(("field candidates", "candidates must be a list of names"))
        cand_names = []
    raw_ballots = []
    for i, b in enumerate(doc.get("ballots") or []):
        pos = f"field ballots[{i}]"
        if not isinstance(b, dict) or not isinstance(b.get("preferences"), list):
            errors.append((pos, "ballot must be an object with a preferences list"))
            continue
        count = b.get("count", 1)
        if not isinstance(count, int) or isinstance(count, bool):
            errors.append((pos, "count must be an integer"))
            count = 1
        raw_ballots.append((pos, count, b["preferences"]))
    positions = {"vacancies": "field vacancies", "candidates": "field candidates",
                 "ballots": "field ballots"}
    return _build(doc.get("name", ""), vacancies, cand_names, raw_ballots, errors, positions)


def dump_election(e: Election) -> str:
    lines = []
    if e.name:
        lines.append(f"name: {e.name}")
    lines.append(f"vacancies: {e.vacancies}")
    lines.append("candidates: " + ", ".join(c.name for c in e.candidates))
    for b in e.ballots:
        lines.append(f"{b.multiplicity}: " + " > ".join(e.candidates[p].name
                                                         for p in b.preferences))
    return "\n".join(lines) + "\n"


def election_to_dict(e: Election) -> dict:
    return {
        "name": e.name,
        "vacancies": e.vacancies,
        "candidates": [c.name for c in e.candidates],
        "ballots": [{"count": b.multiplicity, "preferences": list(b.preferences)}
                    for b in e.ballots],
    }


def election_from_dict(d: dict) -> Election:
    return Election(tuple(Candidate(i, n) for i, n in enumerate(d["candidates"])),
                    d["vacancies"],
                    tuple(Ballot(tuple(b["preferences"]), b["count"]) for b in d["ballots"]),
                    d.get("name", ""))


# -- transcripts -------------------------------------------------------------

def _q(x: Optional[Fraction]) -> Optional[str]:
    return None if x is None else format_rational(x)


def _uq(s: Optional[str]) -> Optional[Fraction]:
    return None if s is None else parse_rational(s)


def _step_to_dict(s: CountStep) -> dict:
    return {
        "index": s.index,
        "action": s.action,
        "source": s.source,
        "batch": s.batch,
        "removed": _q(s.removed),
        "credited": [_q(x) for x in s.credited],
        "papers_received": list(s.papers_received),
        "transfer_value": _q(s.transfer_value),
        "surplus_fraction": _q(s.surplus_fraction),
        "exhausted_aggregate": _q(s.exhausted_aggregate),
        "transfers": [{"received_at_count": t.received_at_count, "papers": t.papers,
                       "incoming_tv": _q(t.incoming_tv), "outgoing_tv": _q(t.outgoing_tv)}
                      for t in s.transfers],
        "exhausted_papers": s.exhausted_papers,
        "exhausted_value": _q(s.exhausted_value),
        "rounding_loss": _q(s.rounding_loss),
        "tallies": [_q(x) for x in s.tallies],
        "elected_now": list(s.elected_now),
        "excluded_now": s.excluded_now,
    }


def _step_from_dict(d: dict) -> CountStep:
    return CountStep(
        index=d["index"], action=d["action"], source=d["source"], batch=d["batch"],
        removed=_uq(d["removed"]),
        credited=tuple(_uq(x) for x in d["credited"]),
        papers_received=tuple(d["papers_received"]),
        transfer_value=_uq(d["transfer_value"]),
        surplus_fraction=_uq(d["surplus_fraction"]),
        exhausted_aggregate=_uq(d["exhausted_aggregate"]),
        transfers=tuple(ParcelTransfer(t["received_at_count"], t["papers"],
                                       _uq(t["incoming_tv"]), _uq(t["outgoing_tv"]))
                        for t in d["transfers"]),
        exhausted_papers=d["exhausted_papers"],
        exhausted_value=_uq(d["exhausted_value"]),
        rounding_loss=_uq(d["rounding_loss"]),
        tallies=tuple(_uq(x) for x in d["tallies"]),
        elected_now=tuple(d["elected_now"]),
        excluded_now=d["excluded_now"],
    )


def _state_to_dict(s: CandidateState) -> dict:
    return {
        "status": s.status.value,
        "tally": _q(s.tally),
        "order_elected": s.order_elected,
        "parcels": [{"transfer_value": _q(p.transfer_value),
                     "received_at_count": p.received_at_count,
                     "credited": _q(p.credited),
                     "holdings": [[h.ballot, h.papers, h.position] for h in p.holdings]}
                    for p in s.parcels],
    }


def _state_from_dict(d: dict) -> CandidateState:
    parcels = tuple(Parcel(tuple(Holding(*h) for h in p["holdings"]),
                           _uq(p["transfer_value"]), p["received_at_count"], _uq(p["credited"]))
                    for p in d["parcels"])
    return CandidateState(Status(d["status"]), _uq(d["tally"]), parcels, d["order_elected"])


def transcript_to_dict(t: CountTranscript) -> dict:
    return {
        "format": TRANSCRIPT_FORMAT,
        "election": election_to_dict(t.election),
        "ruleset": t.ruleset.to_dict(),
        "quota": t.quota,
        "steps": [_step_to_dict(s) for s in t.steps],
        "winners": list(t.winners),
        "final_states": [_state_to_dict(s) for s in t.final_states],
    }


def transcript_from_dict(d: dict) -> CountTranscript:
    if d.get("format") != TRANSCRIPT_FORMAT:
        raise ValueError(f"not a transcript document (format {d.get('format')!r})")
    return CountTranscript(
        election=election_from_dict(d["election"]),
        ruleset=Ruleset.from_dict(d["ruleset"]),
        quota=d["quota"],
        steps=tuple(_step_from_dict(s) for s in d["steps"]),
        winners=tuple(d["winners"]),
        final_states=tuple(_state_from_dict(s) for s in d["final_states"]),
    )


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def dump_transcript(t: CountTranscript) -> str:
    return canonical_json(transcript_to_dict(t))


def load_transcript(text: str) -> CountTranscript:
    try:
        return transcript_from_dict(json.loads(text))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed transcript: {exc}") from None


# -- reports -----------------------------------------------------------------

def _plain(value):
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def finding_to_dict(f: Finding) -> dict:
    return {"kind": f.kind, "count_index": f.count_index, "candidates": list(f.candidates),
            "evidence": _plain(f.evidence), "message": f.message}


def dump_report(findings) -> str:
    return canonical_json({"format": REPORT_FORMAT,
                           "findings": [finding_to_dict(f) for f in findings]})
