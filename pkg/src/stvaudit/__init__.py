"""Multi-ruleset STV counting with audit transcripts and anomaly detectors."""

from .model import (Ballot, Candidate, CandidateState, Election, EngineError, Holding,
                    Parcel, RoundingMode, Status, ZeroDenominatorError, format_rational,
                    parse_rational, rational_arithmetic, round_down, validate_election)
from .rules import (PRESETS, Ruleset, SurplusMethod, compute_quota, preset,
                    surplus_fraction_nsw, transfer_value_unified, transfer_value_weighted)
from .engine import CountStep, CountTranscript, ParcelTransfer, check_termination, run_count

__version__ = "0.1.0"
