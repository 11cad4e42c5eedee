import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stvaudit import Ballot, Candidate, Election  # noqa: E402
from stvaudit.fileformat import parse_election  # noqa: E402
from oracles import random_ballots  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str) -> Election:
    return parse_election((FIXTURES / f"{name}.stv").read_text())


def random_election(rng: random.Random, max_candidates=7, max_ballots=15, max_count=8,
                    vacancies=None) -> Election:
    n = rng.randint(2 if vacancies == 1 else 3, max_candidates)
    v = vacancies or rng.randint(1, n - 1)
    ballots = random_ballots(rng, n, max_ballots, max_count)
    return Election(tuple(Candidate(i, f"C{i}") for i in range(n)), v,
                    tuple(Ballot(p, c) for p, c in ballots))


@pytest.fixture
def fixture_election():
    return load_fixture


# Acceptance criteria record their outcome here for the terminal summary.
ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{outcome}  {name}")
