import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # mockserver / oracles importable

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")


@pytest.fixture
def toy_corpus(tmp_path):
    """Small on-disk corpus: 3 queries x 4 docs with binary qrels."""
    queries = tmp_path / "queries.tsv"
    queries.write_text(
        "q1\thow tall is everest\n"
        "q2\twho wrote hamlet\n"
        "q3\tboiling point of water\n",
        encoding="utf-8",
    )
    collection = tmp_path / "collection.tsv"
    collection.write_text(
        "d1\tEverest rises 8849 metres above sea level. [ANSWERS: how tall is everest]\n"
        "d2\tK2 is the second highest mountain.\n"
        "d3\tHamlet was written by William Shakespeare. [ANSWERS: who wrote hamlet]\n"
        "d4\tWater boils at 100 degrees Celsius. [ANSWERS: boiling point of water]\n",
        encoding="utf-8",
    )
    qrels = tmp_path / "qrels.txt"
    qrels.write_text(
        "q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 1\nq3 0 d4 1\n",
        encoding="utf-8",
    )
    return {"queries": queries, "collection": collection, "qrels": qrels, "dir": tmp_path}
