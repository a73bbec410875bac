import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))

_ACCEPTANCE_RESULTS = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")


def write_toy_dataset(path: Path, n_per_class: int = 32) -> Path:
    """Balanced separable toy dataset in the exporter's JSONL schema."""
    with path.open("w", encoding="utf-8") as f:
        for i in range(n_per_class):
            src = (
                f"Is the question: 'question {i} about topic alpha' answered by "
                f"the document: 'document {i} clearly answers topic alpha with facts'?"
            )
            f.write(json.dumps({
                "source": src,
                "target": "true. Explanation: the document covers the topic directly.",
            }) + "\n")
        for i in range(n_per_class):
            src = (
                f"Is the question: 'question {i} about topic alpha' answered by "
                f"the document: 'document {i} rambles about something unrelated entirely'?"
            )
            f.write(json.dumps({
                "source": src,
                "target": "false. Explanation: the document is off topic.",
            }) + "\n")
    return path


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    return write_toy_dataset(tmp_path_factory.mktemp("data") / "toy.jsonl")


@pytest.fixture(scope="session")
def quick_checkpoint(tmp_path_factory, toy_dataset):
    """One-epoch tiny checkpoint shared by serve/eval tests."""
    from relevance_trainer.config import TrainConfig
    from relevance_trainer.train import train

    out = tmp_path_factory.mktemp("ckpt")
    config = TrainConfig(
        learning_rate=3e-3, batch_size=8, max_epochs=1,
        base_model_id="tiny-transformer", seed=1,
    )
    (record,) = train(toy_dataset, config, out)
    return record
