import dataclasses

import pytest
import torch

from pugnn.synth_data import PRESETS, generate_dataset
from pugnn.training import TrainConfig

TINY = TrainConfig(
    d=8, fx=16, hidden=8, attention_blocks=2, max_epochs=4, patience=3, num_runs=1,
    link_warmup_steps=5, link_steps_per_epoch=1,
)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


@pytest.fixture(scope="session")
def small_ds():
    return generate_dataset(PRESETS["small"])


@pytest.fixture
def tiny():
    return dataclasses.replace(TINY)


# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
