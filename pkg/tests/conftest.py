import pytest

from seqids.experiment import Settings, WindowArrays
from seqids.io import simulate_to_dataset, write_dataset
from seqids.sim import SimConfig, generate_dataset


def fast_settings(**kw):
    base = dict(bw_restarts=2, bw_max_iter=30, forest_trees=10,
                lstm={"epochs": 5, "hidden_size": 8})
    base.update(kw)
    return Settings(**base)


@pytest.fixture(scope="session")
def small_dataset():
    cfg = SimConfig(episodes_per_type=40, seed=11)
    return simulate_to_dataset(cfg, generate_dataset(cfg))


@pytest.fixture(scope="session")
def small_arrays(small_dataset):
    return WindowArrays.from_dataset(small_dataset)


@pytest.fixture(scope="session")
def small_dataset_file(tmp_path_factory, small_dataset):
    path = tmp_path_factory.mktemp("data") / "windows.jsonl"
    write_dataset(str(path), small_dataset)
    return str(path)


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
