import pytest

from qtaco.engine import EstimatorSettings
from qtaco.io import run_training
from qtaco.trainer import TrainingConfig


@pytest.fixture
def small_config():
    return TrainingConfig(
        n_wires=2, n_layers=2, epochs=25, n_train=16, n_test=16, estimator=EstimatorSettings(window=4)
    )


@pytest.fixture
def run_dir(tmp_path, small_config):
    out = tmp_path / "run"
    run_training(small_config, out)
    return out


_criteria: dict[str, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    if call.when == "setup" and call.excinfo is None:
        return
    key = f"{marker.args[0]}. {marker.args[1]}"
    outcome = "FAIL" if call.excinfo is not None else "PASS"
    _criteria.setdefault(key, []).append((item.name, outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=lambda k: int(k.split(".")[0])):
        results = _criteria[key]
        status = "PASS" if all(o == "PASS" for _, o in results) else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {key} ({len(results)} check(s))")
