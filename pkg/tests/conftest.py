import numpy as np
import pytest

from dipps.config import load_config
from dipps.data import demo_path, env_seed
from dipps.horizon import Case, config_for_case, run_day


@pytest.fixture(scope="session")
def seed() -> int:
    return env_seed(20240617)


@pytest.fixture
def rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


@pytest.fixture(scope="session")
def demo():
    return load_config(demo_path("demo.json"))


@pytest.fixture(scope="session")
def demo_configs(demo):
    return {c: config_for_case(demo.base, c, demo.bonus_weight) for c in Case}


@pytest.fixture(scope="session")
def demo_results(demo_configs):
    return {c: run_day(cfg) for c, cfg in demo_configs.items()}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    item.config._criteria[number] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        title, status, detail = criteria[number]
        terminalreporter.write_line(f"criterion {number} {status}: {title}" + (f" ({detail})" if detail else ""))
