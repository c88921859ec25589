from __future__ import annotations

import numpy as np
import pytest

from nnid.cost_model import CostMap, compute_cost_map


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): named acceptance criterion with a summary line"
    )


_acceptance_results: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        marker = item.get_closest_marker("acceptance")
        if marker:
            status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
            _acceptance_results.append((marker.kwargs.get("name", item.name), status))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, status in _acceptance_results:
        terminalreporter.write_line(f"  {status}: {name}")


def random_image(seed: int, height: int, width: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, (height, width)).astype(np.uint8)


def random_cost_map(seed: int, height: int, width: int, scale: float = 10.0) -> CostMap:
    """Synthetic nonnegative costs; cheaper than running the cost model."""
    rng = np.random.default_rng(seed)
    vals = rng.gamma(shape=1.5, scale=scale, size=(height, width))
    return CostMap(vals)


@pytest.fixture(scope="session")
def textured_image() -> np.ndarray:
    return random_image(1234, 96, 128)


@pytest.fixture(scope="session")
def textured_costs(textured_image) -> CostMap:
    return compute_cost_map(textured_image)
