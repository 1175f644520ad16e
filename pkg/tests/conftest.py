import numpy as np
import pytest

from twoplane.geometry import ImageSize, Point2
from twoplane.saliency import WarpParams

HD = ImageSize(1920, 1200)


@pytest.fixture
def hd():
    return HD


@pytest.fixture
def default_params():
    return WarpParams(v=Point2(960, 600))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_params(rng, size=HD):
    """A valid parameter draw with the VP somewhere in the middle of the frame."""
    return WarpParams(
        v=Point2(rng.uniform(0.3, 0.7) * size.w, rng.uniform(0.35, 0.65) * size.h),
        theta=tuple(rng.uniform(0.05, 0.4, 4)),
        alpha=tuple(rng.uniform(0.3, 0.8, 4)),
        nu=rng.uniform(1.2, 4.0),
        nu_hat=rng.uniform(1.2, 4.0),
        lam=rng.uniform(0.0, 1.0),
    )


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        request.config.stash[_ACCEPTANCE].append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
