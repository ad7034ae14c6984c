import contextlib

import numpy as np
import pytest

from frfacs.fdata import FunctionalDataset, Grid
from frfacs.fpca import ScoreDataset

_ACCEPTANCE: dict = {}


class _Outcome:
    def __init__(self):
        self.detail = ""


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion's pass/fail line."""

    @contextlib.contextmanager
    def run(number: int, title: str):
        out = _Outcome()
        try:
            yield out
        except BaseException as exc:
            msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
            _ACCEPTANCE[number] = (title, False, out.detail or msg)
            raise
        _ACCEPTANCE[number] = (title, True, out.detail)

    return run


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_scores(rng, n=60, M=3, K=2, minority=0.2):
    z = rng.standard_normal((n, M))
    y = (rng.random(n) < minority).astype(np.int64)
    if K > 2:
        y[rng.random(n) < minority] = K - 1
    y[:K] = np.arange(K)
    return ScoreDataset(z, y, K, None)


def separable_dataset(n=80, T=31, ratio=0.25, seed=0, gap=3.0):
    """Two classes of noisy curves at clearly different levels."""
    rng = np.random.default_rng(seed)
    grid = Grid.uniform(T)
    y = (rng.random(n) < ratio).astype(np.int64)
    y[:2] = [0, 1]
    t = grid.points
    values = np.sin(2 * np.pi * t)[None, :] + gap * y[:, None] + 0.1 * rng.standard_normal((n, T))
    return FunctionalDataset(grid, values, y, ["a", "b"])
