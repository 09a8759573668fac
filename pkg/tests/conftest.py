import numpy as np
import pytest

from lordenkit.streams import stream


def ks_to_cdf(samples, cdf, grid=None):
    """Sup distance between the ECDF and ``cdf``, evaluated on both sides of every jump.

    Works for mixed laws (scipy's KS routine assumes continuity).
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    pts = x if grid is None else np.union1d(x, grid)
    upper = np.searchsorted(x, pts, side="right") / n
    lower = np.searchsorted(x, pts, side="left") / n
    F = np.asarray(cdf(pts), dtype=float)
    Fm = np.asarray(cdf(np.nextafter(pts, -np.inf)), dtype=float)
    return float(max(np.abs(upper - F).max(), np.abs(lower - Fm).max()))


def ks_two_sample(a, b):
    a, b = np.sort(a), np.sort(b)
    pts = np.union1d(a, b)
    return float(np.abs(np.searchsorted(a, pts, side="right") / a.size
                        - np.searchsorted(b, pts, side="right") / b.size).max())


@pytest.fixture
def rng():
    return stream(20240101, "tests")


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
