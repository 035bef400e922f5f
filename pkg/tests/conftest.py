"""Shared fixtures: truncated sampling and the acceptance-criteria reporter."""
import numpy as np
import pytest

from qkit import GAUSSIAN

_criterion_lines = []


@pytest.fixture
def criterion():
    """Record one acceptance-criterion verdict; echoed in the run summary."""

    def record(num, ok, detail):
        line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} - {detail}"
        _criterion_lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criterion_lines):
            terminalreporter.write_line(line)


def sample_truncated(d, n, seed):
    """n float32 draws from the model restricted to [-m, m], by rejection."""
    rng = np.random.default_rng(seed)
    out = np.empty(n, dtype=np.float64)
    have = 0
    while have < n:
        want = n - have
        if d.kind == GAUSSIAN:
            draw = rng.normal(0.0, d.scale, 2 * want + 16)
        else:
            draw = rng.laplace(0.0, d.scale, 2 * want + 16)
        keep = draw[np.abs(draw) <= d.m][:want]
        out[have : have + keep.size] = keep
        have += keep.size
    return out.astype(np.float32)


@pytest.fixture
def truncated_sampler():
    return sample_truncated
