import numpy as np
import pytest

from ocdm_isac import FrameConfig


@pytest.fixture
def cfg():
    return FrameConfig()


@pytest.fixture
def small_cfg():
    # 16 sub-chirps, 6 symbols, 4-wide comb groups
    return FrameConfig(n_subcarriers=16, n_symbols=6, n_pilots=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_bits(rng, cfg):
    return rng.integers(0, 2, cfg.n_bits, dtype=np.uint8)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one pass/fail summary line per acceptance criterion."""

    def report(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
