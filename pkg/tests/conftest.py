import itertools
import math

import numpy as np
import pytest

from qubound.qstate import rng_stream

_ACCEPTANCE = []


@pytest.fixture
def rng():
    return rng_stream(1234)


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE:
        terminalreporter.write_line(line)


def random_hermitian(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def random_matrix(rng, r, c):
    return rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c))


def ket(*amps):
    v = np.asarray(amps, dtype=complex)
    return v / np.linalg.norm(v)


def binary_entropy(p):
    if p in (0.0, 1.0):
        return 0.0
    return -p * np.log2(p) - (1 - p) * np.log2(1 - p)


def enumerate_typical_count(spectrum, n, delta):
    """Exhaustive oracle: count eigen-index strings in the entropy window."""
    spectrum = np.asarray(spectrum, dtype=float)
    nz = spectrum[spectrum > 0]
    s = float(-np.sum(nz * np.log2(nz)))
    count = 0
    for idx in itertools.product(range(len(spectrum)), repeat=n):
        lam = [spectrum[i] for i in idx]
        if min(lam) <= 0:
            continue
        surprisal = -sum(math.log2(x) for x in lam) / n
        if abs(surprisal - s) <= delta + 1e-12:
            count += 1
    return count
