import numpy as np
import pytest

from judgerank import _backend
from judgerank.data import TripleTable

BACKENDS = _backend.available()


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return _backend.load(request.param)


def random_instance(rng, N, K, n_triples=None, zmax=10.0):
    """Random params and triples with |z| bounded by ``zmax``."""
    s = rng.normal(size=N)
    s -= s.mean()
    alpha = rng.uniform(-0.7, 0.7, K)
    alpha -= alpha.mean()
    spread = np.ptp(s) * np.exp(alpha).max()
    if spread > zmax:
        s *= zmax / spread
    a, b = np.triu_indices(N, k=1)
    all_i = np.repeat(a, K)
    all_j = np.repeat(b, K)
    all_k = np.tile(np.arange(K), len(a))
    m = len(all_i) if n_triples is None else min(n_triples, len(all_i))
    pick = np.sort(rng.choice(len(all_i), m, replace=False))
    n = rng.integers(1, 20, m)
    wins = rng.integers(0, 2 * n + 1) / 2.0
    triples = TripleTable.from_arrays(all_i[pick], all_j[pick], all_k[pick], n,
                                      np.minimum(wins, n) / n, N, K)
    return s, alpha, triples


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
