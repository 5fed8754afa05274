from functools import lru_cache, reduce

import numpy as np
import pytest

from ladderdyn.basis import build_basis
from ladderdyn.hamiltonian import LadderHamiltonian

SZ = np.diag([-0.5, 0.5])  # basis |0>=down, |1>=up
SP = np.array([[0.0, 0.0], [1.0, 0.0]])
SM = SP.T
SX = 0.5 * (SP + SM)
SY = (SP - SM) / 2j


def site_op(op, p, N):
    """``op`` acting on site ``p``; site ``p`` is bit ``p`` of the full-space index."""
    mats = [np.eye(2)] * N
    mats[N - 1 - p] = op
    return reduce(np.kron, mats)


@lru_cache(maxsize=None)
def dense_ladder(N, J=1.0, kappa=0.2, delta=0.6):
    """Full 2^N ladder Hamiltonian from Kronecker products of spin matrices,
    restricted to the S_z=0 sector in ascending-word order."""
    half = N // 2

    def bond(a, b):
        return (site_op(SX, a, N) @ site_op(SX, b, N) + site_op(SY, a, N) @ site_op(SY, b, N)
                + delta * site_op(SZ, a, N) @ site_op(SZ, b, N))

    H = np.zeros((2 ** N, 2 ** N), dtype=complex)
    for beam in (0, half):
        for i in range(half - 1):
            H += J * bond(beam + i, beam + i + 1)
    for i in range(half):
        H += kappa * bond(i, half + i)
    words = [w for w in range(2 ** N) if bin(w).count("1") == half]
    return H[np.ix_(words, words)]


@pytest.fixture(scope="session")
def ladder():
    cache = {}

    def get(N, **kw):
        key = (N, tuple(sorted(kw.items())))
        if key not in cache:
            cache[key] = LadderHamiltonian(build_basis(N), **kw)
        return cache[key]

    return get


def random_state(dim, seed, real=False):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=dim) + (0 if real else 1j * rng.normal(size=dim))
    return (v / np.linalg.norm(v)).astype(complex)


def pytest_terminal_summary(terminalreporter):
    import _shared

    if not _shared.ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_shared.ACCEPTANCE):
        ok, detail = _shared.ACCEPTANCE[n]
        terminalreporter.write_line(f"AC{n:<2d} {'PASS' if ok else 'FAIL'}  {detail}")
