"""Zero-magnetization sector of a two-beam spin ladder.

Bit layout: bits ``0 .. N/2-1`` hold beam L (rungs 1..N/2), bits
``N/2 .. N-1`` hold beam R. A set bit is spin up.

Configurations are stored in ascending order as unsigned words. Their
ordinal is the combinadic (colex) rank, which we evaluate from two
per-beam tables of size ``(N/2 + 1) * 2**(N/2)`` so the index map never
needs a ``2**N`` lookup array.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import CapacityError, InvalidGeometryError, SectorViolationError

__all__ = ["LadderGeometry", "SectorBasis", "build_basis", "x_eigenvalue"]

# ordinals and rank tables are int32
_MAX_DIM = np.iinfo(np.int32).max

_BEAMS = ("L", "R")


def _popcount(words: np.ndarray) -> np.ndarray:
    words = np.asarray(words, dtype=np.uint64)
    count = np.zeros(words.shape, dtype=np.int64)
    w = words.copy()
    while np.any(w):
        count += (w & np.uint64(1)).astype(np.int64)
        w >>= np.uint64(1)
    return count


@dataclass(frozen=True)
class LadderGeometry:
    """Spin count and the (beam, rung) <-> bit map."""

    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 4 or self.N % 2:
            raise InvalidGeometryError(f"N must be an even integer >= 4, got {self.N!r}")

    @property
    def half(self) -> int:
        return self.N // 2

    def bit(self, beam: str, rung: int) -> int:
        """Bit position of site ``(beam, rung)``, rung counted from 1."""
        if beam not in _BEAMS or not 1 <= rung <= self.half:
            raise InvalidGeometryError(f"no site ({beam!r}, {rung}) for N={self.N}")
        return (rung - 1) + (self.half if beam == "R" else 0)

    def site(self, bit: int) -> tuple[str, int]:
        if not 0 <= bit < self.N:
            raise InvalidGeometryError(f"bit {bit} out of range for N={self.N}")
        return _BEAMS[bit // self.half], bit % self.half + 1

    @property
    def left_mask(self) -> int:
        return (1 << self.half) - 1

    @property
    def admissible_x(self) -> np.ndarray:
        return np.arange(-self.half, self.half + 1, 2)


def x_eigenvalue(config: int, geometry: LadderGeometry) -> int:
    """Up spins on beam L minus up spins on beam R for one configuration."""
    config = int(config)
    if config < 0 or config >> geometry.N or bin(config).count("1") != geometry.half:
        raise SectorViolationError(
            f"configuration {config:#x} is not in the S_z=0 sector of N={geometry.N}"
        )
    up_left = bin(config & geometry.left_mask).count("1")
    return 2 * up_left - geometry.half


@dataclass(frozen=True)
class SectorBasis:
    """Enumerated S_z=0 sector with X-block partition.

    Attributes
    ----------
    geometry : LadderGeometry
    configs : (dim,) int64 ndarray
        Sector words in ascending order.
    xvals : (dim,) int64 ndarray
        Eigenvalue of the magnetization difference per configuration.
    lo_rank, hi_rank : int32 ndarrays
        Per-beam combinadic tables; see :meth:`index_of`.
    """

    geometry: LadderGeometry
    configs: np.ndarray
    xvals: np.ndarray
    lo_rank: np.ndarray
    hi_rank: np.ndarray
    _blocks: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def N(self) -> int:
        return self.geometry.N

    @property
    def dim(self) -> int:
        return self.configs.shape[0]

    @property
    def x_values(self) -> np.ndarray:
        """Admissible X in ascending order."""
        return self.geometry.admissible_x

    def config_at(self, k):
        return self.configs[k]

    def index_of(self, config):
        """Combinadic rank of one or many sector words."""
        c = np.asarray(config, dtype=np.int64)
        half = self.geometry.half
        lo = c & self.geometry.left_mask
        hi = c >> half
        pop_lo = _popcount(lo)
        return self.lo_rank[lo] + self.hi_rank[pop_lo, hi]

    def block(self, X: int) -> np.ndarray:
        """Ordinals of the configurations with magnetization difference ``X``."""
        X = int(X)
        if X not in self._blocks:
            if X not in set(self.x_values.tolist()):
                raise SectorViolationError(f"X={X} is not admissible for N={self.N}")
            self._blocks[X] = np.flatnonzero(self.xvals == X)
        return self._blocks[X]

    def block_sizes(self) -> dict[int, int]:
        counts = np.bincount((self.xvals + self.geometry.half) // 2,
                             minlength=self.geometry.half + 1)
        return {int(X): int(n) for X, n in zip(self.x_values, counts)}

    def x_diagonal(self) -> np.ndarray:
        return self.xvals.astype(float)


def _rank_tables(half: int) -> tuple[np.ndarray, np.ndarray]:
    words = np.arange(1 << half, dtype=np.int64)
    lo_rank = np.zeros(words.shape, dtype=np.int64)
    hi_rank = np.zeros((half + 1, words.size), dtype=np.int64)
    # running count of set bits below position p
    seen = np.zeros(words.shape, dtype=np.int64)
    for p in range(half):
        bit = (words >> p) & 1
        seen += bit
        lo_rank += bit * np.array([comb(p, i) for i in range(half + 2)])[seen]
        for m in range(half + 1):
            idx = m + seen
            hi_rank[m] += bit * np.array([comb(p + half, i) for i in range(2 * half + 2)])[idx]
    return lo_rank.astype(np.int32), hi_rank.astype(np.int32)


def build_basis(N: int) -> SectorBasis:
    """Enumerate the S_z=0 sector of an ``N``-spin ladder.

    Raises
    ------
    InvalidGeometryError
        Odd ``N`` or ``N < 4``.
    CapacityError
        Sector dimension does not fit the int32 ordinal type.
    """
    geometry = LadderGeometry(N)
    half = geometry.half
    dim = comb(N, half)
    if dim > _MAX_DIM:
        raise CapacityError(f"sector dimension {dim} for N={N} exceeds the int32 index range")

    words = np.arange(1 << half, dtype=np.int64)
    pops = _popcount(words)
    by_pop = [words[pops == n] for n in range(half + 1)]
    # ascending order: high beam word major, low beam word minor
    need = half - pops
    counts = np.array([by_pop[n].size for n in need])
    hi = np.repeat(words, counts)
    lo = np.concatenate([by_pop[n] for n in need])
    configs = (hi << half) | lo
    assert configs.size == dim

    xvals = 2 * np.repeat(need, counts) - half
    lo_rank, hi_rank = _rank_tables(half)
    return SectorBasis(geometry, configs, xvals.astype(np.int64), lo_rank, hi_rank)
