"""Post-processing of traces: time-shift alignment, early variance maxima,
and the variance-versus-size study."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np
import scipy.optimize
import scipy.stats

from .errors import InsufficientOverlapError, NotEquilibratedError
from .observables import LATE_FRACTION, equilibration_time

__all__ = [
    "EarlyMaximum",
    "LinearFit",
    "ScalingReport",
    "alignment_residual",
    "detect_early_maximum",
    "linear_fit",
    "time_shift_align",
]

MIN_OVERLAP = 10.0


def _pair_cost(yi, si, yj, sj, dt, min_overlap):
    # trace i is placed at times k*dt - si
    start = max(-si, -sj)
    end = min((len(yi) - 1) * dt - si, (len(yj) - 1) * dt - sj)
    if end - start < min_overlap - 1e-9:
        return np.inf, 0
    grid = np.arange(start, end + 1e-9, dt)
    a = np.interp(grid, dt * np.arange(len(yi)) - si, yi)
    b = np.interp(grid, dt * np.arange(len(yj)) - sj, yj)
    return float(np.mean((a - b) ** 2)), grid.size


def _total_cost(series, shifts, dt, min_overlap):
    return sum(_pair_cost(series[i], shifts[i], series[j], shifts[j], dt, min_overlap)[0]
               for i, j in combinations(range(len(series)), 2))


def time_shift_align(traces, dt, min_overlap=MIN_OVERLAP, max_shift=None, sweeps=5) -> np.ndarray:
    """Delays that bring mean-value series on top of each other.

    Trace ``i`` is compared at time ``t - shift[i]``; the first shift is 0.
    The summed pairwise mean squared deviation over each overlap window is
    minimized by coordinate descent over integer multiples of ``dt``, then
    refined between grid points using linear interpolation.

    ``max_shift`` defaults to half the shortest trace duration; larger
    shifts would let relaxed tails slide onto each other with a cost near
    zero and no information.

    Raises
    ------
    InsufficientOverlapError
        Some pair overlaps for less than ``min_overlap`` time units at every
        admissible shift.
    """
    series = [np.asarray(t, dtype=float) for t in traces]
    if len(series) < 2:
        raise ValueError("alignment needs at least two traces")
    n = len(series)
    shifts = np.zeros(n)
    if max_shift is None:
        max_shift = 0.5 * dt * (min(len(s) for s in series) - 1)
    max_steps = int(np.floor(max_shift / dt + 1e-9))
    grid = dt * np.arange(-max_steps, max_steps + 1)

    def best_for(i, candidates):
        costs = []
        for s in candidates:
            trial = shifts.copy()
            trial[i] = s
            costs.append(_total_cost(series, trial, dt, min_overlap))
        k = int(np.argmin(costs))
        return candidates[k], costs[k]

    # start from the best alignment of each trace against the first
    for i in range(1, n):
        costs = [_pair_cost(series[0], 0.0, series[i], s, dt, min_overlap)[0] for s in grid]
        if not np.isfinite(np.min(costs)):
            raise InsufficientOverlapError(
                f"trace {i} cannot overlap trace 0 for {min_overlap} time units"
            )
        shifts[i] = grid[int(np.argmin(costs))]

    for _ in range(sweeps):
        changed = False
        for i in range(1, n):
            s, cost = best_for(i, grid)
            if not np.isfinite(cost):
                raise InsufficientOverlapError("no shift keeps every pair overlapping")
            if s != shifts[i]:
                shifts[i] = s
                changed = True
        if not changed:
            break

    for i in range(1, n):
        center = shifts[i]

        def cost(s, i=i):
            trial = shifts.copy()
            trial[i] = s
            return _total_cost(series, trial, dt, min_overlap)

        lo, hi = max(center - dt, -max_shift), min(center + dt, max_shift)
        if hi <= lo:
            continue
        res = scipy.optimize.minimize_scalar(cost, bounds=(lo, hi),
                                             method="bounded")
        if res.fun < cost(center):
            shifts[i] = res.x
    return shifts


def alignment_residual(traces, shifts, dt, min_overlap=MIN_OVERLAP) -> float:
    """Root mean squared pairwise deviation after shifting."""
    total, count = 0.0, 0
    for i, j in combinations(range(len(traces)), 2):
        c, m = _pair_cost(np.asarray(traces[i]), shifts[i], np.asarray(traces[j]), shifts[j],
                          dt, min_overlap)
        if not np.isfinite(c):
            raise InsufficientOverlapError(f"traces {i} and {j} do not overlap")
        total += c * m
        count += m
    return float(np.sqrt(total / count))


@dataclass(frozen=True)
class EarlyMaximum:
    time: float | None
    value: float | None
    distinct: bool
    plateau: float
    t_equilibrated: float


def detect_early_maximum(times, variance, mean, rel_margin=0.02,
                         late_fraction=LATE_FRACTION) -> EarlyMaximum:
    """Largest variance before the mean has equilibrated.

    A maximum within ``rel_margin`` of the late-time plateau is reported as
    not distinct (``time`` and ``value`` are ``None``).
    """
    times = np.asarray(times, dtype=float)
    variance = np.asarray(variance, dtype=float)
    t_eq = equilibration_time(times, mean)
    if t_eq is None:
        raise NotEquilibratedError("mean never settles; no equilibration time")
    n_late = max(1, int(round(late_fraction * len(variance))))
    plateau = float(variance[-n_late:].mean())
    early = times <= t_eq
    k = int(np.argmax(np.where(early, variance, -np.inf)))
    if variance[k] <= plateau * (1 + rel_margin):
        return EarlyMaximum(None, None, False, plateau, t_eq)
    return EarlyMaximum(float(times[k]), float(variance[k]), True, plateau, t_eq)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    intercept_stderr: float


def linear_fit(x, y) -> LinearFit:
    r = scipy.stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return LinearFit(float(r.slope), float(r.intercept), float(r.rvalue ** 2),
                     float(r.stderr), float(r.intercept_stderr))


@dataclass
class ScalingReport:
    """Per-size variance summary and linear fits against ``N``."""

    N_values: list = field(default_factory=list)
    mean_final_variance: list = field(default_factory=list)
    typical_variance: list = field(default_factory=list)
    typical_variance_se: list = field(default_factory=list)
    largest_early_maximum: list = field(default_factory=list)
    per_run: dict = field(default_factory=dict)
    typical_fit: LinearFit | None = None
    early_max_fit: LinearFit | None = None
    final_fit: LinearFit | None = None
    errors: dict = field(default_factory=dict)

    def add(self, N, final_variances, typical, typical_se, early_max, runs):
        self.N_values.append(int(N))
        self.mean_final_variance.append(float(np.mean(final_variances)))
        self.typical_variance.append(float(typical))
        self.typical_variance_se.append(float(typical_se))
        self.largest_early_maximum.append(None if early_max is None else float(early_max))
        self.per_run[int(N)] = runs

    def fit(self):
        if len(self.N_values) >= 3:
            self.typical_fit = linear_fit(self.N_values, self.typical_variance)
            self.final_fit = linear_fit(self.N_values, self.mean_final_variance)
            ok = [(n, v) for n, v in zip(self.N_values, self.largest_early_maximum) if v is not None]
            if len(ok) >= 3:
                self.early_max_fit = linear_fit(*zip(*ok))
        return self

    def early_max_shift(self) -> np.ndarray:
        """Largest early maximum minus mean final variance, per size."""
        return np.array([np.nan if e is None else e - f
                         for e, f in zip(self.largest_early_maximum, self.mean_final_variance)])

    def to_dict(self):
        return asdict(self)
