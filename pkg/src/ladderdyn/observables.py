"""Block probabilities, moments of the magnetization difference, and time traces."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .basis import SectorBasis
from .chebyshev import apply_plan, plan_propagator
from .errors import NumericalConsistencyError, UnnormalizedStateError
from .hamiltonian import LadderHamiltonian

__all__ = [
    "ObservableTrace",
    "equilibration_time",
    "evolve_and_trace",
    "measure_px",
    "mirror_state",
    "moments_x",
    "typical_variance",
]

EQ_WINDOW = 10.0
LATE_FRACTION = 0.2


def measure_px(state, basis: SectorBasis) -> np.ndarray:
    """Weight of ``state`` in each X block, ordered like ``basis.x_values``."""
    prob = np.abs(np.asarray(state)) ** 2
    total = prob.sum()
    if abs(total - 1.0) > 1e-6:
        raise UnnormalizedStateError(f"state norm^2 = {total!r}, expected 1")
    return np.bincount((basis.xvals + basis.geometry.half) // 2, weights=prob,
                       minlength=basis.geometry.half + 1)


def moments_x(P, x_values) -> tuple[float, float]:
    """Mean and variance of X under the block distribution ``P``."""
    P = np.asarray(P, dtype=float)
    X = np.asarray(x_values, dtype=float)
    if abs(P.sum() - 1.0) > 1e-9:
        raise NumericalConsistencyError(f"distribution sums to {P.sum()!r}")
    mean = float(X @ P)
    var = float((X * X) @ P - mean * mean)
    if var < -1e-12:
        raise NumericalConsistencyError(f"negative variance {var}")
    return mean, max(var, 0.0)


def mirror_state(state, basis: SectorBasis) -> np.ndarray:
    """Exchange the two beams (maps X to -X)."""
    half = basis.geometry.half
    c = basis.configs
    swapped = ((c & basis.geometry.left_mask) << half) | (c >> half)
    out = np.empty_like(np.asarray(state))
    out[basis.index_of(swapped)] = state
    return out


@dataclass
class ObservableTrace:
    """Time series of block probabilities and moments.

    ``px`` has one row per output time and one column per admissible X
    (ascending).
    """

    x_values: np.ndarray
    times: list = field(default_factory=list)
    px: list = field(default_factory=list)
    mean_x: list = field(default_factory=list)
    var_x: list = field(default_factory=list)
    mean_H: list = field(default_factory=list)
    var_H: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def append(self, t, P, e1, e2):
        mean, var = moments_x(P, self.x_values)
        self.times.append(float(t))
        self.px.append(np.asarray(P, dtype=float))
        self.mean_x.append(mean)
        self.var_x.append(var)
        self.mean_H.append(float(e1))
        self.var_H.append(float(e2 - e1 * e1))

    def __len__(self):
        return len(self.times)

    def arrays(self):
        """``(times, px, mean_x, var_x, mean_H, var_H)`` as ndarrays."""
        return (np.array(self.times), np.array(self.px), np.array(self.mean_x),
                np.array(self.var_x), np.array(self.mean_H), np.array(self.var_H))

    def late(self, values, fraction=LATE_FRACTION):
        """Mean of ``values`` over the final ``fraction`` of the run."""
        values = np.asarray(values)
        n = max(1, int(round(fraction * len(values))))
        return values[-n:].mean(axis=0)

    def columns(self):
        return ["t", "mean_x", "var_x", "mean_H", "var_H"] + [f"P[{int(X)}]" for X in self.x_values]

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for row in zip(self.times, self.mean_x, self.var_x, self.mean_H, self.var_H, self.px):
                w.writerow([f"{v:.17g}" for v in row[:5]] + [f"{p:.17g}" for p in row[5]])
        return path

    @classmethod
    def from_csv(cls, path):
        with Path(path).open() as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        x_values = np.array([int(c[2:-1]) for c in header[5:]])
        tr = cls(x_values)
        tr.times, tr.mean_x, tr.var_x, tr.mean_H, tr.var_H = (list(body[:, i]) for i in range(5))
        tr.px = list(body[:, 5:])
        return tr

    def write_manifest(self, path, **extra):
        data = {"software_version": __version__, **self.metadata, **extra}
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable))
        return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def evolve_and_trace(state, h: LadderHamiltonian, t_max, dt_out=0.5, tol=1e-14,
                     return_state=False):
    """Propagate ``state`` to ``t_max`` and record observables every ``dt_out``.

    One propagator plan for ``dt_out`` is reused for every step.
    """
    basis = h.basis
    n_steps = int(round(t_max / dt_out)) if t_max > 0 else 0
    plan = plan_propagator(h, dt_out, tol) if n_steps else None
    trace = ObservableTrace(basis.x_values.copy())
    trace.metadata.update(
        N=basis.N, J=h.J, kappa=h.kappa, delta=h.delta, t_max=float(t_max),
        dt_out=float(dt_out), plan=plan.manifest() if plan else None,
        bounds={"E_min": h.bounds().E_min, "E_max": h.bounds().E_max, "eps": h.bounds().eps},
    )
    psi = np.array(state, dtype=complex)
    for step in range(n_steps + 1):
        if step:
            psi = apply_plan(plan, psi)
        e1, e2 = h.expectation(psi)
        trace.append(step * dt_out, measure_px(psi, basis), e1, e2)
    if return_state:
        return trace, psi
    return trace


def equilibration_time(times, mean_x, window=EQ_WINDOW):
    """First time after which ``|mean_x| < max(0.05 |mean_x(0)|, 0.2)`` holds
    for at least ``window`` time units. ``None`` if never."""
    times = np.asarray(times)
    mean_x = np.asarray(mean_x)
    thresh = max(0.05 * abs(mean_x[0]), 0.2)
    inside = np.abs(mean_x) < thresh
    start = None
    for t, ok in zip(times, inside):
        if ok:
            if start is None:
                start = t
            if t - start >= window:
                return float(start)
        else:
            start = None
    return None


def typical_variance(alpha, h: LadderHamiltonian, basis: SectorBasis, n_seeds=10, seeds=None,
                     E0=0.0):
    """Mean and standard error over seeds of the X variance of unrestricted
    filtered random states.

    ``alpha`` is one filter strength for every seed or a sequence with one
    value per seed.
    """
    from .state_prep import prepare_typical

    if seeds is None:
        seeds = range(n_seeds)
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("typical variance needs at least two seeds")
    alphas = np.broadcast_to(np.asarray(alpha, dtype=float), (len(seeds),))
    values = np.array([
        moments_x(measure_px(prepare_typical(s, a, h, basis, E0), basis), basis.x_values)[1]
        for s, a in zip(seeds, alphas)
    ])
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(len(values)))
