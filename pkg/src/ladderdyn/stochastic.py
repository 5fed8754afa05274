"""Stochastic descriptions of the magnetization-difference dynamics.

Two routes to a transition matrix over X blocks at lag ``tau``:

* the spin-flip master equation, a birth-death chain with rates
  ``R(X -> X +- 2) = (gamma kappa^2 N / 2) (1/2 -+ X/N)^2``;
* the measured quantum matrix ``w[X, Y] = |P_X exp(-i tau H) omega_Y|^2``.

Both are column stochastic: column ``Y`` is the distribution after one lag
starting from block ``Y``.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.optimize

from .basis import build_basis
from .chebyshev import apply_plan, plan_propagator
from .errors import DomainError, FitError, NumericalConsistencyError, UnreachableTargetError
from .hamiltonian import LadderHamiltonian
from .observables import measure_px, moments_x
from .state_prep import DEFAULT_SIGMA_H, PrepRecipe, derive_seed, prepare_omega, tune_alpha

log = logging.getLogger(__name__)

__all__ = [
    "DriftDiffusion",
    "SpinFlipModel",
    "TransitionMatrix",
    "extract_drift_diffusion",
    "fit_gamma",
    "markov_iterate",
    "master_evolve",
    "master_trajectory",
    "measure_transition_matrix",
]


@dataclass(frozen=True)
class SpinFlipModel:
    N: int
    gamma: float = 1.0
    kappa: float = 0.2

    @property
    def x_values(self) -> np.ndarray:
        return np.arange(-self.N // 2, self.N // 2 + 1, 2)

    def with_gamma(self, gamma) -> "SpinFlipModel":
        return SpinFlipModel(self.N, float(gamma), self.kappa)

    def rate(self, X, direction) -> float:
        """Rate of the jump ``X -> X + 2*direction``; ``direction`` is +1 or -1."""
        half = self.N // 2
        if X not in set(self.x_values.tolist()):
            raise DomainError(f"X={X} is not admissible for N={self.N}")
        if direction not in (1, -1):
            raise DomainError(f"direction must be +1 or -1, got {direction}")
        if X + 2 * direction > half or X + 2 * direction < -half:
            return 0.0
        pref = self.gamma * self.kappa ** 2 * self.N / 2
        return pref * (0.5 - direction * X / self.N) ** 2

    def generator(self) -> np.ndarray:
        """Tridiagonal ``G`` with ``dP/dt = G P``."""
        X = self.x_values
        n = X.size
        G = np.zeros((n, n))
        for i, x in enumerate(X):
            up, down = self.rate(int(x), 1), self.rate(int(x), -1)
            if i + 1 < n:
                G[i + 1, i] = up
            if i > 0:
                G[i - 1, i] = down
            G[i, i] = -(up + down)
        return G

    def stationary(self) -> np.ndarray:
        """Stationary distribution from the detailed-balance recursion."""
        X = self.x_values
        pi = np.ones(X.size)
        for i in range(X.size - 1):
            pi[i + 1] = pi[i] * self.rate(int(X[i]), 1) / self.rate(int(X[i + 1]), -1)
        return pi / pi.sum()

    def _spectral(self):
        # G is similar to a symmetric tridiagonal matrix through sqrt(pi)
        G = self.generator()
        s = np.sqrt(self.stationary())
        diag = np.diag(G)
        off = np.diag(G, 1) * s[1:] / s[:-1]
        lam, V = scipy.linalg.eigh_tridiagonal(diag, off)
        return lam, V, s

    def propagator(self, t) -> np.ndarray:
        """``exp(G t)``; the finite-time matrix u(t).

        Uses Pade scaling-and-squaring: the symmetrized eigendecomposition
        used by :func:`master_trajectory` amplifies rounding in individual
        entries by up to ``sqrt(max(pi) / min(pi))``.
        """
        U = scipy.linalg.expm(self.generator() * t)
        return _clean_stochastic(U, "spin-flip propagator")

    def mean_drift_rate(self) -> float:
        """Decay rate of the mean: ``d<X>/dt = -2 gamma kappa^2 <X>``."""
        return 2 * self.gamma * self.kappa ** 2


def _clean_stochastic(M, what, tol=1e-12):
    if M.min() < -tol:
        raise NumericalConsistencyError(f"{what} has entry {M.min()!r} below -{tol}")
    M = np.clip(M, 0.0, None)
    return M / M.sum(axis=0, keepdims=True)


def spinflip_rate(model: SpinFlipModel, X, direction) -> float:
    return model.rate(X, direction)


def master_evolve(model: SpinFlipModel, P0, t) -> np.ndarray:
    return model.propagator(t) @ np.asarray(P0, dtype=float)


def master_trajectory(model: SpinFlipModel, P0, times) -> np.ndarray:
    """Distributions at each of ``times``; shape ``(len(times), N/2+1)``."""
    lam, V, s = model._spectral()
    coef = V.T @ (np.asarray(P0, dtype=float) / s)
    return (np.exp(np.outer(times, lam)) * coef) @ (s[:, None] * V).T


def markov_iterate(W, P0, n) -> np.ndarray:
    """Distributions after ``0..n`` applications of ``W``; shape ``(n+1, len(P0))``."""
    W = np.asarray(getattr(W, "w", W))
    out = [np.asarray(P0, dtype=float)]
    for _ in range(n):
        out.append(W @ out[-1])
    return np.array(out)


@dataclass
class TransitionMatrix:
    """Measured lag-``tau`` transition probabilities between X blocks."""

    tau: float
    x_values: np.ndarray
    w: np.ndarray
    stderr: np.ndarray
    seeds_per_column: int
    alphas: dict = field(default_factory=dict)
    pre_clamp_min: float = 0.0
    metadata: dict = field(default_factory=dict)

    def stationary(self) -> np.ndarray:
        vals, vecs = np.linalg.eig(self.w)
        v = np.real(vecs[:, np.argmin(np.abs(vals - 1))])
        return v / v.sum()

    def to_csv(self, path):
        labels = [int(x) for x in self.x_values]
        with Path(path).open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["X\\Y"] + labels)
            for x, row in zip(labels, self.w):
                wr.writerow([x] + [f"{v:.17g}" for v in row])
        return Path(path)

    def manifest(self) -> dict:
        return {
            "tau": self.tau,
            "x_values": [int(x) for x in self.x_values],
            "seeds_per_column": self.seeds_per_column,
            "alphas": {str(k): v for k, v in self.alphas.items()},
            "stderr": self.stderr.tolist(),
            "pre_clamp_min": self.pre_clamp_min,
            **self.metadata,
        }


def _column(N, J, kappa, delta, Y, tau, seeds, target_sigma_H, E0):
    basis = build_basis(N)
    h = LadderHamiltonian(basis, J, kappa, delta)
    return _measure_column(h, Y, tau, seeds, target_sigma_H, E0)


def _measure_column(h, Y, tau, seeds, target_sigma_H, E0):
    basis = h.basis
    plan = plan_propagator(h, tau)
    cols, alphas = [], []
    for seed in seeds:
        try:
            alpha = tune_alpha(seed, Y, target_sigma_H, h, basis, E0)
        except UnreachableTargetError:
            # the projected state is already narrower than the target
            alpha = 0.0
        psi = prepare_omega(PrepRecipe(seed, Y, alpha, E0, target_sigma_H), h, basis)
        cols.append(measure_px(apply_plan(plan, psi), basis))
        alphas.append(alpha)
    return np.array(cols), alphas


def measure_transition_matrix(h: LadderHamiltonian, tau=15.0, seeds_per_column=5, root_seed=0,
                              target_sigma_H=DEFAULT_SIGMA_H, E0=0.0, workers=1):
    """Average measured ``w(tau)`` over ``seeds_per_column`` initial states per column."""
    basis = h.basis
    half = basis.geometry.half
    X = basis.x_values
    # stream tag 2 keeps these seeds disjoint from trace and typicality seeds
    seeds = {int(Y): [derive_seed(root_seed, 2, basis.N, (int(Y) + half) // 2, r)
                      for r in range(seeds_per_column)] for Y in X}
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            futs = {int(Y): pool.submit(_column, basis.N, h.J, h.kappa, h.delta, int(Y), tau,
                                        seeds[int(Y)], target_sigma_H, E0) for Y in X}
            results = {Y: f.result() for Y, f in futs.items()}
    else:
        results = {int(Y): _measure_column(h, int(Y), tau, seeds[int(Y)], target_sigma_H, E0)
                   for Y in X}

    n = X.size
    w = np.zeros((n, n))
    se = np.zeros((n, n))
    alphas = {}
    for j, Y in enumerate(X):
        cols, al = results[int(Y)]
        w[:, j] = cols.mean(axis=0)
        if len(cols) > 1:
            se[:, j] = cols.std(axis=0, ddof=1) / np.sqrt(len(cols))
        alphas[int(Y)] = al
    pre_min = float(w.min())
    if pre_min < 0:
        log.info("clamping negative transition entries (min %.3e)", pre_min)
    w = _clean_stochastic(w, "measured transition matrix")
    return TransitionMatrix(float(tau), X.copy(), w, se, seeds_per_column, alphas, pre_min,
                            {"root_seed": int(root_seed), "target_sigma_H": target_sigma_H,
                             "E0": E0, "N": basis.N, "seeds": seeds})


@dataclass
class DriftDiffusion:
    """Lag-``tau`` change of the mean (``f``) and variance (``D``) from each block."""

    x_values: np.ndarray
    f: np.ndarray
    D: np.ndarray
    tau: float
    source: str

    def to_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["X", "f", "D"])
            for x, f, d in zip(self.x_values, self.f, self.D):
                wr.writerow([int(x), f"{f:.17g}", f"{d:.17g}"])
        return Path(path)


def extract_drift_diffusion(source, tau=None) -> DriftDiffusion:
    """Force and diffusion coefficients from a measured matrix or the spin-flip model.

    For a :class:`SpinFlipModel` the finite-time matrix ``u(tau)`` is built
    first; ``tau`` is then required. For a :class:`TransitionMatrix` its own
    lag is used.
    """
    if isinstance(source, SpinFlipModel):
        if tau is None:
            raise ValueError("tau is required for the spin-flip model")
        U, name = source.propagator(tau), "spin-flip"
        X = source.x_values
    else:
        U, name, tau = source.w, "measured", source.tau
        X = source.x_values
    f = np.empty(X.size)
    D = np.empty(X.size)
    for j, x in enumerate(X):
        mean, var = moments_x(U[:, j], X)
        f[j] = mean - x
        D[j] = var
    return DriftDiffusion(X.copy(), f, D, float(tau), name)


def fit_gamma(times, mean_x, P0, model: SpinFlipModel, t_window=None) -> float:
    """Least-squares time constant matching the master-equation mean to ``mean_x``.

    ``P0`` is the block distribution at ``times[0]``; only samples with
    ``t <= t_window`` enter the fit when given.
    """
    times = np.asarray(times, dtype=float)
    mean_x = np.asarray(mean_x, dtype=float)
    if t_window is not None:
        keep = times <= t_window
        times, mean_x = times[keep], mean_x[keep]
    X = model.x_values
    rel = times - times[0]

    def cost(log_gamma):
        traj = master_trajectory(model.with_gamma(np.exp(log_gamma)), P0, rel)
        return float(np.sum((traj @ X - mean_x) ** 2))

    res = scipy.optimize.minimize_scalar(cost, bounds=(np.log(1e-4), np.log(1e4)),
                                         method="bounded", options={"xatol": 1e-10})
    if not res.success:
        raise FitError(f"gamma fit failed: {res.message}", residual=res.fun)
    gamma = float(np.exp(res.x))
    if gamma <= 1.0001e-4 or gamma >= 0.9999e4:
        raise FitError(f"gamma fit ran to the bracket edge ({gamma:g})", residual=res.fun)
    return gamma


def save_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True))
    return Path(path)
