"""Chebyshev expansions of functions of the ladder Hamiltonian.

The spectrum is mapped onto ``[-1, 1]`` by ``Ht = (H - b)/a`` with
``a = (E_max - E_min)/2 + eps`` and ``b = (E_max + E_min)/2``. A plan holds
the truncated coefficient sequence ``c_k`` of ``f(a*u + b)`` and is applied
with the three-term recurrence ``T_{k+1} = 2 Ht T_k - T_{k-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.special

from .errors import DimensionError, ParameterError
from .hamiltonian import LadderHamiltonian, SpectralBounds

__all__ = [
    "ChebyshevPlan",
    "ChebyshevMoments",
    "apply_plan",
    "chebyshev_coefficients",
    "plan_gaussian",
    "plan_propagator",
    "truncate",
]

TAIL_RUN = 3
_MAX_ORDER = 1 << 17


@dataclass(frozen=True)
class ChebyshevPlan:
    """Truncated expansion of one function of ``h``.

    ``kind`` is ``"propagator"`` (``params = {"t": ...}``) or
    ``"gaussian"`` (``params = {"alpha": ..., "E0": ...}``).
    """

    h: LadderHamiltonian = field(repr=False)
    bounds: SpectralBounds
    kind: str
    params: dict
    coeffs: np.ndarray = field(repr=False)
    tol: float = 1e-14

    @property
    def a(self) -> float:
        return self.bounds.half_width

    @property
    def b(self) -> float:
        return self.bounds.center

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def manifest(self) -> dict:
        return {
            "kind": self.kind,
            **{k: float(v) for k, v in self.params.items()},
            "order": self.order,
            "tol": self.tol,
            "a": self.a,
            "b": self.b,
        }


def truncate(coeffs, tol, run=TAIL_RUN):
    """Cut ``coeffs`` at the first index whose magnitude stays below ``tol``
    for ``run`` consecutive orders.

    Returns ``None`` if no such tail exists within the sequence.
    """
    small = np.abs(coeffs) < tol
    n = len(coeffs)
    for m in range(n - run + 1):
        if small[m:m + run].all():
            return np.array(coeffs[:max(m, 1)])
    return None


def _check_tol(tol):
    if not tol > 0:
        raise ParameterError(f"truncation tolerance must be positive, got {tol}")


def plan_propagator(h: LadderHamiltonian, t, tol=1e-14) -> ChebyshevPlan:
    """Plan for ``exp(-i H t)``.

    Uses ``exp(-i(a u + b)t) = exp(-ibt) sum_k (2 - delta_k0) (-i)^k J_k(a t) T_k(u)``.
    """
    _check_tol(tol)
    if t < 0:
        raise ParameterError(f"propagation time must be >= 0, got {t}")
    bounds = h.bounds()
    a, b = bounds.half_width, bounds.center
    at = a * t
    n = int(at) + 40
    while True:
        k = np.arange(n)
        c = scipy.special.jv(k, at) * (-1j) ** k
        c[1:] *= 2
        c *= np.exp(-1j * b * t)
        kept = truncate(c, tol)
        if kept is not None:
            break
        if n > _MAX_ORDER:
            raise ParameterError(f"propagator expansion for a*t={at} exceeds {_MAX_ORDER} terms")
        n *= 2
    return ChebyshevPlan(h, bounds, "propagator", {"t": float(t)}, kept, tol)


def chebyshev_coefficients(func, n_quad):
    """Chebyshev coefficients of ``func`` on ``[-1, 1]`` by Gauss-Chebyshev
    quadrature with ``n_quad`` nodes. Returns ``n_quad`` coefficients."""
    theta = np.pi * (np.arange(n_quad) + 0.5) / n_quad
    vals = func(np.cos(theta))
    c = scipy.fft.dct(vals, type=2) / n_quad
    c[0] /= 2
    return c


def _expand(func, trial, tol):
    """Coefficients of ``func`` with quadrature order 4x the trial order,
    doubling the trial order until the tail rule is met inside it."""
    trial = max(int(trial), 8)
    while trial <= _MAX_ORDER:
        c = chebyshev_coefficients(func, 4 * trial)
        kept = truncate(c[:trial + TAIL_RUN], tol)
        if kept is not None:
            return kept
        trial *= 2
    raise ParameterError(f"expansion did not reach tolerance {tol} within {_MAX_ORDER} terms")


def _gaussian_trial(a, alpha):
    # coefficients decay like exp(-k^2 / (4 alpha a^2)); 1e-14 is reached near k = 11.4 a sqrt(alpha)
    return 12 * a * np.sqrt(alpha) + 16


def plan_gaussian(h: LadderHamiltonian, alpha, E0=0.0, tol=1e-14) -> ChebyshevPlan:
    """Plan for the energy filter ``exp(-alpha (H - E0)^2)``."""
    _check_tol(tol)
    if alpha < 0:
        raise ParameterError(f"alpha must be >= 0, got {alpha}")
    bounds = h.bounds()
    a, b = bounds.half_width, bounds.center
    params = {"alpha": float(alpha), "E0": float(E0)}
    if alpha == 0:
        return ChebyshevPlan(h, bounds, "gaussian", params, np.ones(1), tol)
    coeffs = _expand(lambda u: np.exp(-alpha * (a * u + b - E0) ** 2),
                     _gaussian_trial(a, alpha), tol)
    return ChebyshevPlan(h, bounds, "gaussian", params, coeffs, tol)


def apply_plan(plan: ChebyshevPlan, state) -> np.ndarray:
    """Return ``sum_k c_k T_k(Ht) |state>``.

    Uses two recurrence buffers plus the accumulator. The result is never
    renormalized.
    """
    h = plan.h
    x = np.asarray(state)
    if x.ndim != 1 or x.shape[0] != h.dim:
        raise DimensionError(f"state of shape {x.shape} does not match plan dimension {h.dim}")
    c = plan.coeffs
    prev = np.array(x, dtype=complex)
    acc = c[0] * prev
    if len(c) == 1:
        return acc
    a, b = plan.a, plan.b
    cur = np.empty_like(prev)
    h.step(prev, cur, 1.0 / a, b, 0.0, acc, c[1])
    for ck in c[2:]:
        h.step(cur, prev, 2.0 / a, b, -1.0, acc, ck)
        prev, cur = cur, prev
    return acc


class ChebyshevMoments:
    """Moments ``mu_k = <phi| T_k(Ht) |phi>`` of a fixed state.

    ``mu_{2k}`` and ``mu_{2k+1}`` come from products of ``T_k phi`` vectors,
    so ``n`` recurrence steps give ``2n`` moments. Expectation values of any
    function of ``H`` then cost only a coefficient evaluation.
    """

    def __init__(self, h: LadderHamiltonian, state):
        self.h = h
        self.bounds = h.bounds()
        self._prev = np.array(state, dtype=complex)
        self._cur = np.empty_like(self._prev)
        h.step(self._prev, self._cur, 1.0 / self.bounds.half_width, self.bounds.center)
        mu0 = np.vdot(self._prev, self._prev).real
        mu1 = np.vdot(self._prev, self._cur).real
        self._mu = [mu0, mu1, 2 * np.vdot(self._cur, self._cur).real - mu0]
        # _cur holds T_k phi with k = self._k
        self._k = 1

    def __len__(self):
        return len(self._mu)

    def extend(self, n):
        """Ensure at least ``n`` moments are available."""
        a, b = self.bounds.half_width, self.bounds.center
        while len(self._mu) < n:
            self.h.step(self._cur, self._prev, 2.0 / a, b, -1.0)
            self._prev, self._cur = self._cur, self._prev
            self._k += 1
            mu0, mu1 = self._mu[0], self._mu[1]
            self._mu.append(2 * np.vdot(self._cur, self._prev).real - mu1)
            self._mu.append(2 * np.vdot(self._cur, self._cur).real - mu0)
        return np.array(self._mu[:max(n, 1)])

    def expect(self, func, trial, tol=1e-14):
        """``<phi| f(H) |phi>`` for a real ``func`` of the energy."""
        a, b = self.bounds.half_width, self.bounds.center
        c = _expand(lambda u: func(a * u + b), trial, tol)
        mu = self.extend(len(c))
        return float(np.dot(c, mu[:len(c)]))

    def filtered_energy_stats(self, alpha, E0=0.0):
        """``(norm^2, <H>, sigma_H)`` of ``exp(-alpha (H-E0)^2) |phi>``."""
        trial = _gaussian_trial(self.bounds.half_width, 2 * alpha)
        w = [self.expect(lambda e, p=p: np.exp(-2 * alpha * (e - E0) ** 2) * e ** p, trial)
             for p in range(3)]
        mean = w[1] / w[0]
        var = w[2] / w[0] - mean * mean
        return w[0], mean, float(np.sqrt(max(var, 0.0)))
