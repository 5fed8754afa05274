"""Random energy-filtered initial states.

``omega_X = C exp(-alpha (H - E0)^2) P_X |Psi>`` with ``Psi`` a random real
vector in the S_z=0 sector. The filter is applied after the projection;
the two do not commute.

Random amplitudes come from numpy's ``PCG64`` bit generator seeded with the
recipe seed; PCG64 output is platform independent.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .basis import SectorBasis
from .chebyshev import ChebyshevMoments, apply_plan, plan_gaussian
from .errors import (ConvergenceError, EmptyProjectionError, SectorViolationError,
                     UnreachableTargetError)
from .hamiltonian import LadderHamiltonian

__all__ = [
    "PrepRecipe",
    "derive_seed",
    "prepare_omega",
    "prepare_typical",
    "project_x",
    "random_sector_state",
    "tune_alpha",
]

DEFAULT_SIGMA_H = 0.37


@dataclass(frozen=True)
class PrepRecipe:
    """Everything needed to rebuild one initial state.

    ``X_target=None`` means unrestricted in X.
    """

    seed: int
    X_target: int | None = None
    alpha: float = 0.0
    E0: float = 0.0
    target_sigma_H: float = DEFAULT_SIGMA_H

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def derive_seed(root_seed, *labels) -> int:
    """64-bit seed for one run, derived from the experiment root seed.

    ``labels`` are non-negative integers naming the run (e.g. N, X offset,
    replica). Uses ``SeedSequence`` hashing so nearby labels give
    unrelated streams.
    """
    ss = np.random.SeedSequence([int(root_seed), *[int(v) for v in labels]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def random_sector_state(seed, basis: SectorBasis) -> np.ndarray:
    """Uniform ``[-1, 1]`` real amplitudes on every sector configuration, normalized."""
    rng = np.random.Generator(np.random.PCG64(seed))
    psi = rng.uniform(-1.0, 1.0, basis.dim)
    return (psi / np.linalg.norm(psi)).astype(complex)


def project_x(state, X_target, basis: SectorBasis) -> np.ndarray:
    """Keep only the ``X_target`` block and renormalize."""
    idx = basis.block(X_target)
    out = np.zeros(basis.dim, dtype=complex)
    out[idx] = state[idx]
    norm = np.linalg.norm(out)
    if norm < 1e-300:
        raise EmptyProjectionError(f"state has no weight in block X={X_target}")
    return out / norm


def _projected(recipe: PrepRecipe, basis):
    if recipe.X_target is not None and recipe.X_target not in set(basis.x_values.tolist()):
        raise SectorViolationError(f"X={recipe.X_target} is not admissible for N={basis.N}")
    psi = random_sector_state(recipe.seed, basis)
    if recipe.X_target is None:
        return psi
    return project_x(psi, recipe.X_target, basis)


def _filter(state, alpha, E0, h):
    if alpha == 0:
        return state
    out = apply_plan(plan_gaussian(h, alpha, E0), state)
    return out / np.linalg.norm(out)


def prepare_omega(recipe: PrepRecipe, h: LadderHamiltonian, basis: SectorBasis) -> np.ndarray:
    """Random state -> X projection -> energy filter -> normalization."""
    return _filter(_projected(recipe, basis), recipe.alpha, recipe.E0, h)


def prepare_typical(seed, alpha, h: LadderHamiltonian, basis: SectorBasis, E0=0.0) -> np.ndarray:
    """Energy-filtered random state with no constraint on X."""
    return prepare_omega(PrepRecipe(seed, None, alpha, E0), h, basis)


def tune_alpha(seed, X_target, target_sigma_H, h: LadderHamiltonian, basis: SectorBasis,
               E0=0.0, rtol=1e-3, max_iter=60) -> float:
    """Bisect the filter strength until the prepared state has energy spread
    ``target_sigma_H`` within ``rtol`` relative.

    The spread of the filtered state is evaluated from Chebyshev moments of
    the projected state, so each bisection step costs no matrix-vector
    products once enough moments exist.
    """
    phi = _projected(PrepRecipe(seed, X_target), basis)
    moments = ChebyshevMoments(h, phi)

    def sigma(alpha):
        return moments.filtered_energy_stats(alpha, E0)[2]

    tol = rtol * target_sigma_H
    s0 = sigma(0.0)
    if abs(s0 - target_sigma_H) < tol:
        return 0.0
    if target_sigma_H > s0:
        raise UnreachableTargetError(
            f"target sigma_H={target_sigma_H} exceeds the unfiltered value {s0:.6g}"
        )

    lo, hi = 0.0, 1.0
    n = 0
    while sigma(hi) > target_sigma_H:
        lo, hi = hi, 2 * hi
        n += 1
        if n > max_iter:
            raise ConvergenceError("no upper bracket for alpha", bracket=(lo, hi))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s = sigma(mid)
        if abs(s - target_sigma_H) < tol:
            return mid
        if s > target_sigma_H:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"alpha bisection did not converge in {max_iter} steps", bracket=(lo, hi))
