"""Matrix-free anisotropic Heisenberg ladder Hamiltonian.

    H = sum_beam-bonds J (SxSx + SySy + delta SzSz) + kappa sum_rungs (SxSx + SySy + delta SzSz)

with open boundaries along the beams. The XX+YY part flips an anti-aligned
pair with amplitude ``w/2`` and no sign.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from . import kernels
from .basis import SectorBasis
from .errors import ConvergenceError, DimensionError

__all__ = ["LadderHamiltonian", "SpectralBounds", "spectral_bounds"]


class LadderHamiltonian:
    """Hamiltonian acting on state vectors of one :class:`SectorBasis`.

    Parameters
    ----------
    basis : SectorBasis
    J : float
        Coupling along the beams.
    kappa : float
        Rung coupling.
    delta : float
        Anisotropy factor of the SzSz terms.
    """

    def __init__(self, basis: SectorBasis, J=1.0, kappa=0.2, delta=0.6):
        self.basis = basis
        self.J = float(J)
        self.kappa = float(kappa)
        self.delta = float(delta)
        geom = basis.geometry
        half = geom.half

        bonds = []
        for beam in ("L", "R"):
            for i in range(1, half):
                bonds.append((geom.bit(beam, i), geom.bit(beam, i + 1), self.J))
        for i in range(1, half + 1):
            bonds.append((geom.bit("L", i), geom.bit("R", i), self.kappa))
        self.bonds = tuple(bonds)

        configs = basis.configs
        diag = np.zeros(basis.dim)
        for a, b, w in bonds:
            sa = ((configs >> a) & 1) - 0.5
            sb = ((configs >> b) & 1) - 0.5
            diag += self.delta * w * sa * sb
        self.diag = diag
        self._masks = np.array([(1 << a) | (1 << b) for a, b, _ in bonds], dtype=np.int64)
        self._amps = np.array([0.5 * w for _, _, w in bonds])
        self._bounds = None

    @property
    def dim(self) -> int:
        return self.basis.dim

    def scaled(self, factor) -> "LadderHamiltonian":
        return LadderHamiltonian(self.basis, self.J * factor, self.kappa * factor, self.delta)

    def _check(self, vec):
        if vec.ndim != 1 or vec.shape[0] != self.dim:
            raise DimensionError(
                f"state of shape {vec.shape} does not match sector dimension {self.dim}"
            )

    def step(self, x, out, scale=1.0, shift=0.0, beta=0.0, acc=None, coef=0.0):
        """``out <- scale*(H x - shift*x) + beta*out``; also ``acc += coef*out``.

        All vectors must be contiguous complex128 arrays; ``out`` must not
        alias ``x``.
        """
        kernels.h_step(
            self.basis.configs, self.diag, self._masks, self._amps,
            self.basis.lo_rank, self.basis.hi_rank, self.basis.geometry.half,
            x, out, scale, shift, beta, acc, coef,
        )
        return out

    def apply(self, state, out=None):
        """Return ``H |state>`` without forming the matrix."""
        x = np.ascontiguousarray(state, dtype=complex)
        self._check(x)
        if out is None:
            out = np.empty_like(x)
        return self.step(x, out)

    __call__ = apply

    def expectation(self, state):
        """Return ``(<H>, <H^2>)`` for a unit-norm state."""
        hx = self.apply(state)
        return float(np.vdot(state, hx).real), float(np.vdot(hx, hx).real)

    def energy_stats(self, state):
        """Return ``(<H>, sigma_H)``."""
        e1, e2 = self.expectation(state)
        return e1, float(np.sqrt(max(e2 - e1 * e1, 0.0)))

    def as_linear_operator(self):
        def mv(v):
            return self.apply(np.ravel(v))

        return spla.LinearOperator((self.dim, self.dim), matvec=mv, dtype=complex)

    def bounds(self) -> "SpectralBounds":
        if self._bounds is None:
            self._bounds = spectral_bounds(self)
        return self._bounds


@dataclass(frozen=True)
class SpectralBounds:
    """Extremal eigenvalue estimates plus a safety margin ``eps``."""

    E_min: float
    E_max: float
    eps: float

    @property
    def lower(self) -> float:
        return self.E_min - self.eps

    @property
    def upper(self) -> float:
        return self.E_max + self.eps

    @property
    def half_width(self) -> float:
        return 0.5 * (self.E_max - self.E_min) + self.eps

    @property
    def center(self) -> float:
        return 0.5 * (self.E_max + self.E_min)


_DENSE_LIMIT = 400


def spectral_bounds(h: LadderHamiltonian, tol=1e-8, maxiter=500, margin=0.01) -> SpectralBounds:
    """Extremal eigenvalues of ``h`` widened by ``margin`` times the spectral width.

    Uses implicitly restarted Lanczos (ARPACK) on the matrix-free action;
    small sectors are diagonalized densely.
    """
    if h.dim < 2:
        raise DimensionError("spectral bounds need a sector of dimension >= 2")
    if h.dim <= _DENSE_LIMIT:
        dense = np.column_stack([h.apply(col) for col in np.eye(h.dim, dtype=complex)])
        evals = scipy.linalg.eigvalsh(dense)
        lo, hi = float(evals[0]), float(evals[-1])
    else:
        op = h.as_linear_operator()
        # the Hamiltonian is real symmetric; a real operator keeps ARPACK in dsaupd
        real_op = spla.LinearOperator(op.shape, matvec=lambda v: op.matvec(v).real, dtype=float)
        v0 = np.random.default_rng(0).uniform(-1, 1, h.dim)
        found = {}
        for which in ("SA", "LA"):
            try:
                val = spla.eigsh(real_op, k=1, which=which, tol=tol, maxiter=maxiter,
                                 v0=v0, return_eigenvectors=False)
            except spla.ArpackNoConvergence as exc:
                best = exc.eigenvalues
                found[which] = float(best[0]) if len(best) else None
                raise ConvergenceError(
                    f"extremal eigenvalue ({which}) did not converge in {maxiter} iterations",
                    bracket=(found.get("SA"), found.get("LA")),
                ) from exc
            found[which] = float(val[0])
        lo, hi = found["SA"], found["LA"]
    return SpectralBounds(lo, hi, margin * (hi - lo))
