import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from conftest import dense_ladder, random_state
from ladderdyn.basis import build_basis
from ladderdyn.errors import ConvergenceError, DimensionError
from ladderdyn.hamiltonian import LadderHamiltonian, spectral_bounds


def matrix_of(h):
    return np.column_stack([h.apply(c) for c in np.eye(h.dim, dtype=complex)])


def test_n4_diagonal_element(ladder):
    # |up up ; down down>: L beam up, R beam down
    h = ladder(4)
    k = h.basis.index_of(0b0011)
    e = np.zeros(h.dim, dtype=complex)
    e[k] = 1
    assert np.vdot(e, h.apply(e)).real == pytest.approx(0.24, abs=1e-14)


@pytest.mark.parametrize("N", [4, 6, 8])
def test_matches_kronecker_oracle(ladder, N):
    np.testing.assert_allclose(matrix_of(ladder(N)), dense_ladder(N), atol=1e-14)


@pytest.mark.parametrize("J,kappa,delta", [(1.0, 1.0, 1.0), (0.7, -0.3, 0.0), (1.3, 0.2, -0.5)])
def test_matches_oracle_other_couplings(J, kappa, delta):
    h = LadderHamiltonian(build_basis(6), J, kappa, delta)
    np.testing.assert_allclose(matrix_of(h), dense_ladder(6, J, kappa, delta), atol=1e-14)


def test_n8_ground_state(ladder):
    h = ladder(8)
    e_oracle = scipy.linalg.eigvalsh(dense_ladder(8))
    assert h.bounds().E_min == pytest.approx(e_oracle[0], abs=1e-10)
    assert h.bounds().E_max == pytest.approx(e_oracle[-1], abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(N=st.sampled_from([4, 8, 12]), s1=st.integers(0, 2**32), s2=st.integers(0, 2**32))
def test_hermiticity(ladder, N, s1, s2):
    h = ladder(N)
    phi, psi = random_state(h.dim, s1), random_state(h.dim, s2)
    assert abs(np.vdot(phi, h.apply(psi)) - np.conj(np.vdot(psi, h.apply(phi)))) < 1e-13


def test_real_symmetric_matrix(ladder):
    M = matrix_of(ladder(10))
    assert np.all(M.imag == 0)
    np.testing.assert_array_equal(M, M.T)


def test_preserves_x_block_structure_only_via_rungs(ladder):
    # beam bonds conserve X; rungs connect X to X +- 2
    h = ladder(8)
    M = matrix_of(h)
    X = h.basis.xvals
    jump = np.abs(X[:, None] - X[None, :])
    assert set(np.unique(jump[np.abs(M) > 0])) <= {0, 2}
    h0 = LadderHamiltonian(h.basis, 1.0, 0.0, 0.6)
    assert set(np.unique(jump[np.abs(matrix_of(h0)) > 0])) == {0}


def test_expectation_real_and_consistent(ladder):
    h = ladder(8)
    psi = random_state(h.dim, 3)
    e1, e2 = h.expectation(psi)
    M = dense_ladder(8)
    assert e1 == pytest.approx(np.vdot(psi, M @ psi).real, abs=1e-13)
    assert e2 == pytest.approx(np.vdot(psi, M @ M @ psi).real, abs=1e-13)


@pytest.mark.parametrize("N", [8, 12])
def test_bounds_contain_spectrum_and_rayleigh(ladder, N):
    h = ladder(N)
    b = h.bounds()
    evals = scipy.linalg.eigvalsh(matrix_of(h))
    assert b.lower < evals[0] and evals[-1] < b.upper
    assert b.E_min == pytest.approx(evals[0], abs=1e-7)
    assert b.E_max == pytest.approx(evals[-1], abs=1e-7)
    for s in range(20):
        e1, _ = h.expectation(random_state(h.dim, s))
        assert b.lower <= e1 <= b.upper
    assert b.eps == pytest.approx(0.01 * (b.E_max - b.E_min))


def test_arpack_path_matches_dense(ladder):
    h = ladder(12)  # dimension 924, above the dense cutoff
    b = spectral_bounds(h)
    evals = scipy.linalg.eigvalsh(matrix_of(h))
    assert abs(b.E_min - evals[0]) < 1e-8 and abs(b.E_max - evals[-1]) < 1e-8


def test_bounds_scale_with_couplings(ladder):
    h = ladder(12)
    b1, b2 = h.bounds(), h.scaled(2.0).bounds()
    assert b2.E_min == pytest.approx(2 * b1.E_min, rel=1e-7)
    assert b2.E_max == pytest.approx(2 * b1.E_max, rel=1e-7)


def test_arpack_nonconvergence_reports_bracket(ladder):
    with pytest.raises(ConvergenceError) as info:
        spectral_bounds(ladder(14), tol=1e-15, maxiter=1)
    assert len(info.value.bracket) == 2


def test_dimension_mismatch(ladder):
    with pytest.raises(DimensionError):
        ladder(8).apply(np.ones(69, dtype=complex))


def test_call_and_out(ladder):
    h = ladder(8)
    psi = random_state(h.dim, 0)
    out = np.empty_like(psi)
    r = h.apply(psi, out=out)
    assert r is out
    np.testing.assert_array_equal(h(psi), out)
