import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastospec.lab import solve_case
from elastospec.spectrum import (SpectrumError, check_conjugate_closure,
                                 count_in_disk, eigenpair_residual,
                                 estimate_rate, first_real_eigenvalue,
                                 primal_oracle, richardson_reference,
                                 smallest_modulus_eigs, solve_pencil)


def test_diagonal_pencil():
    spec = solve_pencil(np.diag([3.0, 2.0]), np.eye(2))
    assert spec.n_infinite == 0
    assert np.allclose(spec.finite, [2.0, 3.0])


def test_singular_rhs_infinite_mode():
    # second mode has beta = 0 and must be filtered out
    M = np.diag([2.0, 5.0])
    N = np.diag([1.0, 0.0])
    spec = solve_pencil(M, N)
    assert spec.n_infinite == 1
    assert np.allclose(spec.finite, [2.0])
    assert spec.size == 2


def test_modulus_outlier_filtered():
    # a finite-but-huge ratio is classified infinite by the median cut
    M = np.diag([1.0, 2.0, 1e14])
    N = np.eye(3)
    spec = solve_pencil(M, N, filter_ratio=1e10)
    assert spec.n_infinite == 1
    assert np.allclose(np.sort(spec.finite.real), [1.0, 2.0])


def test_solve_pencil_validation():
    with pytest.raises(SpectrumError, match="square"):
        solve_pencil(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(SpectrumError, match="filter_ratio"):
        solve_pencil(np.eye(2), np.eye(2), filter_ratio=0.0)
    with pytest.raises(SpectrumError, match="empty finite"):
        solve_pencil(np.eye(2), np.zeros((2, 2)))


def test_sorting_modulus_then_imag():
    M = np.array([[0.0, -2.0], [2.0, 0.0]])
    spec = solve_pencil(M, np.eye(2))
    assert spec.finite[0].imag < 0 < spec.finite[1].imag
    assert np.allclose(np.abs(spec.finite), 2.0)


def test_vectors_align_with_values():
    M = np.diag([4.0, 9.0, 1.0])
    spec = solve_pencil(M, np.eye(3), want_vectors=True)
    for gamma, v in zip(spec.finite, spec.vectors.T):
        assert np.linalg.norm(M @ v - gamma * v) < 1e-12


def test_conjugate_closure_checks():
    assert check_conjugate_closure(np.array([1.0, 2 + 1j, 2 - 1j]))
    assert not check_conjugate_closure(np.array([1.0, 2 + 1j]))
    assert check_conjugate_closure(np.array([5.0, 7.0]))


def test_count_in_disk():
    vals = np.array([1.0, 3 + 4j, 10.0])
    assert count_in_disk(vals, 2.0) == 1
    assert count_in_disk(vals, 6.0) == 2
    assert count_in_disk(vals, 5.0) == 1  # strictly below the radius
    with pytest.raises(SpectrumError):
        count_in_disk(vals, 0.0)


def test_first_real_eigenvalue():
    vals = np.array([1 - 2j, 1 + 2j, 3.0 + 1e-12j, 4.0])
    # conjugate pair occupies the two smallest slots -> must refuse
    with pytest.raises(SpectrumError, match="conjugate pair"):
        first_real_eigenvalue(vals)
    assert first_real_eigenvalue(np.array([3.0 + 1e-12j, 4.0])) == pytest.approx(3.0)
    with pytest.raises(SpectrumError, match="no finite"):
        first_real_eigenvalue(np.array([]))


def test_arnoldi_matches_full_solve(right4_case):
    _, _, _, pencil = right4_case
    full = solve_pencil(pencil.M, pencil.N_rhs)
    part = smallest_modulus_eigs(pencil.M, pencil.N_rhs, k=6)
    assert part.meta.get("truncated")
    assert np.allclose(np.abs(part.finite), np.abs(full.finite[:len(part.finite)]),
                       rtol=1e-8)


def test_arnoldi_deterministic(right4_case):
    _, _, _, pencil = right4_case
    a = smallest_modulus_eigs(pencil.M, pencil.N_rhs, k=6).finite
    b = smallest_modulus_eigs(pencil.M, pencil.N_rhs, k=6).finite
    assert np.array_equal(a, b)


def test_eigenpair_residual_small(right4_case):
    _, _, _, pencil = right4_case
    spec = solve_pencil(pencil.M, pencil.N_rhs, want_vectors=True)
    for k in range(min(4, len(spec.finite))):
        r = eigenpair_residual(pencil.M, pencil.N_rhs, spec.finite[k],
                               spec.vectors[:, k])
        assert r < 1e-10


def test_oracle_decreases_under_refinement():
    vals = [primal_oracle("square", n, n_eigs=1)[0] for n in (8, 16, 32)]
    assert vals[0] > vals[1] > vals[2]
    # the coarsest level is already within a percent of the converged value
    assert vals[2] == pytest.approx(37.266, rel=2e-3)


def test_oracle_warns_near_incompressible():
    with pytest.warns(UserWarning, match="locking"):
        primal_oracle("square", 8, lam=1e8, n_eigs=1)


def test_richardson_reference_provenance():
    ref = richardson_reference("square", levels=(8, 16, 32))
    assert ref.uncertainty > 0
    prov = ref.provenance
    assert prov["levels"] == [8, 16, 32]
    assert len(prov["raw_values"]) == 3
    assert 1.0 < prov["observed_order"] < 4.0
    assert ref.value == pytest.approx(37.266, rel=1e-3)


def test_richardson_needs_three_levels():
    with pytest.raises(SpectrumError, match="three"):
        richardson_reference("square", levels=(8, 16))


def test_estimate_rate_exact_quadratic():
    h = [0.5, 0.25, 0.125, 0.0625]
    slope, pairwise = estimate_rate([(x, 3.0 * x ** 2) for x in h])
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(pairwise, 2.0)


def test_estimate_rate_drops_bad_samples():
    with pytest.warns(UserWarning, match="dropping"):
        slope, _ = estimate_rate([(0.5, 0.25), (0.25, 0.0), (0.125, 0.015625)])
    assert slope == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(SpectrumError, match="at least two"):
        estimate_rate([(0.5, 0.25)])
    with pytest.raises(SpectrumError, match="decreasing"):
        estimate_rate([(0.25, 1.0), (0.5, 2.0)])


@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False,
                                   allow_infinity=False), min_size=1, max_size=8))
@settings(max_examples=50, deadline=None)
def test_closure_holds_after_symmetrization(zs):
    vals = np.array(zs + [np.conj(z) for z in zs])
    assert check_conjugate_closure(vals)
