"""Gaussian primitives, analytic integrals, and the quadrature grid."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from diraclab import charges, gaussian
from diraclab.errors import ConfigError, IllConditionedBasisError


def two_center_basis(n_s=6, d=1.4):
    mu = charges.atoms([(0, 0, 0), (d, 0, 0)], [0.3, 0.3])
    return gaussian.default_spinor_basis(mu, n_s=n_s, alpha0=0.05, beta=3.0)


# --- Boys function ---------------------------------------------------------

@pytest.mark.parametrize("m", range(5))
@pytest.mark.parametrize("t", [0.0, 1e-8, 0.1, 1.0, 19.9, 20.1, 50.0, 500.0])
def test_boys_against_quadrature_oracle(m, t):
    assert gaussian.boys(m, t) == pytest.approx(
        oracles.boys_reference(m, t), abs=1e-12)


def test_boys_vectorized_and_validated():
    t = np.array([0.0, 1.0, 30.0])
    out = gaussian.boys(2, t)
    assert out.shape == (3,)
    with pytest.raises(ConfigError):
        gaussian.boys(5, 1.0)
    with pytest.raises(ConfigError):
        gaussian.boys(0, -0.5)


@given(m=st.integers(min_value=0, max_value=3),
       t=st.floats(min_value=1e-6, max_value=200.0))
@settings(max_examples=80, deadline=None)
def test_boys_downward_recursion(m, t):
    # (2m+1) F_m(t) = e^-t + 2t F_{m+1}(t)
    lhs = (2 * m + 1) * gaussian.boys(m, t)
    rhs = math.exp(-t) + 2.0 * t * gaussian.boys(m + 1, t)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)


# --- analytic integrals vs quadrature oracles ------------------------------

def test_overlap_against_1d_quadrature():
    prims = [gaussian.GaussianPrimitive((0, 0, 0), 0.7),
             gaussian.GaussianPrimitive((1.1, -0.4, 0.2), 2.3)]
    sb = gaussian.ScalarBasis(prims)
    for i in range(2):
        for j in range(2):
            gi, gj = prims[i], prims[j]
            want = gi.norm * gj.norm * oracles.gaussian_overlap_reference(
                gi.exponent, gi.center, gj.exponent, gj.center)
            assert sb.overlap(i, j) == pytest.approx(want, rel=1e-12)


def test_attraction_against_erf_oracle():
    prims = [gaussian.GaussianPrimitive((0, 0, 0), 0.9),
             gaussian.GaussianPrimitive((0.8, 0.3, 0.0), 1.7)]
    sb = gaussian.ScalarBasis(prims)
    for R in [(0, 0, 0), (0.5, 0.1, -0.3), (4.0, 0, 0)]:
        for i in range(2):
            for j in range(2):
                gi, gj = prims[i], prims[j]
                want = gi.norm * gj.norm * \
                    oracles.gaussian_attraction_reference(
                        gi.exponent, gi.center, gj.exponent, gj.center, R)
                assert sb.attraction(i, j, R) == pytest.approx(
                    want, rel=1e-11)


def test_potential_matrix_is_negative_definite_sum():
    basis = two_center_basis()
    mu = charges.atoms([(0, 0, 0), (1.4, 0, 0)], [0.3, 0.3])
    sc = basis.scalar
    m_v = sc.potential_matrix(mu)
    manual = -(sc.attraction_matrix((0, 0, 0), 0.3)
               + sc.attraction_matrix((1.4, 0, 0), 0.3))
    assert np.allclose(m_v, manual, atol=1e-14)
    assert np.all(np.linalg.eigvalsh(m_v) < 0.0)
    with pytest.raises(ConfigError):
        sc.potential_matrix(charges.shell(0.5, 1.0))


def test_values_and_gradients_match_finite_differences():
    prims = [gaussian.GaussianPrimitive((0.2, -0.1, 0.5), 1.3, "s"),
             gaussian.GaussianPrimitive((0.0, 0.4, 0.0), 0.8, "py")]
    sb = gaussian.ScalarBasis(prims)
    pts = np.array([[0.3, 0.2, 0.1], [-0.5, 1.0, 0.4]])
    vals, grads = sb.values_and_gradients(pts)
    eps = 1e-6
    for d in range(3):
        shift = np.zeros(3)
        shift[d] = eps
        vp, _ = sb.values_and_gradients(pts + shift)
        vm, _ = sb.values_and_gradients(pts - shift)
        assert np.allclose(grads[d], (vp - vm) / (2 * eps), atol=1e-7)


def test_primitive_validation():
    with pytest.raises(ConfigError):
        gaussian.GaussianPrimitive((0, 0, 0), 0.0)
    with pytest.raises(ConfigError):
        gaussian.GaussianPrimitive((0, 0, 0), 1e13)
    with pytest.raises(ConfigError):
        gaussian.GaussianPrimitive((0, 0, 0), 1.0, "dxy")


# --- spinor layer ----------------------------------------------------------

def test_orthogonalizer_whitens_overlap():
    basis = two_center_basis()
    x = basis.orthogonalizer
    s = basis.scalar.overlap_matrix()
    assert np.allclose(x.T @ s @ x, np.eye(x.shape[1]), atol=1e-12)


def test_spinor_matrix_structure():
    rng = np.random.default_rng(7)
    n = 4
    dot = rng.normal(size=(n, n))
    dot = dot + dot.T
    cross = []
    for _ in range(3):
        m = rng.normal(size=(n, n))
        cross.append(m - m.T)  # antisymmetric real cross blocks
    out = gaussian.spinor_matrix(dot, cross)
    assert out.shape == (2 * n, 2 * n)
    assert np.allclose(out, out.conj().T, atol=1e-14)
    # dropping the cross part leaves a real block-diagonal kron
    plain = gaussian.spinor_matrix(dot)
    assert np.allclose(plain, np.kron(dot, np.eye(2)), atol=1e-15)


def test_grad_gram_is_spin_diagonal_and_psd():
    basis = two_center_basis(n_s=4)
    t = basis.grad_gram()
    assert np.allclose(t, t.conj().T, atol=1e-13)
    assert np.allclose(t.imag, 0.0, atol=1e-13)
    assert np.min(np.linalg.eigvalsh(t)) > 0.0
    assert np.allclose(t, np.kron(basis.scalar.grad_dot_matrix(), np.eye(2)),
                       atol=1e-13)


def test_default_basis_dedupes_coincident_atoms():
    mu = charges.ChargeDistribution(points=(
        charges.PointCharge((0.0, 0.0, 0.0), 0.3),
        charges.PointCharge((0.0, 0.0, 0.0), 0.2)))
    basis = gaussian.default_spinor_basis(mu, n_s=5)
    assert basis.scalar.n == 5
    with pytest.raises(ConfigError):
        gaussian.default_spinor_basis(charges.shell(0.5, 1.0))


def test_ill_conditioned_basis_is_filtered_not_fatal():
    # duplicated primitives make S singular; filtering keeps a subspace
    prims = [gaussian.GaussianPrimitive((0, 0, 0), 1.0)] * 3
    basis = gaussian.SpinorBasis(gaussian.ScalarBasis(prims))
    assert basis.orthogonalizer.shape[1] == 1


# --- quadrature grid -------------------------------------------------------

def test_becke_partition_of_unity():
    centers = np.array([[0.0, 0.0, 0.0], [1.3, 0.0, 0.0], [0.4, 1.1, -0.2]])
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(500, 3)) * 2.0
    w = gaussian.becke_weights(pts, centers)
    assert np.max(np.abs(np.sum(w, axis=1) - 1.0)) <= 1e-12
    assert np.all(w >= 0.0)


def test_grid_partition_residual_is_tracked():
    grid = gaussian.build_grid([(0, 0, 0), (1.5, 0, 0)], n_radial=40,
                               angular_order=11)
    assert grid.partition_residual <= 1e-12
    assert grid.size == len(grid.points) == len(grid.weights)


def test_default_window_integrates_unit_gaussian():
    # frozen check of the shipped radial window at the default orders
    grid = gaussian.build_grid([(0, 0, 0)], n_radial=60, angular_order=17)
    got = float(np.sum(grid.weights
                       * np.exp(-np.sum(grid.points ** 2, axis=1))))
    assert abs(got - np.pi ** 1.5) <= 1e-10


def test_grid_error_shrinks_with_radial_count():
    def err(n):
        grid = gaussian.build_grid([(0, 0, 0)], n_radial=n, angular_order=17)
        got = float(np.sum(
            grid.weights * np.exp(-np.sum(grid.points ** 2, axis=1))))
        return abs(got - np.pi ** 1.5)
    assert err(40) > err(60)


def test_grid_for_basis_reproduces_analytic_overlap():
    # 144 radial shells push the inner-cut and aliasing terms below 1e-8
    # for this exponent span; the production default trades some of that
    # accuracy for speed
    basis = two_center_basis(n_s=6)
    grid = gaussian.grid_for_basis(basis, n_radial=144, angular_order=35)
    ev = gaussian.GridEvaluation(basis, grid)
    s_grid = ev.weighted_overlap(grid.weights)
    s_exact = basis.scalar.overlap_matrix()
    assert np.max(np.abs(s_grid - s_exact)) <= 1e-8


def test_grid_reproduces_analytic_attraction():
    # the integrable 1/|x - C| spike must sit on a grid center
    basis = two_center_basis(n_s=6, d=1.4)
    mu = charges.atoms([(0, 0, 0), (1.4, 0, 0)], [0.3, 0.3])
    grid = gaussian.grid_for_basis(basis, n_radial=144, angular_order=35)
    vpot = charges.potential_grid(mu, grid.points)
    ev = gaussian.GridEvaluation(basis, grid)
    got = ev.weighted_overlap(grid.weights * vpot)
    want = -basis.scalar.potential_matrix(mu)
    assert np.max(np.abs(got - want)) <= 1e-8


def test_weighted_grad_blocks_consistency():
    basis = two_center_basis(n_s=4)
    grid = gaussian.grid_for_basis(basis, n_radial=48, angular_order=17)
    ev = gaussian.GridEvaluation(basis, grid)
    c = grid.weights / (1.0 + np.sum(grid.points ** 2, axis=1))
    dot, cross = ev.weighted_grad_blocks(c, block=1000)
    assert np.allclose(dot, ev.weighted_grad_dot(c), atol=1e-12)
    for a, b in zip(cross, ev.weighted_grad_cross(c)):
        assert np.allclose(a, b, atol=1e-12)
        assert np.allclose(a, -a.T, atol=1e-15)


def test_grid_validation():
    with pytest.raises(ConfigError):
        gaussian.build_grid([(0, 0, 0)], angular_order=8)
    with pytest.raises(ConfigError):
        gaussian.build_grid(np.empty((0, 3)))
