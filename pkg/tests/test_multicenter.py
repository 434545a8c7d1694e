"""3D gap solver: effective operator, cross-check, and flags."""
import math

import numpy as np
import pytest

import oracles
from diraclab import charges, gaussian, multicenter
from diraclab.errors import ConfigError, NoGapEigenvalueError


def basis_for(mu, **kw):
    return gaussian.default_spinor_basis(mu, **kw)


def test_generalized_eigen_solves_random_pencil():
    rng = np.random.default_rng(11)
    n = 6
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    a = a + a.conj().T
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = b @ b.conj().T + n * np.eye(n)
    evals, vecs = multicenter.generalized_hermitian_eigen(a, m)
    assert np.all(np.diff(evals) >= 0.0)
    for k in range(n):
        r = a @ vecs[:, k] - evals[k] * (m @ vecs[:, k])
        assert np.linalg.norm(r) <= 1e-12 * np.linalg.norm(m)
        piv = vecs[np.argmax(np.abs(vecs[:, k])), k]
        assert abs(piv.imag) <= 1e-14 and piv.real > 0.0
    # vectors are metric-orthonormal
    g = vecs.conj().T @ m @ vecs
    assert np.allclose(g, np.eye(n), atol=1e-12)


def test_static_matrices_shapes_and_sign():
    mu = charges.atoms([(0, 0, 0), (1, 0, 0)], [0.3, 0.2])
    basis = basis_for(mu, n_s=5)
    stat = multicenter.build_static(basis, mu)
    n = basis.size
    for mat in (stat.s, stat.m_v, stat.m1, stat.t):
        assert mat.shape == (n, n)
        assert np.allclose(mat, mat.conj().T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(stat.m_v) < 0.0)
    assert np.shares_memory(stat.s, stat.m1) or np.allclose(stat.s, stat.m1)


def test_assemble_w_free_case_scales_like_grad_gram():
    # with no potential the weight is constant 1/(1+lam)
    mu = charges.atom((0, 0, 0), 0.5)
    basis = basis_for(mu, n_s=6)
    grid = gaussian.grid_for_basis(basis)
    zero_v = charges.ChargeDistribution()  # no charge at all
    for lam in (-0.5, 0.0, 0.7):
        w = multicenter.assemble_W(lam, basis, zero_v, grid)
        want = basis.grad_gram() / (1.0 + lam)
        assert np.max(np.abs(w - want)) <= 1e-6 * np.max(np.abs(want))


def test_assemble_w_decreases_with_lambda():
    mu = charges.atom((0, 0, 0), 0.5)
    basis = basis_for(mu, n_s=6)
    grid = gaussian.grid_for_basis(basis)
    rng = np.random.default_rng(5)
    g = rng.normal(size=basis.size) + 1j * rng.normal(size=basis.size)
    vals = []
    for lam in (-0.9, -0.3, 0.2, 0.8):
        w = multicenter.assemble_W(lam, basis, mu, grid)
        vals.append(float((g.conj() @ w @ g).real))
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        multicenter.assemble_W(-1.0, basis, mu, grid)


def test_assemble_w_grid_self_convergence():
    mu = charges.atom((0, 0, 0), 0.5)
    basis = basis_for(mu, n_s=8)
    coarse = gaussian.grid_for_basis(basis, n_radial=96, angular_order=29)
    fine = gaussian.grid_for_basis(basis, n_radial=192, angular_order=35)
    w_c = multicenter.assemble_W(0.3, basis, mu, coarse)
    w_f = multicenter.assemble_W(0.3, basis, mu, fine)
    scale = np.max(np.abs(w_f))
    assert np.max(np.abs(w_c - w_f)) <= 1e-7 * scale


@pytest.mark.parametrize("nu", [0.3, 0.5, 0.7])
def test_single_center_matches_closed_form(nu):
    mu = charges.atom((0, 0, 0), nu)
    res = multicenter.solve_gap(basis_for(mu), mu)
    assert res.lambda1 == pytest.approx(oracles.point_dirac_lambda(nu),
                                        abs=5e-3)
    assert res.converged and not res.below_gap
    assert res.flags == ()


def test_translation_invariance():
    mu0 = charges.atom((0.0, 0.0, 0.0), 0.5)
    mu1 = charges.atom((0.7, -0.3, 1.1), 0.5)
    l0 = multicenter.solve_gap(basis_for(mu0), mu0).lambda1
    l1 = multicenter.solve_gap(basis_for(mu1), mu1).lambda1
    assert abs(l0 - l1) <= 1e-8


def test_solve_trace_is_monotone_and_short():
    mu = charges.atoms([(0, 0, 0), (1, 0, 0)], [0.3, 0.3])
    res = multicenter.solve_gap(basis_for(mu, n_s=10), mu)
    samples = sorted(res.trace)
    for (l1, h1), (l2, h2) in zip(samples, samples[1:]):
        assert h1 > h2
    assert res.iterations <= 40
    for w1, w2 in zip(res.widths, res.widths[1:]):
        assert w2 <= 0.5 * w1 + 1e-15


def test_eigenvector_satisfies_pencil_equation():
    mu = charges.atom((0, 0, 0), 0.5)
    basis = basis_for(mu)
    grid = gaussian.grid_for_basis(basis)
    res = multicenter.solve_gap(basis, mu, grid)
    stat = multicenter.build_static(basis, mu)
    a = (multicenter.assemble_W(res.lambda1, basis, mu, grid)
         + stat.m1 + stat.m_v)
    c = res.coefficients
    r = a @ c - res.lambda1 * (stat.s @ c)
    # the Rayleigh residual inherits the root residual, not machine eps
    denom = float(np.real(c.conj() @ stat.s @ c))
    assert np.linalg.norm(r) / denom <= 1e-6


def test_far_pair_dominated_by_heavier_atom():
    mu = charges.atoms([(0, 0, 0), (50, 0, 0)], [0.9, 0.1])
    res = multicenter.solve_gap(basis_for(mu), mu)
    assert res.lambda1 == pytest.approx(math.sqrt(1 - 0.81), abs=1e-2)


def test_far_equal_pair_matches_isolated_atom():
    mu = charges.atoms([(0, 0, 0), (50, 0, 0)], [0.25, 0.25])
    res = multicenter.solve_gap(basis_for(mu), mu)
    assert res.lambda1 == pytest.approx(math.sqrt(1 - 0.0625), abs=5e-3)


def test_merged_pair_approaches_combined_charge_from_above():
    mu = charges.atoms([(0, 0, 0), (0.05, 0, 0)], [0.2, 0.2])
    res = multicenter.solve_gap(basis_for(mu), mu)
    merged = math.sqrt(1 - 0.16)
    assert res.lambda1 == pytest.approx(merged, abs=1e-2)
    assert res.lambda1 >= merged - 1e-6


def test_cross_check_agreement_single_center():
    for nu in (0.3, 0.5):
        mu = charges.atom((0, 0, 0), nu)
        cfg = multicenter.GapSolveConfig(crosscheck=True)
        res = multicenter.solve_gap(basis_for(mu), mu, config=cfg)
        assert res.crosscheck_lambda1 is not None
        assert res.crosscheck_gap <= 1e-3
        assert multicenter.POLLUTION_FLAG not in res.flags


def test_cross_check_agreement_two_center():
    mu = charges.atoms([(0, 0, 0), (2, 0, 0)], [0.25, 0.25])
    cfg = multicenter.GapSolveConfig(crosscheck=True)
    res = multicenter.solve_gap(basis_for(mu), mu, config=cfg)
    assert res.crosscheck_gap <= 1e-3


def test_cross_check_rejects_heavy_total():
    mu = charges.atoms([(0, 0, 0), (2, 0, 0)], [0.5, 0.5])
    with pytest.raises(ConfigError):
        multicenter.rkb_cross_check(basis_for(mu, n_s=6), mu)


def test_rkb_free_basis_has_empty_gap():
    mu = charges.atom((0, 0, 0), 0.5)
    basis = basis_for(mu, n_s=6)
    evs = multicenter.rkb_cross_check(basis, charges.ChargeDistribution())
    assert len(evs) == 0  # free operator: nothing inside (-1, 1)


def test_near_critical_atom_is_flagged():
    mu = charges.atom((0, 0, 0), 0.95)
    res = multicenter.solve_gap(basis_for(mu), mu)
    assert multicenter.ACCURACY_FLAG in res.flags
    # still a genuine solve, just on thinner numerical ice
    assert res.lambda1 == pytest.approx(math.sqrt(1 - 0.95 ** 2), abs=5e-2)


def test_no_root_when_bracket_excludes_eigenvalue():
    mu = charges.atom((0, 0, 0), 0.3)  # lambda1 ~ 0.954
    cfg = multicenter.GapSolveConfig(bracket_hi=0.5)
    with pytest.raises(NoGapEigenvalueError):
        multicenter.solve_gap(basis_for(mu, n_s=6), mu, config=cfg)


def test_below_gap_status_when_root_under_bracket():
    mu = charges.atom((0, 0, 0), 0.5)  # lambda1 ~ 0.866
    cfg = multicenter.GapSolveConfig(bracket_lo=0.99)
    res = multicenter.solve_gap(basis_for(mu, n_s=6), mu, config=cfg)
    assert res.below_gap and not res.converged
    assert res.coefficients is None


def test_layered_charge_is_rejected():
    mu = charges.shell(0.5, 1.0)
    basis = basis_for(charges.atom((0, 0, 0), 0.5), n_s=4)
    with pytest.raises(ConfigError):
        multicenter.solve_gap(basis, mu)


def test_config_validation():
    with pytest.raises(ConfigError):
        multicenter.GapSolveConfig(lam_tol=0.0)
    with pytest.raises(ConfigError):
        multicenter.GapSolveConfig(bracket_lo=0.9, bracket_hi=0.1)
    with pytest.raises(ConfigError):
        multicenter.GapSolveConfig(max_iterations=2)


def test_result_json_fields():
    mu = charges.atom((0, 0, 0), 0.5)
    out = multicenter.solve_gap(basis_for(mu, n_s=6), mu).to_json()
    assert set(out) == {"lambda1", "residual", "iterations", "below_gap",
                        "crosscheck_lambda1", "flags"}
    assert out["crosscheck_lambda1"] is None
    assert out["flags"] == []


def test_schrodinger_gaussian_point_and_unbound():
    mu = charges.atom((0, 0, 0), 1.0)
    basis = basis_for(mu)
    energy, bound = multicenter.schrodinger_ground_gaussian(basis, mu)
    assert bound
    assert energy == pytest.approx(oracles.hydrogenic_energy(1.0), abs=1e-4)
    # no charge at all: nothing to bind
    energy, bound = multicenter.schrodinger_ground_gaussian(
        basis, charges.ChargeDistribution())
    assert not bound and energy == 0.0


def test_schrodinger_gaussian_two_center_bound():
    mu = charges.atoms([(0, 0, 0), (2, 0, 0)], [0.5, 0.5])
    energy, bound = multicenter.schrodinger_ground_gaussian(basis_for(mu), mu)
    assert bound
    assert -0.5 <= energy < 0.0
