"""Lowest gap eigenvalue for multi-center atomic charges in 3D.

Eliminating the lower 2-spinor of the Dirac eigenproblem at trial energy
lam turns the gap eigenvalue into the unique root of

    h(lam) = mu_min(W(lam) + S + M_V, S) - lam,

where W(lam) is the gradient Gram weighted by 1/(1 + lam + v), v >= 0 is
the magnitude of the attractive potential, S the spinor overlap and M_V
the (negative) potential matrix.  mu_min is nonincreasing in lam, so h is
strictly decreasing and the clamped bisection of _rootfind converges
unconditionally.  This path cannot produce spurious eigenvalues from
below; a kinetically balanced 4-spinor discretization of the same
operator is available as a diagnostic cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import _rootfind
from .charges import ChargeDistribution, potential_grid
from .errors import (ConfigError, IllConditionedBasisError,
                     NoGapEigenvalueError)
from .gaussian import (GridEvaluation, QuadratureGrid, SpinorBasis,
                       grid_for_basis, spinor_matrix)

NEAR_CRITICAL_STRENGTH = 0.9
ACCURACY_FLAG = "accuracy-unverified"
POLLUTION_FLAG = "pollution-warning"


def generalized_hermitian_eigen(a: np.ndarray, m: np.ndarray):
    """Ascending eigenpairs of a v = eta m v, vectors m-orthonormal.

    Each vector's largest-magnitude component is rotated onto the positive
    real axis, which pins the output down to machine determinism outside
    of exact degeneracies.
    """
    try:
        evals, vecs = sla.eigh(a, m)
    except sla.LinAlgError as exc:
        raise IllConditionedBasisError(
            f"generalized eigensolve failed: {exc}") from exc
    for k in range(vecs.shape[1]):
        piv = vecs[np.argmax(np.abs(vecs[:, k])), k]
        mag = abs(piv)
        if mag > 0.0:
            vecs[:, k] = vecs[:, k] * (np.conj(piv) / mag)
    return evals, vecs


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    piv = vec[np.argmax(np.abs(vec))]
    mag = abs(piv)
    return vec if mag == 0.0 else vec * (np.conj(piv) / mag)


@dataclass(frozen=True)
class StaticMatrices:
    """Spinor-level Hermitian blocks that do not depend on the trial energy.

    s: overlap; m_v: potential (negative semidefinite); m1: mass term,
    identical to the overlap; t: Gram matrix of the sigma.grad images.
    """

    s: np.ndarray
    m_v: np.ndarray
    m1: np.ndarray
    t: np.ndarray


def build_static(basis: SpinorBasis, mu: ChargeDistribution) -> StaticMatrices:
    s = basis.overlap()
    return StaticMatrices(s=s, m_v=basis.potential(mu), m1=s,
                          t=basis.grad_gram())


@dataclass(frozen=True)
class GapSolveConfig:
    lam_tol: float = 1e-8
    residual_tol: float = 1e-8
    max_iterations: int = 60
    bracket_lo: float = -1.0 + 1e-6
    bracket_hi: float = 1.0 - 1e-12
    n_radial: int = 96
    angular_order: int = 29
    crosscheck: bool = False
    crosscheck_tol: float = 1e-3

    def __post_init__(self):
        if self.lam_tol <= 0.0 or self.residual_tol <= 0.0:
            raise ConfigError("tolerances must be positive")
        if not -1.0 < self.bracket_lo < self.bracket_hi < 1.0:
            raise ConfigError("bracket must satisfy -1 < lo < hi < 1")
        if self.max_iterations < 4:
            raise ConfigError("iteration budget too small")
        if self.crosscheck_tol <= 0.0:
            raise ConfigError("crosscheck tolerance must be positive")


@dataclass
class GapResult:
    """Root-solve outcome: eigenvalue, eigenvector, and diagnostics."""

    lambda1: float
    coefficients: np.ndarray | None
    residual: float
    iterations: int
    below_gap: bool
    converged: bool
    bracket: tuple[float, float]
    h_lo: float
    h_hi: float
    trace: tuple[tuple[float, float], ...]
    widths: tuple[float, ...]
    crosscheck_lambda1: float | None = None
    crosscheck_gap: float | None = None
    flags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "residual": self.residual,
            "iterations": self.iterations,
            "below_gap": self.below_gap,
            "crosscheck_lambda1": self.crosscheck_lambda1,
            "flags": list(self.flags),
        }


def _require_atomic(mu: ChargeDistribution, what: str) -> None:
    if mu.layers:
        raise ConfigError(
            f"{what} needs an atomic charge; atomize layered charges first")


def assemble_W(lam: float, basis: SpinorBasis, mu: ChargeDistribution,
               grid: QuadratureGrid,
               evaluation: GridEvaluation | None = None) -> np.ndarray:
    """Weighted spinor-gradient Gram W(lam), Hermitian N x N.

    Entries are int (sigma.grad chi_i)^dag (1+lam+v)^-1 (sigma.grad chi_j)
    by grid quadrature.  The denominator is >= 1+lam > 0 everywhere, so W
    is positive definite and decreases (semidefinite order) as lam grows.
    """
    if lam <= -1.0:
        raise ValueError("trial energy must exceed -1")
    if evaluation is None:
        evaluation = GridEvaluation(basis, grid)
    vpot = potential_grid(mu, grid.points)
    c = grid.weights / (1.0 + lam + vpot)
    dot, cross = evaluation.weighted_grad_blocks(c)
    return spinor_matrix(dot, cross)


class _GapEngine:
    """Cached static matrices and grid tables for repeated mu_min evals."""

    def __init__(self, basis: SpinorBasis, mu: ChargeDistribution,
                 grid: QuadratureGrid):
        _require_atomic(mu, "3D gap solve")
        if not mu.points:
            raise ConfigError("3D gap solve needs at least one atom")
        self.basis = basis
        self.mu = mu
        self.grid = grid
        self.evaluation = GridEvaluation(basis, grid)
        self.vpot = potential_grid(mu, grid.points)
        sc = basis.scalar
        self.bstat = sc.overlap_matrix() + sc.potential_matrix(mu)
        self.x = basis.orthogonalizer

    def _projected_pencil(self, lam: float) -> np.ndarray:
        if lam <= -1.0:
            raise ValueError("trial energy must exceed -1")
        c = self.grid.weights / (1.0 + lam + self.vpot)
        dot, cross = self.evaluation.weighted_grad_blocks(c)
        x = self.x
        bdot = x.T @ (dot + self.bstat) @ x
        bcross = [x.T @ m @ x for m in cross]
        return spinor_matrix(bdot, bcross)

    def mu_min(self, lam: float) -> float:
        evals = np.linalg.eigvalsh(self._projected_pencil(lam))
        return float(evals[0])

    def eigenvector(self, lam: float) -> np.ndarray:
        _, vecs = np.linalg.eigh(self._projected_pencil(lam))
        return self.basis.expand_scalar_spinor(_fix_phase(vecs[:, 0]))


def solve_gap(basis: SpinorBasis, mu: ChargeDistribution,
              grid: QuadratureGrid | None = None,
              config: GapSolveConfig | None = None) -> GapResult:
    """Find the lowest gap eigenvalue; see the module docstring.

    Atoms with strength above 0.9 are allowed but the result carries an
    accuracy-unverified flag (basis saturation is not guaranteed there).
    Raises NoGapEigenvalueError when no eigenvalue has entered the gap and
    returns a below-gap flagged result when the root has left it downward.
    """
    config = config if config is not None else GapSolveConfig()
    if grid is None:
        grid = grid_for_basis(basis, config.n_radial, config.angular_order)
    engine = _GapEngine(basis, mu, grid)
    root = _rootfind.solve_monotone_gap(
        engine.mu_min, config.bracket_lo, config.bracket_hi,
        lam_tol=config.lam_tol, residual_tol=config.residual_tol,
        max_iter=config.max_iterations)

    flags = []
    if any(p.strength > NEAR_CRITICAL_STRENGTH for p in mu.points):
        flags.append(ACCURACY_FLAG)

    if root.status == _rootfind.NO_ROOT:
        raise NoGapEigenvalueError(
            "no eigenvalue has entered the gap for this charge and basis")
    if root.status == _rootfind.BELOW_GAP:
        return GapResult(
            lambda1=config.bracket_lo, coefficients=None,
            residual=root.residual, iterations=root.iterations,
            below_gap=True, converged=False, bracket=root.bracket,
            h_lo=root.h_lo, h_hi=root.h_hi, trace=tuple(root.trace),
            widths=tuple(root.widths), flags=tuple(flags))

    result = GapResult(
        lambda1=root.lam, coefficients=engine.eigenvector(root.lam),
        residual=root.residual, iterations=root.iterations,
        below_gap=False, converged=root.converged, bracket=root.bracket,
        h_lo=root.h_lo, h_hi=root.h_hi, trace=tuple(root.trace),
        widths=tuple(root.widths), flags=tuple(flags))

    if config.crosscheck:
        gap_evs = rkb_cross_check(basis, mu, grid)
        if len(gap_evs):
            result.crosscheck_lambda1 = float(gap_evs[0])
            result.crosscheck_gap = abs(result.crosscheck_lambda1
                                        - result.lambda1)
            if result.crosscheck_gap > 10.0 * config.crosscheck_tol:
                flags.append(POLLUTION_FLAG)
        else:
            flags.append(POLLUTION_FLAG)
        result.flags = tuple(flags)
    return result


def schrodinger_ground_gaussian(basis: SpinorBasis, mu: ChargeDistribution
                                ) -> tuple[float, bool]:
    """Nonrelativistic ground energy -Delta/2 - v in the scalar basis.

    Reuses the analytic gradient and attraction integrals; no grid is
    involved.  Returns (energy, bound); an unbound charge (no negative
    eigenvalue) reports energy 0.0.
    """
    _require_atomic(mu, "Gaussian nonrelativistic solve")
    sc = basis.scalar
    h = 0.5 * sc.grad_dot_matrix() + sc.potential_matrix(mu)
    x = basis.orthogonalizer
    evals = np.linalg.eigvalsh(x.T @ h @ x)
    e0 = float(evals[0])
    if e0 >= -1e-12:
        return 0.0, False
    return e0, True


def rkb_cross_check(basis: SpinorBasis, mu: ChargeDistribution,
                    grid: QuadratureGrid | None = None) -> np.ndarray:
    """Gap eigenvalues of the kinetically balanced 4-spinor discretization.

    Large components span the spinor basis, small components the sigma.grad
    images of the same functions; the blocks are then

        [[S + M_V,  T       ],        metric  [[S, 0],
         [T,        P - T   ]]                 [0, T]]

    with P the small-side potential matrix by quadrature.  Returns the
    eigenvalues strictly inside (-1, 1), ascending.  Diagnostic only: this
    discretization can in principle suffer spectral pollution, so it is
    restricted to total charge <= 0.9 where the risk is low.
    """
    _require_atomic(mu, "4-spinor cross-check")
    if mu.total_charge > 0.9 + 1e-12:
        raise ConfigError("4-spinor cross-check restricted to total "
                          "charge <= 0.9")
    if grid is None:
        grid = grid_for_basis(basis)
    sc = basis.scalar
    sdot = sc.overlap_matrix()
    mvdot = sc.potential_matrix(mu)
    tdot = sc.grad_dot_matrix()
    vpot = potential_grid(mu, grid.points)
    evaluation = GridEvaluation(basis, grid)
    pdot, pcross = evaluation.weighted_grad_blocks(-grid.weights * vpot)

    x = basis.orthogonalizer
    tev, tvec = np.linalg.eigh(tdot)
    keep = tev > tev[-1] / basis.cond_cap
    if not np.any(keep):
        raise IllConditionedBasisError("small-component metric collapsed")
    y = tvec[:, keep] / np.sqrt(tev[keep])[None, :]

    ll = spinor_matrix(x.T @ (sdot + mvdot) @ x)
    ls = spinor_matrix(x.T @ tdot @ y)
    ss = spinor_matrix(y.T @ (pdot - tdot) @ y,
                       [y.T @ m @ y for m in pcross])
    top = np.hstack([ll, ls])
    bot = np.hstack([ls.conj().T, ss])
    evals = np.linalg.eigvalsh(np.vstack([top, bot]))
    return evals[(evals > -1.0) & (evals < 1.0)]
