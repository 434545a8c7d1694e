"""Radial gap solver: kappa-channel reduction of the Dirac problem.

For a radially symmetric charge, eliminating the lower spinor component
turns the gap eigenvalue problem in channel kappa into a root solve: the
quadratic form

    Q(lam, g) = int (g' + kappa*g/r)^2 / (1 + lam + v) dr
              + int (1 - v - lam) g^2 dr,        v = potential >= 0,

is strictly decreasing in lam, and the lowest gap eigenvalue is the root
of h(lam) = mu_min(B(lam)) - lam, where B(lam) is the matrix of the
lam-frozen part of Q on a log-uniform grid and mu_min its smallest
eigenvalue against the radial mass matrix.

Near the origin the eigenfunction behaves like r^gamma with
gamma = sqrt(kappa^2 - nu_pt^2), which a truncated grid cannot represent
when the point strength nu_pt is large.  The first degree of freedom is
therefore extended onto (0, r_min] by the matched profile (r/r_min)^gamma;
the singular part of its kinetic-plus-potential integral has the closed
form (kappa + gamma)/nu_pt, and the remainder is handled by fixed-order
quadrature.  A plain Dirichlet cut at r_min would leave an O(r_min^{2*gamma})
truncation error, fatal for strong charges.

The radial Schroedinger ground state is computed by Numerov shooting with
node-count bisection; on the log grid this sidesteps the severe stiffness
that breaks matrix eigensolvers at tight tolerances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from . import _rootfind
from .charges import ChargeDistribution, radial_profile
from .errors import BelowGapError, ConfigError, NoGapEigenvalueError

_LEG_X, _LEG_W = np.polynomial.legendre.leggauss(32)
_POLISH_SEED = 1234


@dataclass
class RadialGrid:
    """Log-uniform radial grid on [r_min, r_max] with trapezoid weights."""

    r_min: float = 1e-6
    r_max: float = 100.0
    n: int = 4000
    t: np.ndarray = field(init=False, repr=False, compare=False)
    r: np.ndarray = field(init=False, repr=False, compare=False)
    w: np.ndarray = field(init=False, repr=False, compare=False)
    h: float = field(init=False, compare=False, default=0.0)

    def __post_init__(self):
        if not (0.0 < self.r_min < self.r_max):
            raise ConfigError(f"need 0 < r_min < r_max, got [{self.r_min}, {self.r_max}]")
        if self.n < 16:
            raise ConfigError(f"radial grid needs n >= 16, got {self.n}")
        self.t = np.linspace(math.log(self.r_min), math.log(self.r_max), self.n)
        self.h = float(self.t[1] - self.t[0])
        self.r = np.exp(self.t)
        self.w = np.full(self.n, self.h)
        self.w[0] *= 0.5
        self.w[-1] *= 0.5


def derivative_matrix(n: int, h: float) -> sp.csr_matrix:
    """d/dt on a uniform grid: 4th order inside, one-sided at the ends."""
    D = sp.lil_matrix((n, n))
    D[0, 0:3] = np.array([-1.5, 2.0, -0.5]) / h
    skew = np.array([-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0]) / h
    D[1, 0:5] = skew
    interior = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
    for k in range(2, n - 2):
        D[k, k - 2:k + 3] = interior
    D[n - 2, n - 5:n] = -skew[::-1]
    D[n - 1, n - 3:n] = np.array([0.5, -2.0, 1.5]) / h
    return D.tocsr()


def radial_potential(mu: ChargeDistribution, r):
    """Potential of a radially symmetric mu at radius r (scalar or array)."""
    arr = radial_profile(mu, np.asarray(r, dtype=float))
    return float(arr) if np.isscalar(r) else arr


def _gauss_on(eps: float):
    return 0.5 * eps * (_LEG_X + 1.0), 0.5 * eps * _LEG_W


def _check_channel(kappa) -> int:
    if int(kappa) != kappa or kappa == 0:
        raise ConfigError(f"kappa must be a nonzero integer, got {kappa!r}")
    return int(kappa)


class _ChannelProblem:
    """Grid matrices of the eliminated form for one (mu, kappa, grid)."""

    def __init__(self, mu: ChargeDistribution, kappa: int, grid: RadialGrid):
        kappa = _check_channel(kappa)
        if not mu.radially_symmetric:
            raise ConfigError("radial solver needs a radially symmetric charge")
        nu_pt = mu.origin_point_strength
        if nu_pt > abs(kappa):
            raise BelowGapError(
                f"origin point strength {nu_pt} exceeds |kappa|={abs(kappa)}; "
                "the channel has no gap eigenvalue")
        self.kappa = kappa
        self.grid = grid
        self.vpot = radial_profile(mu, grid.r)
        self.mass = grid.w * grid.r
        D = derivative_matrix(grid.n, grid.h)
        A = (D + kappa * sp.identity(grid.n, format="csr")).tocsr()
        self.A = A[:, :-1].tocsr()  # Dirichlet at r_max
        self.eps = grid.r_min
        self.nu_pt = nu_pt
        self.gamma = math.sqrt(kappa * kappa - nu_pt * nu_pt)
        smooth = ChargeDistribution(
            layers=tuple(l for l in mu.layers if l.kind != "point"))
        rq, wq = _gauss_on(self.eps)
        self._rq = rq
        self._wq = wq
        self._vq = radial_profile(smooth, rq) if smooth.layers else np.zeros_like(rq)
        self._sq = (rq / self.eps) ** (2.0 * self.gamma)

    def stub_terms(self, lam: float) -> tuple[float, float]:
        """Mass and B-matrix contribution of the origin-matched profile."""
        gam, kap, nu = self.gamma, self.kappa, self.nu_pt
        rq, wq, sq, vq = self._rq, self._wq, self._sq, self._vq
        m_stub = self.eps / (2.0 * gam + 1.0)
        a = 1.0 + lam + vq
        if nu == 0.0:
            kin = (gam + kap) ** 2 * np.sum(wq * sq / (rq ** 2 * a))
        else:
            # kinetic minus point-potential part; the 1/r singularities cancel
            kin = (gam + kap) / nu - (gam + kap) ** 2 * np.sum(
                wq * sq * a / (nu * (nu + a * rq)))
        b_stub = kin + m_stub - float(np.sum(wq * sq * vq))
        return m_stub, b_stub

    def pencil(self, lam: float) -> tuple[sp.csr_matrix, np.ndarray]:
        g = self.grid
        c = g.w / (g.r * (1.0 + lam + self.vpot))
        K = (self.A.T @ sp.diags(c) @ self.A).tocsr()
        m_stub, b_stub = self.stub_terms(lam)
        bdiag = self.mass[:-1] * (1.0 - self.vpot[:-1])
        bdiag = bdiag.copy()
        bdiag[0] += b_stub
        mdiag = self.mass[:-1].copy()
        mdiag[0] += m_stub
        return (K + sp.diags(bdiag)).tocsr(), mdiag

    def mu_min(self, lam: float, polish: int = 2) -> float:
        B, mdiag = self.pencil(lam)
        s = 1.0 / np.sqrt(mdiag)
        Bt = (sp.diags(s) @ B @ sp.diags(s)).tocsr()
        bw = 4
        m = Bt.shape[0]
        ab = np.zeros((bw + 1, m))
        for k in range(bw + 1):
            ab[bw - k, k:] = Bt.diagonal(k)
        mu = float(sla.eigvals_banded(ab, lower=False, select="i",
                                      select_range=(0, 0))[0])
        # Rayleigh polish: the banded solve on the strongly graded matrix
        # carries norm-scaled roundoff; inverse iteration on the pencil
        # restores full accuracy.
        v = np.random.default_rng(_POLISH_SEED).standard_normal(m)
        M = sp.diags(mdiag).tocsc()
        for _ in range(polish):
            try:
                lu = spla.splu((B - mu * M).tocsc())
            except RuntimeError:
                break
            y = lu.solve(mdiag * v)
            nrm = math.sqrt(abs(y @ (mdiag * y)))
            if not math.isfinite(nrm) or nrm == 0.0:
                break
            v = y / nrm
            cand = (v @ (B @ v)) / (v @ (mdiag * v))
            if math.isfinite(cand):
                mu = float(cand)
        return mu


def q_form_radial(lam: float, g, kappa: int, mu: ChargeDistribution,
                  grid: RadialGrid) -> float:
    """The eliminated quadratic form at fixed lam for a grid trial g."""
    if lam <= -1.0:
        raise ValueError(f"q_form_radial needs lam > -1, got {lam}")
    kappa = _check_channel(kappa)
    g = np.asarray(g, dtype=float)
    if g.shape != (grid.n,):
        raise ValueError(f"trial must have {grid.n} nodal values")
    if not np.any(g):
        raise ValueError("trial is identically zero")
    vpot = radial_profile(mu, grid.r)
    D = derivative_matrix(grid.n, grid.h)
    a = D @ g + kappa * g
    kinetic = float(np.sum(grid.w * a * a / (grid.r * (1.0 + lam + vpot))))
    rest = float(np.sum(grid.w * grid.r * (1.0 - vpot - lam) * g * g))
    return kinetic + rest


def lambda_of_trial(g, kappa: int, mu: ChargeDistribution, grid: RadialGrid,
                    tol: float = 1e-12) -> float:
    """Unique root in lam of Q(lam, g) = 0 for a fixed trial g.

    The tolerance applies to |Q| with g normalized to unit mass norm.
    """
    g = np.asarray(g, dtype=float)
    nrm = math.sqrt(float(np.sum(grid.w * grid.r * g * g)))
    if nrm == 0.0:
        raise ValueError("trial is identically zero")
    g = g / nrm
    delta = 1e-9
    lo = -1.0 + delta

    def f(lam: float) -> float:
        return q_form_radial(lam, g, kappa, mu, grid)

    f_lo = f(lo)
    if f_lo <= 0.0:
        raise BelowGapError(
            f"Q({lo}, g) = {f_lo} <= 0: trial dives below the gap")
    hi = 1.0
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > 1e8:
            raise NoGapEigenvalueError("Q stays positive out to lam = 1e8")
    lam = brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16)
    q = f(lam)
    lam2, q2 = lam * (1.0 + 1e-9) + 1e-12, None
    for _ in range(5):
        if abs(q) <= tol:
            break
        q2 = f(lam2)
        if q2 == q:
            break
        lam, lam2, q, q2 = lam2 - q2 * (lam2 - lam) / (q2 - q), lam, q2, q
    return lam


@dataclass(frozen=True)
class RadialSolveConfig:
    lam_tol: float = 1e-10
    residual_tol: float = 1e-12
    bracket_lo: float = -1.0 + 1e-9
    bracket_hi: float = 1.0
    max_iterations: int = 60
    polish_steps: int = 2

    def __post_init__(self):
        if not (-1.0 < self.bracket_lo < self.bracket_hi <= 1.0):
            raise ConfigError("radial bracket must satisfy -1 < lo < hi <= 1")
        if self.lam_tol <= 0.0 or self.residual_tol <= 0.0:
            raise ConfigError("tolerances must be positive")


@dataclass
class RadialGapResult:
    lambda1: float
    residual: float
    iterations: int
    below_gap: bool
    kappa: int
    converged: bool
    bracket: tuple[float, float]
    trace: list[tuple[float, float]]

    def to_json(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "residual": self.residual,
            "iterations": self.iterations,
            "below_gap": self.below_gap,
            "kappa": self.kappa,
        }


def lowest_gap_eigenvalue_radial(mu: ChargeDistribution, kappa: int = -1,
                                 grid: RadialGrid | None = None,
                                 config: RadialSolveConfig | None = None
                                 ) -> RadialGapResult:
    """Lowest gap eigenvalue of the kappa channel for radially symmetric mu."""
    grid = grid or RadialGrid()
    config = config or RadialSolveConfig()
    prob = _ChannelProblem(mu, kappa, grid)
    rs = _rootfind.solve_monotone_gap(
        lambda lam: prob.mu_min(lam, polish=config.polish_steps),
        config.bracket_lo, config.bracket_hi,
        lam_tol=config.lam_tol, residual_tol=config.residual_tol,
        max_iter=config.max_iterations)
    if rs.status == _rootfind.NO_ROOT:
        raise NoGapEigenvalueError(
            f"no gap eigenvalue in channel kappa={prob.kappa}: "
            f"h({config.bracket_hi}) = {rs.h_hi} > 0")
    below = rs.status == _rootfind.BELOW_GAP
    return RadialGapResult(
        lambda1=rs.lam, residual=rs.residual, iterations=rs.iterations,
        below_gap=below, kappa=prob.kappa,
        converged=rs.converged and not below,
        bracket=rs.bracket, trace=rs.trace)


def channel_sweep(mu: ChargeDistribution, grid: RadialGrid | None = None,
                  config: RadialSolveConfig | None = None,
                  kappa_max: int = 3) -> dict[int, RadialGapResult]:
    """Solve every channel 1 <= |kappa| <= kappa_max that has a gap state."""
    out: dict[int, RadialGapResult] = {}
    for k in range(-kappa_max, kappa_max + 1):
        if k == 0:
            continue
        try:
            out[k] = lowest_gap_eigenvalue_radial(mu, k, grid, config)
        except (NoGapEigenvalueError, BelowGapError):
            continue
    if not out:
        raise NoGapEigenvalueError(f"no channel |kappa| <= {kappa_max} binds")
    return out


def min_over_channels(results: dict[int, RadialGapResult]) -> RadialGapResult:
    return min(results.values(), key=lambda res: res.lambda1)


@dataclass
class SchrodingerResult:
    energy: float
    bound: bool
    iterations: int


def _numerov_nodes(energy: float, r: np.ndarray, h: float, vpot: np.ndarray,
                   nu_pt: float) -> int:
    """Count interior nodes of the outward l=0 solution at this energy."""
    g = 0.25 - 2.0 * r * r * (energy + vpot)
    f = 1.0 - (h * h / 12.0) * g
    w_prev = math.sqrt(r[0]) * (1.0 - nu_pt * r[0])
    w_cur = math.sqrt(r[1]) * (1.0 - nu_pt * r[1])
    nodes = 0
    for k in range(1, len(r) - 1):
        w_next = ((12.0 - 10.0 * f[k]) * w_cur - f[k - 1] * w_prev) / f[k + 1]
        if w_next * w_cur < 0.0:
            nodes += 1
        if abs(w_next) > 1e250:
            w_next *= 1e-250
            w_cur *= 1e-250
        w_prev, w_cur = w_cur, w_next
    return nodes


def schrodinger_ground_radial(mu: ChargeDistribution,
                              grid: RadialGrid | None = None
                              ) -> SchrodingerResult:
    """Ground state of -Laplace/2 - potential in the l=0 radial channel.

    Numerov shooting in log radius with node-count bisection; states
    shallower than 1e-12 are reported as unbound.
    """
    grid = grid or RadialGrid()
    if not mu.radially_symmetric:
        raise ConfigError("Schroedinger radial solver needs radial symmetry")
    vpot = radial_profile(mu, grid.r) if (mu.points or mu.layers) \
        else np.zeros_like(grid.r)
    nu_pt = mu.origin_point_strength
    nu = mu.total_charge

    def nodes(e: float) -> int:
        return _numerov_nodes(e, grid.r, grid.h, vpot, nu_pt)

    e_hi = -1e-12
    if nodes(e_hi) == 0:
        return SchrodingerResult(energy=0.0, bound=False, iterations=1)
    e_lo = -0.5 * nu * nu - 1e-3 * (1.0 + nu * nu)
    for _ in range(8):
        if nodes(e_lo) == 0:
            break
        e_lo *= 2.0
    else:
        raise NoGapEigenvalueError("could not bracket the ground state from below")
    iters = 0
    while e_hi - e_lo > 1e-14 * max(1.0, abs(e_lo)) and iters < 200:
        mid = 0.5 * (e_lo + e_hi)
        if nodes(mid) == 0:
            e_lo = mid
        else:
            e_hi = mid
        iters += 1
    return SchrodingerResult(energy=0.5 * (e_lo + e_hi), bound=True,
                             iterations=iters)
