"""Root solve for gap equations h(lam) = mu_min(lam) - lam.

mu_min is nonincreasing in lam, so h is strictly decreasing and has at
most one root.  Monotonicity buys two accelerations on top of plain
bisection, both unconditionally safe:

* clamping: after evaluating mu at lam, the root lies in [lam, mu] when
  h(lam) > 0 and in [mu, lam] when h(lam) < 0, so mu itself tightens the
  bracket (a fixed-point step fused into bisection);
* secant proposals from the last two samples, accepted anywhere strictly
  inside the bracket; two consecutive same-side landings force a midpoint
  step so the worst case stays bisection-like.

Every main-loop iteration is guaranteed to at least halve the bracket: a
secant step that fails to do so is followed by one midpoint evaluation,
which (with clamping) always does.  The post-iteration widths are recorded
so callers can assert the contraction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

OK = "ok"
BELOW_GAP = "below-gap"
NO_ROOT = "no-root"


@dataclass
class GapRootSolve:
    """Outcome of one monotone root solve."""

    status: str
    lam: float
    residual: float
    iterations: int
    trace: list[tuple[float, float]] = field(default_factory=list)
    bracket: tuple[float, float] = (0.0, 0.0)
    h_lo: float = 0.0
    h_hi: float = 0.0
    converged: bool = False
    widths: list[float] = field(default_factory=list)


def solve_monotone_gap(mu_of_lambda: Callable[[float], float],
                       lo: float, hi: float, *,
                       lam_tol: float, residual_tol: float,
                       max_iter: int) -> GapRootSolve:
    cache: dict[float, float] = {}
    trace: list[tuple[float, float]] = []

    def h(lam: float) -> float:
        if lam not in cache:
            cache[lam] = mu_of_lambda(lam) - lam
            trace.append((lam, cache[lam]))
        return cache[lam]

    h_lo = h(lo)
    if h_lo < 0.0:
        return GapRootSolve(BELOW_GAP, lo, abs(h_lo), len(trace), trace,
                            (lo, hi), h_lo, float("nan"), False)
    h_hi = h(hi)
    if h_hi > 0.0:
        return GapRootSolve(NO_ROOT, hi, abs(h_hi), len(trace), trace,
                            (lo, hi), h_lo, h_hi, False)

    a = max(lo, h_hi + hi)
    b = min(hi, h_lo + lo)
    prev, last = (lo, h_lo), (hi, h_hi)
    guard = 1e-3 * lam_tol
    same_side = 0
    widths: list[float] = [b - a]

    def secant() -> float | None:
        (l1, h1), (l2, h2) = prev, last
        if h2 == h1:
            return None
        cand = l2 - h2 * (l2 - l1) / (h2 - h1)
        if a + guard < cand < b - guard and cand not in cache:
            return cand
        return None

    def step(cand: float) -> float:
        nonlocal a, b, prev, last, same_side
        hv = h(cand)
        mu = hv + cand
        if hv > 0.0:
            a, b = cand, min(b, mu)
        elif hv < 0.0:
            a, b = max(a, mu), cand
        else:
            a = b = cand
        same_side = same_side + 1 if (hv > 0.0) == (last[1] > 0.0) else 0
        prev, last = last, (cand, hv)
        return hv

    while b - a > lam_tol and len(trace) < max_iter:
        width = b - a
        cand = secant() if same_side < 2 else None
        if cand is None:
            same_side = 0
            cand = 0.5 * (a + b)
            if cand in cache:
                cand = a + 0.37 * (b - a)
                if cand in cache or not a < cand < b:
                    break
        if step(cand) == 0.0:
            widths.append(b - a)
            break
        if b - a > 0.5 * width and b - a > lam_tol and len(trace) < max_iter:
            same_side = 0
            step(0.5 * (a + b))
        widths.append(b - a)

    best = min(trace, key=lambda s: abs(s[1]))
    polish = 0
    while abs(best[1]) > residual_tol and polish < 8 and len(trace) < max_iter:
        cand = secant()
        if cand is None:
            cand = 0.5 * (a + b)
            if cand in cache:
                break
        hv = step(cand)
        if abs(hv) < abs(best[1]):
            best = (cand, hv)
        polish += 1

    ok = (b - a) <= lam_tol and abs(best[1]) <= residual_tol
    return GapRootSolve(OK, best[0], abs(best[1]), len(trace), trace,
                        (a, b), h_lo, h_hi, ok, widths)
