"""Achievable-rate search over the binary symmetric channel.

For a fixed scheme the closed-form error bound is strictly increasing in
the codebook size M, so the largest M meeting a target error eps is found
by bisection on log2 M; the rate is log2(M) / n.  The hybrid group count J
is optimized by scanning the divisors of K (the construction needs
K = J * L exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bounds import SchemeDescriptor, bsc_bound, hybrid_scheme

_LOG2M_TOL = 1e-9
_LOG2M_CAP = 400.0


@dataclass(frozen=True)
class RatePoint:
    """Largest achievable rate of one scheme at one sweep point."""

    scheme: str
    n: int
    delta: float
    eps: float
    K: int
    J: int
    rate: float
    M: float
    bound_at_rate: float
    feasible: bool


def max_rate(sd: SchemeDescriptor, n: int, delta: float, eps: float) -> RatePoint:
    """Largest real M >= 1 with bound(M) <= eps, by bisection on log2 M.

    Returns rate 0 with ``feasible=False`` when even M = 1 misses the
    target.  The located M carries a bracket certificate:
    bound(M) <= eps < bound(M * 2**1e-9).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")

    def bound(log2m: float) -> float:
        return bsc_bound(sd, n, delta, 2.0**log2m)

    if bound(0.0) > eps:
        return RatePoint(sd.kind, n, delta, eps, sd.K, sd.J, 0.0, 1.0, bound(0.0), False)
    lo, hi = 0.0, 1.0
    while bound(hi) <= eps:
        lo = hi
        hi *= 2.0
        if hi > _LOG2M_CAP:  # pragma: no cover - bound tends to 1 as M grows
            raise RuntimeError("failed to bracket the feasibility boundary")
    while hi - lo > _LOG2M_TOL:
        mid = 0.5 * (lo + hi)
        if bound(mid) <= eps:
            lo = mid
        else:
            hi = mid
    return RatePoint(sd.kind, n, delta, eps, sd.K, sd.J, lo / n, 2.0**lo, bound(lo), True)


def _divisors(K: int) -> list[int]:
    out = set()
    i = 1
    while i * i <= K:
        if K % i == 0:
            out.add(i)
            out.add(K // i)
        i += 1
    return sorted(out)


def max_rate_hybrid_opt(n: int, delta: float, eps: float, K: int) -> RatePoint:
    """Best hybrid rate over all divisor group counts J of K; ties go to smaller J."""
    best = None
    for J in _divisors(K):
        point = max_rate(hybrid_scheme(J, K // J), n, delta, eps)
        if best is None or point.rate > best.rate:
            best = point
    return best


def rate_curve(n_list, delta: float, eps: float, K_list,
               schemes=("disjoint", "baseline", "hybrid")) -> list[RatePoint]:
    """Full sweep over schemes x blocklengths x decoder counts.

    Hybrid entries optimize the group count; disjoint and baseline run at
    their fixed descriptors.  Output order: scheme, then n, then K.
    """
    from .bounds import baseline_scheme, disjoint_scheme

    makers = {
        "disjoint": lambda n, K: max_rate(disjoint_scheme(K), n, delta, eps),
        "baseline": lambda n, K: max_rate(baseline_scheme(K), n, delta, eps),
        "hybrid": lambda n, K: max_rate_hybrid_opt(n, delta, eps, K),
    }
    unknown = [s for s in schemes if s not in makers]
    if unknown:
        raise ValueError(f"unknown schemes: {unknown}")
    points = []
    for scheme in schemes:
        for n in n_list:
            for K in K_list:
                points.append(makers[scheme](n, K))
    return points


def baseline_limit_rate(n: int, delta: float, eps: float) -> float:
    """Rate implied by the large-K limit (1 + M**-1 (2(1-delta))**n)**-1 = eps."""
    m_lim = (2.0 * (1.0 - delta)) ** n * eps / (1.0 - eps)
    if m_lim < 1.0:
        return 0.0
    return math.log2(m_lim) / n
