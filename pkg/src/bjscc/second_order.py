"""Second-order rate machinery: R(D), tilted information, dispersion conditions.

The rate-distortion function of a discrete source is solved by alternating
minimization at a fixed Lagrange multiplier, with an outer bisection over
the multiplier to meet the distortion constraint with equality; the
multiplier at the solution is lambda* = -R'(D) in bits per distortion unit.
The D-tilted information is evaluated in the standard tilted form

    j(w, D) = -log2 E_{Z ~ P_Z*}[2**(lambda* (D - d(w, Z)))]

whose mean over the source equals R(D).

The blocklength conditions come in two flavors: a scalar normal
approximation driven by Q^{-1}, and a grouped variant driven by the
quantile of the maximum coordinate of an equicorrelated Gaussian vector.
The unspecified constants of the underlying finite-blocklength statements
are exposed as parameters defaulting to zero (and exponent c = 1/2); with
the defaults the conditions are normal approximations, not certified
bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr
from scipy.stats import norm

from .probability import (
    DistortionMatrix,
    Kernel,
    Pmf,
    channel_dispersion,
    mutual_information,
)

_QUAD_RANGE = 10.0
_QUAD_EPS = 1e-13
_BISECT_TOL = 1e-12
_MULT_CAP = 2.0**24


class ConvergenceError(RuntimeError):
    """Iterative solver failed to reach its tolerance within the cap."""


@dataclass(frozen=True)
class RateDistortionSolution:
    rate: float                 # R(D) in bits
    p_z_given_w: Kernel
    p_z: Pmf
    lambda_star: float          # -R'(D), bits per distortion unit; +inf at D=0
    converged: bool
    gap: float                  # residual error estimate on ``rate`` (bits)
    distortion: float           # achieved average distortion


def _ba_fixed_multiplier(p_w, d, s, q0, max_iter, tol):
    """Alternating minimization at multiplier ``s``; returns (q, Q, rate, dist)."""
    q = q0
    prev_obj = np.inf
    for _ in range(max_iter):
        with np.errstate(under="ignore"):
            expo = q[None, :] * np.exp2(-s * d)
        c = expo.sum(axis=1)
        cond = expo / c[:, None]
        q_next = p_w @ cond
        obj = float(-(p_w * np.log2(c)).sum())
        if abs(prev_obj - obj) < tol and np.max(np.abs(q_next - q)) < 1e-13:
            q = q_next
            break
        prev_obj = obj
        q = q_next
    else:
        raise ConvergenceError("alternating minimization did not converge")
    with np.errstate(under="ignore"):
        expo = q[None, :] * np.exp2(-s * d)
    c = expo.sum(axis=1)
    cond = expo / c[:, None]
    dist = float((p_w[:, None] * cond * d).sum())
    # I(W;Z) at the fixed point equals the free energy minus s * distortion
    rate = float(-(p_w * np.log2(c)).sum()) - s * dist
    return q, cond, max(rate, 0.0), dist


def rate_distortion(p_w: Pmf, dmat: DistortionMatrix, D: float, tol: float = 1e-9,
                    max_iter: int = 10_000) -> RateDistortionSolution:
    """Rate-distortion function of a discrete source at distortion ``D``.

    Valid for D strictly between the per-symbol floor E[min_z d(W, z)] and
    the zero-rate point min_z E[d(W, z)].  D at or above the zero-rate point
    returns the R = 0 solution; D = 0 takes a fast path when every source
    symbol has a unique zero-distortion reconstruction (Hamming-like
    distortions), with lambda* = +inf.
    """
    d = dmat.d
    if d.shape[0] != len(p_w):
        raise ValueError("distortion rows must match the source alphabet")
    sup = p_w.support()
    d_floor = float(p_w.probs @ d.min(axis=1))
    zero_rate_point = float((p_w.probs @ d).min())

    if D >= zero_rate_point:
        z_star = int(np.argmin(p_w.probs @ d))
        nz = d.shape[1]
        q = np.zeros(nz)
        q[z_star] = 1.0
        cond = np.tile(q, (len(p_w), 1))
        return RateDistortionSolution(0.0, Kernel(cond), Pmf(q), 0.0, True, 0.0,
                                      float(p_w.probs @ d[:, z_star]))

    if D == 0.0:
        zero_sets = [np.flatnonzero(d[w] == 0) for w in sup]
        zmap = [zs[0] if zs.size == 1 else -1 for zs in zero_sets]
        injective = all(z >= 0 for z in zmap) and len(set(zmap)) == len(zmap)
        if not injective:
            raise ValueError("D = 0 supported only for injective zero-distortion maps")
        q = np.zeros(d.shape[1])
        cond = np.zeros((len(p_w), d.shape[1]))
        for w, z in zip(sup, zmap):
            q[z] = p_w.probs[w]
            cond[w, z] = 1.0
        cond[p_w.probs == 0] = q  # zero-mass rows: any valid row
        rate = float(-(p_w.probs[sup] * np.log2(p_w.probs[sup])).sum())
        return RateDistortionSolution(rate, Kernel(cond), Pmf(q), np.inf, True, 0.0, 0.0)

    if D <= d_floor:
        raise ValueError(f"D = {D} is at or below the finite-rate floor {d_floor}")

    nz = d.shape[1]
    q0 = np.full(nz, 1.0 / nz)
    inner_tol = min(tol * 1e-3, 1e-12)

    # bracket the multiplier: distortion is non-increasing in s
    s_lo, s_hi = 0.0, 1.0
    q_hi = q0
    while True:
        q_hi, _, rate_hi, dist_hi = _ba_fixed_multiplier(
            p_w.probs, d, s_hi, q_hi, max_iter, inner_tol)
        if dist_hi <= D:
            break
        s_lo = s_hi
        s_hi *= 2.0
        if s_hi > _MULT_CAP:
            raise ConvergenceError("multiplier bracket expansion failed")

    q = q_hi
    best = (s_hi, q_hi, rate_hi, dist_hi)
    for _ in range(200):
        if s_hi - s_lo < 1e-13 * max(1.0, s_hi) or abs(best[3] - D) < 1e-13:
            break
        s_mid = 0.5 * (s_lo + s_hi)
        q, cond, rate, dist = _ba_fixed_multiplier(p_w.probs, d, s_mid, q, max_iter, inner_tol)
        if dist <= D:
            s_hi = s_mid
            best = (s_mid, q, rate, dist)
        else:
            s_lo = s_mid

    s_star, q, rate, dist = best
    _, cond, rate, dist = _ba_fixed_multiplier(p_w.probs, d, s_star, q, max_iter, inner_tol)
    # move along the supporting line to the target distortion (exact on
    # affine stretches of R(D), second-order accurate elsewhere)
    rate_at_D = max(rate - s_star * (D - dist), 0.0)
    gap = abs(s_star * (D - dist)) * 1e-2 + inner_tol * 10
    return RateDistortionSolution(rate_at_D, Kernel(cond), Pmf(q), s_star, True, gap, dist)


def tilted_information(sol: RateDistortionSolution, p_w: Pmf, dmat: DistortionMatrix,
                       D: float) -> np.ndarray:
    """Per-symbol D-tilted information vector; E over the source gives R(D)."""
    d = dmat.d
    if math.isinf(sol.lambda_star):
        mass = (d <= D) @ sol.p_z.probs
        with np.errstate(divide="ignore"):
            return -np.log2(mass)
    with np.errstate(under="ignore"):
        inner = np.exp2(sol.lambda_star * (D - d)) @ sol.p_z.probs
    return -np.log2(inner)


@dataclass(frozen=True)
class SecondOrderQuantities:
    """Channel and source statistics entering the blocklength conditions."""

    C: float
    V: float
    V_tilde: float
    R_D: float
    calV_D: float
    jmath: np.ndarray

    @classmethod
    def from_instance(cls, p_x: Pmf, ch: Kernel, p_w: Pmf, dmat: DistortionMatrix,
                      D: float, tol: float = 1e-9):
        sol = rate_distortion(p_w, dmat, D, tol=tol)
        j = tilted_information(sol, p_w, dmat, D)
        mean_j = float(p_w.probs @ j)
        cal_v = float(p_w.probs @ (j - mean_j) ** 2)
        v, v_tilde = channel_dispersion(p_x, ch)
        return cls(mutual_information(p_x, ch), v, v_tilde, sol.rate, cal_v, j)


class ConditionResult(NamedTuple):
    slack: float
    satisfied: bool


def _adjusted_eps(eps: float, eta: float, n: int, m: int, exponent: float) -> float:
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    adj = eps if eta == 0.0 else eps - eta / min(n, m) ** exponent
    if not 0.0 < adj < 1.0:
        raise ValueError("adjusted eps falls outside (0, 1); lower eta or raise n, m")
    return adj


def _log_penalty(alpha: float, beta: float, n: int, m: int) -> float:
    pen = 0.5 * math.log2(n) + beta
    if alpha != 0.0:
        pen += alpha * math.log2(m)
    return pen


def disjoint_condition(q: SecondOrderQuantities, n: int, m: int, K: int, eps: float,
                       alpha: float = 0.0, beta: float = 0.0,
                       eta: float = 0.0) -> ConditionResult:
    """Blocklength condition for K disjoint sub-codebooks.

    slack = nC - mR(D) - [alpha log m + (1/2) log n + beta - log K
            + sqrt(nV + m calV(D)) Q^{-1}(eps_adj)].
    With the default constants this is the normal approximation; the
    diversity gain enters as a flat log K bits.
    """
    adj = _adjusted_eps(eps, eta, n, m, 0.5)
    rhs = _log_penalty(alpha, beta, n, m) - math.log2(K)
    rhs += math.sqrt(n * q.V + m * q.calV_D) * float(norm.isf(adj))
    slack = n * q.C - m * q.R_D - rhs
    return ConditionResult(slack, slack >= 0.0)


@dataclass(frozen=True)
class GaussianMaxSpec:
    """Equicorrelated Gaussian max: covariance (s1 * ones + s2 * I) / scale."""

    sigma1_sq: float
    sigma2_sq: float
    L: int
    scale: float

    def __post_init__(self):
        if self.sigma1_sq < 0 or self.sigma2_sq < 0:
            raise ValueError("variance components must be >= 0")
        if self.L < 1:
            raise ValueError("dimension L must be >= 1")
        if self.scale <= 0:
            raise ValueError("scale must be positive")


def gaussian_max_cdf(spec: GaussianMaxSpec, t: float) -> float:
    """cdf of max_k (a Z0 + b Z_k) with a, b from the shared/private split."""
    a = math.sqrt(spec.sigma1_sq / spec.scale)
    b = math.sqrt(spec.sigma2_sq / spec.scale)
    if a == 0.0 and b == 0.0:
        raise ValueError("degenerate spec: both variance components are zero")
    if b == 0.0:
        return float(ndtr(t / a))
    if a == 0.0:
        return float(ndtr(t / b)) ** spec.L

    L = spec.L

    def integrand(u):
        return norm.pdf(u) * ndtr((t - a * u) / b) ** L

    val, _ = quad(integrand, -_QUAD_RANGE, _QUAD_RANGE, epsabs=_QUAD_EPS,
                  epsrel=_QUAD_EPS, limit=200)
    return min(max(val, 0.0), 1.0)


def gaussian_max_quantile(spec: GaussianMaxSpec, p: float) -> float:
    """Inverse of :func:`gaussian_max_cdf`, bisected to ~1e-12 absolute."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    a = math.sqrt(spec.sigma1_sq / spec.scale)
    b = math.sqrt(spec.sigma2_sq / spec.scale)
    if a == 0.0 and b == 0.0:
        raise ValueError("degenerate spec: both variance components are zero")
    if b == 0.0:
        return a * float(norm.ppf(p))
    if a == 0.0:
        return b * float(norm.ppf(p ** (1.0 / spec.L)))
    span = (a + b) * 10.0
    lo, hi = -span, span
    while gaussian_max_cdf(spec, lo) >= p:
        lo *= 2.0
    while gaussian_max_cdf(spec, hi) <= p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gaussian_max_cdf(spec, mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < _BISECT_TOL:
            break
    return 0.5 * (lo + hi)


def hybrid_condition(q: SecondOrderQuantities, n: int, m: int, J: int, L: int,
                     eps: float, alpha: float = 0.0, beta: float = 0.0,
                     eta: float = 0.0, c: float = 0.5) -> ConditionResult:
    """Blocklength condition for J groups of L decoders.

    slack = nC - mR(D) - [alpha log m + (1/2) log n + beta - log J
            - sqrt(n + m) F^{-1}(eps_adj; Sigma)]
    with Sigma = (sigma1^2 ones + sigma2^2 I)/(n + m),
    sigma1^2 = n V_tilde + m calV(D), sigma2^2 = n (V - V_tilde).
    Reduces to :func:`disjoint_condition` at L = 1 (with J = K).
    """
    adj = _adjusted_eps(eps, eta, n, m, min(c, 0.5))
    spec = GaussianMaxSpec(
        sigma1_sq=n * q.V_tilde + m * q.calV_D,
        sigma2_sq=n * (q.V - q.V_tilde),
        L=L,
        scale=n + m,
    )
    rhs = _log_penalty(alpha, beta, n, m) - math.log2(J)
    rhs -= math.sqrt(n + m) * gaussian_max_quantile(spec, adj)
    slack = n * q.C - m * q.R_D - rhs
    return ConditionResult(slack, slack >= 0.0)
