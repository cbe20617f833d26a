"""Exact evaluation of the one-shot achievability bounds by finite enumeration.

Every evaluator returns the exact value of its defining expectation (up to
float rounding), never a Monte-Carlo estimate.  The baseline and hybrid
forms involve the best of L independent channel observations; these are
evaluated with an order-statistics device (cdf differences raised to the
L-th power) instead of an L-fold output enumeration, which keeps them exact
for group sizes up to 2**30.

Near-lossless transmission over the n-fold binary symmetric channel admits
closed forms in the Hamming-weight domain; those live in :func:`bsc_bound`
and accept real-valued codebook sizes M so that rate searches can bisect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .probability import (
    DimensionMismatchError,
    DistortionMatrix,
    InvalidDistributionError,
    Kernel,
    Pmf,
    bsc,
    distortion_ball_masses,
    hamming_distortion,
    information_density,
    iid_pmf,
    product_channel,
    uniform,
)

SCHEME_KINDS = ("disjoint", "baseline", "hybrid")


@dataclass(frozen=True)
class SchemeDescriptor:
    """Decoder grouping: J groups of L decoders sharing a sub-codebook each."""

    kind: str
    J: int
    L: int

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.J < 1 or self.L < 1:
            raise ValueError("group count and group size must be >= 1")
        if self.kind == "disjoint" and self.L != 1:
            raise ValueError("disjoint scheme requires group size 1")
        if self.kind == "baseline" and self.J != 1:
            raise ValueError("baseline scheme requires a single group")

    @property
    def K(self) -> int:
        return self.J * self.L


def disjoint_scheme(K: int) -> SchemeDescriptor:
    return SchemeDescriptor("disjoint", K, 1)


def baseline_scheme(K: int) -> SchemeDescriptor:
    return SchemeDescriptor("baseline", 1, K)


def hybrid_scheme(J: int, L: int) -> SchemeDescriptor:
    return SchemeDescriptor("hybrid", J, L)


@dataclass(frozen=True)
class JsccInstance:
    """Source, codebook distributions, channel, and fidelity requirement."""

    p_w: Pmf
    p_x: Pmf
    p_z: Pmf
    ch: Kernel
    dmat: DistortionMatrix
    D: float
    K: int

    def __post_init__(self):
        if self.ch.n_inputs != len(self.p_x):
            raise DimensionMismatchError("channel input alphabet must match p_x")
        if self.dmat.d.shape != (len(self.p_w), len(self.p_z)):
            raise DimensionMismatchError("distortion matrix must be |W| x |Z|")
        if self.K < 1:
            raise ValueError("decoder count K must be >= 1")
        if self.D < 0:
            raise ValueError("distortion limit D must be >= 0")

    def ball_masses(self) -> np.ndarray:
        return distortion_ball_masses(self.p_z, self.dmat, self.D)


@dataclass(frozen=True)
class WzInstance:
    """Side-information variant: test channel, decoder side info, reconstruction map."""

    p_w: Pmf
    p_u_given_w: Kernel
    p_t_given_w: Kernel
    phi: np.ndarray  # reconstruction index per (u, t)
    p_x: Pmf
    ch: Kernel
    dmat: DistortionMatrix
    D: float
    K: int

    def __post_init__(self):
        nw = len(self.p_w)
        if self.p_u_given_w.n_inputs != nw or self.p_t_given_w.n_inputs != nw:
            raise DimensionMismatchError("test channel and side-info kernels must have |W| rows")
        phi = np.array(self.phi, dtype=np.int64)
        nu, nt = self.p_u_given_w.n_outputs, self.p_t_given_w.n_outputs
        nz = self.dmat.d.shape[1]
        if phi.shape != (nu, nt):
            raise DimensionMismatchError("reconstruction map must be |U| x |T|")
        if phi.min() < 0 or phi.max() >= nz:
            raise DimensionMismatchError("reconstruction map values must index the Z alphabet")
        if self.dmat.d.shape[0] != nw:
            raise DimensionMismatchError("distortion matrix must be |W| x |Z|")
        if self.ch.n_inputs != len(self.p_x):
            raise DimensionMismatchError("channel input alphabet must match p_x")
        if self.K < 1:
            raise ValueError("decoder count K must be >= 1")
        if self.D < 0:
            raise ValueError("distortion limit D must be >= 0")
        phi.flags.writeable = False
        object.__setattr__(self, "phi", phi)

    def p_u(self) -> Pmf:
        return Pmf(self.p_w.probs @ self.p_u_given_w.rows)


def _density_gain(p_x: Pmf, ch: Kernel) -> tuple[np.ndarray, np.ndarray]:
    """(2**iota table, joint input-output mass)."""
    table = information_density(p_x, ch)
    gain = np.exp2(table.iota)
    joint = p_x.probs[:, None] * ch.rows
    return gain, joint


def disjoint_bound(inst: JsccInstance) -> float:
    """Ensemble error bound for K decoders on disjoint sub-codebooks.

    E[(1 + K * rho(W) * 2**iota(X;Y))**-1] with W independent of (X, Y).
    """
    gain, joint = _density_gain(inst.p_x, inst.ch)
    rho = inst.ball_masses()
    jpos = joint > 0
    g = gain[jpos]
    m = joint[jpos]
    total = 0.0
    for w in range(len(inst.p_w)):
        pw = inst.p_w.probs[w]
        if pw == 0:
            continue
        if rho[w] == 0:
            total += pw
        else:
            total += pw * float((m / (1.0 + (inst.K * rho[w]) * g)).sum())
    return total


def _best_of_l_bound(inst: JsccInstance, J: int, L: int) -> float:
    """E[(1 + J * rho(W) * max over L iid observations of 2**iota)**-1].

    For fixed input x the density takes at most |Y| values; the law of the
    max of L iid copies follows from cdf differences raised to the L-th
    power, avoiding the |Y|**L enumeration.
    """
    gain, _ = _density_gain(inst.p_x, inst.ch)
    rho = inst.ball_masses()
    nx = len(inst.p_x)
    per_x = np.zeros((nx, len(inst.p_w)))
    w_pos = inst.p_w.probs > 0
    for x in range(nx):
        if inst.p_x.probs[x] == 0:
            continue
        py = inst.ch.rows[x]
        order = np.argsort(gain[x], kind="stable")
        g_sorted = gain[x][order]
        cdf = np.cumsum(py[order])
        cdf[-1] = 1.0
        max_pmf = np.diff(cdf**L, prepend=0.0)
        for w in np.flatnonzero(w_pos):
            if rho[w] == 0:
                per_x[x, w] = 1.0
            else:
                per_x[x, w] = float((max_pmf / (1.0 + (J * rho[w]) * g_sorted)).sum())
    return float(inst.p_x.probs @ per_x @ inst.p_w.probs)


def baseline_bound(inst: JsccInstance) -> float:
    """Shared-codebook bound: best of K looks through the channel."""
    return _best_of_l_bound(inst, 1, inst.K)


def hybrid_bound(inst: JsccInstance, sd: SchemeDescriptor) -> float:
    """Grouped-codebook bound; recovers the disjoint form at L=1, baseline at J=1."""
    if sd.K != inst.K:
        raise ValueError(f"scheme covers {sd.K} decoders but instance has {inst.K}")
    return _best_of_l_bound(inst, sd.J, sd.L)


def lossless_bound(p_w: Pmf, p_x: Pmf, ch: Kernel, K: int) -> float:
    """Exact-recovery specialization: E[(1 + K * P_W(W) * 2**iota)**-1]."""
    if K < 1:
        raise ValueError("decoder count K must be >= 1")
    gain, joint = _density_gain(p_x, ch)
    jpos = joint > 0
    g = gain[jpos]
    m = joint[jpos]
    total = 0.0
    for w in p_w.support():
        pw = p_w.probs[w]
        total += pw * float((m / (1.0 + (K * pw) * g)).sum())
    return total


def slepian_wolf_bound(p_w: Pmf, p_t_given_w: Kernel, p_x: Pmf, ch: Kernel, K: int) -> float:
    """Side-information exact recovery: source weighed by the posterior P_{W|T}."""
    if K < 1:
        raise ValueError("decoder count K must be >= 1")
    if p_t_given_w.n_inputs != len(p_w):
        raise DimensionMismatchError("side-info kernel must have |W| rows")
    gain, joint = _density_gain(p_x, ch)
    jpos = joint > 0
    g = gain[jpos]
    m = joint[jpos]
    joint_wt = p_w.probs[:, None] * p_t_given_w.rows
    p_t = joint_wt.sum(axis=0)
    total = 0.0
    for w, t in zip(*np.nonzero(joint_wt)):
        post = joint_wt[w, t] / p_t[t]
        total += joint_wt[w, t] * float((m / (1.0 + (K * post) * g)).sum())
    return total


def side_info_bound(inst: WzInstance) -> float:
    """Wyner-Ziv-style bound with K decoders on disjoint sub-codebooks.

    E[(1 + K * 1{d(W, phi(U,T)) <= D} * 2**S)**-1] where
    S = iota(X;Y) + iota(U;T) - iota(U;W).  On positive-mass cells
    2**(iota(U;T) - iota(U;W)) reduces to P_{U|T}(u|t) / P_{U|W}(u|w).
    """
    gain, joint_xy = _density_gain(inst.p_x, inst.ch)
    jpos = joint_xy > 0
    g = gain[jpos]
    m = joint_xy[jpos]

    pw = inst.p_w.probs
    ugw = inst.p_u_given_w.rows
    tgw = inst.p_t_given_w.rows
    joint_ut = (pw[:, None, None] * ugw[:, :, None] * tgw[:, None, :]).sum(axis=0)
    p_t = joint_ut.sum(axis=0)

    ok = inst.dmat.d[:, inst.phi] <= inst.D  # [w, u, t]
    total = 0.0
    for w in inst.p_w.support():
        mass_ut = pw[w] * ugw[w][:, None] * tgw[w][None, :]
        for u, t in zip(*np.nonzero(mass_ut)):
            mass = mass_ut[u, t]
            if not ok[w, u, t]:
                total += mass  # indicator zero: the summand is (1 + 0)**-1 = 1
                continue
            ratio = (joint_ut[u, t] / p_t[t]) / ugw[w, u]
            total += mass * float((m / (1.0 + (inst.K * ratio) * g)).sum())
    return total


def min_binomial_pmf(N: int, n: int, delta: float) -> np.ndarray:
    """pmf over t = 0..n of the minimum of N iid Binomial(n, delta) variables."""
    if N < 1 or n < 1:
        raise ValueError("N and n must be >= 1")
    if not 0.0 <= delta <= 1.0:
        raise InvalidDistributionError("delta must lie in [0, 1]")
    t = np.arange(n + 1)
    with np.errstate(divide="ignore"):
        log_sf = binom.logsf(t - 1, n, delta)  # log P[X >= t]
    log_sf[0] = 0.0
    log_sf_next = np.append(log_sf[1:], -np.inf)
    pmf = np.exp(N * log_sf) - np.exp(N * log_sf_next)
    return np.maximum(pmf, 0.0)


def bsc_bound(sd: SchemeDescriptor, n: int, delta: float, M: float) -> float:
    """Near-lossless error bound over the n-fold BSC, uniform source of size M.

    The sum runs over the Hamming weight t of the noise; group size L enters
    through the min-binomial weighting, group count J through the codebook
    diversity factor.  M may be any real >= 1 (M = 2**(n R)); the bound is
    strictly increasing in M and strictly decreasing in J for 0 < delta < 1.
    """
    if n < 1:
        raise ValueError("blocklength n must be >= 1")
    if M < 1.0:
        raise ValueError("codebook size M must be >= 1")
    if not 0.0 <= delta <= 1.0:
        raise InvalidDistributionError("delta must lie in [0, 1]")
    t = np.arange(n + 1, dtype=np.float64)
    weights = min_binomial_pmf(sd.L, n, delta)
    # log2 of delta**t * (1-delta)**(n-t); endpoints handled so 0*log(0) -> 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(t == 0, 0.0, t * np.log2(delta))
        hi = np.where(t == n, 0.0, (n - t) * np.log2(1.0 - delta))
    log2_noise = lo + hi
    factor = np.exp2(math.log2(sd.J) - math.log2(M) + n + log2_noise)
    return math.fsum(weights / (1.0 + factor))


def near_lossless_bsc_instance(M: int, n: int, delta: float, K: int) -> JsccInstance:
    """Uniform M-ary source over the n-fold BSC with exact recovery required.

    The codebook distribution over channel inputs is uniform on all 2**n
    words, which makes the generic bound evaluators agree exactly with the
    weight-domain forms in :func:`bsc_bound`.
    """
    if not 1 <= M <= 2**n:
        raise ValueError("source size M must lie in [1, 2**n]")
    return JsccInstance(
        p_w=uniform(M),
        p_x=iid_pmf(uniform(2), n),
        p_z=uniform(M),
        ch=product_channel(bsc(delta), n),
        dmat=hamming_distortion(M),
        D=0.0,
        K=K,
    )
