"""Monte-Carlo simulation of the marked-Poisson-process coding schemes.

The codebook shared by the encoder and the K decoders is a marked Poisson
point process over codeword cells; every selection score used by the
schemes has the form ``arrival_time * r(cell)``, so for each (cell, label)
only the earliest arrival can ever win a race.  Two independent backends
realize the process:

``cell_table``
    The exact sufficient statistic: one first-arrival time per
    (cell, label), drawn as Exp(intensity(cell) / J).  Canonical backend,
    exact and finite.

``stream``
    A literal sequential realization: unit-rate arrival gaps, cells drawn
    from the normalized intensity, labels uniform.  Selection scans points
    in arrival order and stops once no future point can improve the best
    score (``tau >= best / r_min``).  Kept as an independent oracle for the
    cell-table construction.

Trials are addressed by a counter-based generator (:mod:`bjscc.rng`), so
results are bit-identical for any worker count and chunk layout, and any
trial can be replayed in isolation.  Exact score ties (probability zero,
expected never) are counted and reported.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng
from .bounds import JsccInstance, SchemeDescriptor, WzInstance
from .kernels import capped_cdf, kernel
from .probability import DimensionMismatchError, Kernel, Pmf

CHUNK_TRIALS = 4096
STREAM_BLOCK_START = 192
STREAM_BLOCK_MAX = 1 << 21

_INF = np.inf


@dataclass(frozen=True)
class TrialBatchResult:
    """Outcome counts of a simulation batch plus the binomial error bars."""

    trials: int
    errors: int
    per_decoder_errors: np.ndarray
    ties: int
    p_hat: float
    stderr: float

    @classmethod
    def from_counts(cls, trials, errors, per_decoder, ties):
        p = errors / trials
        se = math.sqrt(p * (1.0 - p) / trials)
        arr = np.asarray(per_decoder, dtype=np.int64)
        arr.flags.writeable = False
        return cls(trials, int(errors), arr, int(ties), p, se)


@dataclass(frozen=True)
class ListMatchingResult:
    """Per-symbol mismatch counts against the closed-form guarantee."""

    trials: int
    selected: np.ndarray     # times each symbol was the encoder's choice
    mismatches: np.ndarray   # of those, trials no decoder recovered it
    bound: np.ndarray        # closed-form mismatch bound per symbol
    ties: int

    def mismatch_rate(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.mismatches / self.selected

    def stderr(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            r = self.mismatches / self.selected
            return np.sqrt(r * (1.0 - r) / self.selected)


@dataclass(frozen=True)
class CondListMatchingResult:
    """Aggregate mismatch rate paired with the per-trial bound estimate."""

    trials: int
    mismatch_count: int
    bound_sum: float
    diff_sum: float      # sum of (mismatch indicator - per-trial bound)
    diff_sq_sum: float
    ties: int

    @property
    def mismatch_rate(self) -> float:
        return self.mismatch_count / self.trials

    @property
    def bound_mean(self) -> float:
        return self.bound_sum / self.trials

    def paired_stderr(self) -> float:
        mean = self.diff_sum / self.trials
        var = max(self.diff_sq_sum / self.trials - mean * mean, 0.0)
        return math.sqrt(var / self.trials)


def two_sample_z(p1: float, n1: int, p2: float, n2: int) -> float:
    """Two-proportion z statistic (pooled variance)."""
    pooled = (p1 * n1 + p2 * n2) / (n1 + n2)
    denom = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    if denom == 0.0:
        return 0.0
    return (p1 - p2) / denom


def _chunks(trials: int):
    for start in range(0, trials, CHUNK_TRIALS):
        yield start, min(CHUNK_TRIALS, trials - start)


def _map_chunks(fn, trials: int, workers: int) -> list:
    """Run fn(start, count) per chunk; results returned in chunk order."""
    jobs = list(_chunks(trials))
    if workers <= 1 or len(jobs) <= 1:
        return [fn(s, c) for s, c in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, s, c) for s, c in jobs]
        return [f.result() for f in futures]


def _searchable_cdf(probs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return cdf


def _safe_inverse(p: np.ndarray) -> np.ndarray:
    """1/p with zeros mapped to +inf (sentinel for inadmissible cells)."""
    with np.errstate(divide="ignore"):
        return np.where(p > 0, 1.0 / p, _INF)


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num/den with den == 0 mapped to +inf regardless of num."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(den > 0, out, _INF)


@dataclass(frozen=True)
class _SchemeTables:
    """Immutable per-instance constants shared by every chunk and backend."""

    cdf_w: np.ndarray
    rho_zero: np.ndarray
    admissible: np.ndarray
    cell_x: np.ndarray
    cell_z: np.ndarray
    intensity: np.ndarray
    ch_cdf: np.ndarray
    inv_p: np.ndarray
    ok: np.ndarray


def _scheme_tables(inst: JsccInstance) -> _SchemeTables:
    nx, nz = len(inst.p_x), len(inst.p_z)
    cell_x = np.repeat(np.arange(nx, dtype=np.int64), nz)
    cell_z = np.tile(np.arange(nz, dtype=np.int64), nx)
    intensity = inst.p_x.probs[cell_x] * inst.p_z.probs[cell_z]
    ok = np.ascontiguousarray(inst.dmat.ball(inst.D))
    admissible = np.ascontiguousarray(ok[:, cell_z] & (intensity > 0)[None, :])
    return _SchemeTables(
        cdf_w=_searchable_cdf(inst.p_w.probs),
        rho_zero=np.ascontiguousarray(inst.ball_masses() == 0),
        admissible=admissible,
        cell_x=cell_x,
        cell_z=cell_z,
        intensity=intensity,
        ch_cdf=capped_cdf(inst.ch.rows),
        inv_p=np.ascontiguousarray(_safe_inverse(inst.ch.rows.T)),
        ok=ok,
    )


def simulate_scheme(inst: JsccInstance, sd: SchemeDescriptor, trials: int = 100_000,
                    seed: int = 0, backend: str = "cell_table", workers: int = 1) -> TrialBatchResult:
    """Simulate the grouped-codebook scheme and report ensemble error counts.

    ``backend`` chooses between the exact arrival-table realization
    (``"cell_table"``) and the sequential-stream oracle (``"stream"``); both
    sample the same encoding/decoding rules and agree in distribution.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if sd.K != inst.K:
        raise ValueError(f"scheme covers {sd.K} decoders but instance has {inst.K}")
    if backend == "cell_table":
        return _simulate_scheme_cells(inst, sd, trials, seed, workers)
    if backend == "stream":
        return _simulate_scheme_stream(inst, sd, trials, seed, workers)
    raise ValueError(f"unknown backend {backend!r}")


def _simulate_scheme_cells(inst, sd, trials, seed, workers):
    tb = _scheme_tables(inst)
    J, L, K = sd.J, sd.L, sd.K
    nc = tb.cell_x.size
    inv_rate = np.repeat(_safe_inverse(tb.intensity / J), J)
    fn = kernel("scheme_cell")

    def run(start, count):
        u = rng.uniform_block(seed, start, count, 0, 1 + nc * J + K)
        w_idx = np.searchsorted(tb.cdf_w, u[:, 0])
        tau = -np.log(u[:, 1:1 + nc * J]) * inv_rate[None, :]
        u_y = np.ascontiguousarray(u[:, 1 + nc * J:])
        return fn(w_idx, np.ascontiguousarray(tau), u_y, tb.admissible, tb.cell_x,
                  tb.cell_z, tb.ch_cdf, tb.inv_p, tb.ok, tb.rho_zero, J, L, K)

    parts = _map_chunks(run, trials, workers)
    errors = sum(p[0] for p in parts)
    per_dec = sum(p[1] for p in parts)
    ties = sum(p[2] for p in parts)
    return TrialBatchResult.from_counts(trials, errors, per_dec, ties)


def encoder_pair_counts(inst: JsccInstance, sd: SchemeDescriptor, trials: int,
                        seed: int, backend: str = "cell_table") -> np.ndarray:
    """Empirical (source, selected codeword) counts for distribution checks."""
    tb = _scheme_tables(inst)
    J, L, K = sd.J, sd.L, sd.K
    nc = tb.cell_x.size
    if backend == "stream":
        _, counts = _stream_driver(inst, sd, trials, seed, tb)
        return counts
    inv_rate = np.repeat(_safe_inverse(tb.intensity / J), J)
    fn = kernel("scheme_cell")
    total = np.zeros_like(tb.ok, dtype=np.int64)
    for start, count in _chunks(trials):
        u = rng.uniform_block(seed, start, count, 0, 1 + nc * J + K)
        w_idx = np.searchsorted(tb.cdf_w, u[:, 0])
        tau = -np.log(u[:, 1:1 + nc * J]) * inv_rate[None, :]
        u_y = np.ascontiguousarray(u[:, 1 + nc * J:])
        out = fn(w_idx, np.ascontiguousarray(tau), u_y, tb.admissible, tb.cell_x,
                 tb.cell_z, tb.ch_cdf, tb.inv_p, tb.ok, tb.rho_zero, J, L, K)
        total += out[3]
    return total


def _stream_preconditions(inst: JsccInstance) -> np.ndarray:
    reachable = inst.p_x.probs > 0
    if np.any(inst.ch.rows[reachable] == 0):
        raise ValueError(
            "stream backend requires strictly positive channel probabilities "
            "over reachable inputs (the stopping rule needs a positive score floor)"
        )
    return inst.ch.rows[reachable].max(axis=0)


def _stream_driver(inst, sd, trials, seed, tb):
    """Run the stream backend, growing the point block for unfinished trials."""
    pmax = _stream_preconditions(inst)
    J, L, K = sd.J, sd.L, sd.K
    cdf_cells = _searchable_cdf(tb.intensity)
    fn = kernel("scheme_stream")
    errors = 0
    ties = 0
    per_dec = np.zeros(K, dtype=np.int64)
    counts = np.zeros_like(tb.ok, dtype=np.int64)

    def prepare(trial_vec, n_pts):
        u = rng.uniform_for_trials(seed, trial_vec, 0, 1 + K + 3 * n_pts)
        w_idx = np.searchsorted(tb.cdf_w, u[:, 0])
        u_y = np.ascontiguousarray(u[:, 1:1 + K])
        pts = u[:, 1 + K:].reshape(len(trial_vec), n_pts, 3)
        tau = np.ascontiguousarray(np.cumsum(-np.log(pts[:, :, 0]), axis=1))
        cells = np.ascontiguousarray(np.searchsorted(cdf_cells, pts[:, :, 1]))
        labs = np.ascontiguousarray((pts[:, :, 2] * J).astype(np.int64))
        return w_idx, u_y, tau, cells, labs

    for start, count in _chunks(trials):
        pending = np.arange(start, start + count, dtype=np.uint64)
        n_pts = STREAM_BLOCK_START
        while pending.size:
            if n_pts > STREAM_BLOCK_MAX:
                raise RuntimeError("stream stopping rule not reached within the point budget")
            # keep the working set bounded as the point block doubles
            max_batch = max(1, (1 << 22) // (3 * n_pts))
            still = []
            for i in range(0, pending.size, max_batch):
                sub = pending[i:i + max_batch]
                w_idx, u_y, tau, cells, labs = prepare(sub, n_pts)
                out = fn(w_idx, u_y, tau, cells, labs, tb.admissible, tb.cell_x,
                         tb.cell_z, tb.ch_cdf, tb.inv_p, pmax, tb.ok, tb.rho_zero, J, L, K)
                errors += out[0]
                per_dec += out[1]
                ties += out[2]
                counts += out[3]
                if out[4].any():
                    still.append(sub[out[4]])
            pending = np.concatenate(still) if still else np.empty(0, dtype=np.uint64)
            n_pts *= 2
    return TrialBatchResult.from_counts(trials, errors, per_dec, ties), counts


def _simulate_scheme_stream(inst, sd, trials, seed, workers):
    # chunks already bound the working-set size; thread at the chunk level
    tb = _scheme_tables(inst)
    result, _ = _stream_driver(inst, sd, trials, seed, tb)
    return result


def simulate_side_info_scheme(inst: WzInstance, trials: int = 100_000, seed: int = 0,
                              workers: int = 1) -> TrialBatchResult:
    """Simulate the side-information scheme with K disjoint sub-codebooks."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    K = inst.K
    p_u = inst.p_u()
    nx, nu = len(inst.p_x), len(p_u)
    cell_x = np.repeat(np.arange(nx, dtype=np.int64), nu)
    cell_u = np.tile(np.arange(nu, dtype=np.int64), nx)
    intensity = inst.p_x.probs[cell_x] * p_u.probs[cell_u]
    nc = cell_x.size

    enc_weight = np.ascontiguousarray(
        _safe_ratio(p_u.probs[None, :], inst.p_u_given_w.rows))
    joint_ut = np.einsum("w,wu,wt->ut", inst.p_w.probs, inst.p_u_given_w.rows,
                         inst.p_t_given_w.rows)
    p_t = joint_ut.sum(axis=0)
    u_given_t = _safe_ratio(joint_ut.T, p_t[:, None])  # rows t; zero-mass t -> inf
    side_fac = np.ascontiguousarray(_safe_ratio(p_u.probs[None, :], u_given_t))

    tables = dict(
        cdf_w=_searchable_cdf(inst.p_w.probs),
        tgw_cdf=capped_cdf(inst.p_t_given_w.rows),
        ch_cdf=capped_cdf(inst.ch.rows),
        inv_p=np.ascontiguousarray(_safe_inverse(inst.ch.rows.T)),
        ok=np.ascontiguousarray(inst.dmat.ball(inst.D)),
    )
    inv_rate = np.repeat(_safe_inverse(intensity / K), K)
    fn = kernel("wz_cell")

    def run(start, count):
        u = rng.uniform_block(seed, start, count, 0, 1 + nc * K + 2 * K)
        w_idx = np.searchsorted(tables["cdf_w"], u[:, 0])
        tau = -np.log(u[:, 1:1 + nc * K]) * inv_rate[None, :]
        u_t = np.ascontiguousarray(u[:, 1 + nc * K:1 + nc * K + K])
        u_y = np.ascontiguousarray(u[:, 1 + nc * K + K:])
        return fn(w_idx, np.ascontiguousarray(tau), u_t, u_y, enc_weight, cell_x,
                  cell_u, tables["tgw_cdf"], tables["ch_cdf"], tables["inv_p"],
                  side_fac, inst.phi, tables["ok"], K)

    parts = _map_chunks(run, trials, workers)
    errors = sum(p[0] for p in parts)
    per_dec = sum(p[1] for p in parts)
    ties = sum(p[2] for p in parts)
    return TrialBatchResult.from_counts(trials, errors, per_dec, ties)


def side_info_pair_counts(inst: WzInstance, trials: int, seed: int) -> np.ndarray:
    """Empirical (source, selected auxiliary codeword) counts."""
    K = inst.K
    p_u = inst.p_u()
    nx, nu = len(inst.p_x), len(p_u)
    cell_x = np.repeat(np.arange(nx, dtype=np.int64), nu)
    cell_u = np.tile(np.arange(nu, dtype=np.int64), nx)
    intensity = inst.p_x.probs[cell_x] * p_u.probs[cell_u]
    nc = cell_x.size
    enc_weight = np.ascontiguousarray(
        _safe_ratio(p_u.probs[None, :], inst.p_u_given_w.rows))
    joint_ut = np.einsum("w,wu,wt->ut", inst.p_w.probs, inst.p_u_given_w.rows,
                         inst.p_t_given_w.rows)
    u_given_t = _safe_ratio(joint_ut.T, joint_ut.sum(axis=0)[:, None])
    side_fac = np.ascontiguousarray(_safe_ratio(p_u.probs[None, :], u_given_t))
    cdf_w = _searchable_cdf(inst.p_w.probs)
    tgw_cdf = capped_cdf(inst.p_t_given_w.rows)
    ch_cdf = capped_cdf(inst.ch.rows)
    inv_p = np.ascontiguousarray(_safe_inverse(inst.ch.rows.T))
    ok = np.ascontiguousarray(inst.dmat.ball(inst.D))
    inv_rate = np.repeat(_safe_inverse(intensity / K), K)
    fn = kernel("wz_cell")
    total = np.zeros((len(inst.p_w), nu), dtype=np.int64)
    for start, count in _chunks(trials):
        u = rng.uniform_block(seed, start, count, 0, 1 + nc * K + 2 * K)
        w_idx = np.searchsorted(cdf_w, u[:, 0])
        tau = -np.log(u[:, 1:1 + nc * K]) * inv_rate[None, :]
        u_t = np.ascontiguousarray(u[:, 1 + nc * K:1 + nc * K + K])
        u_y = np.ascontiguousarray(u[:, 1 + nc * K + K:])
        out = fn(w_idx, np.ascontiguousarray(tau), u_t, u_y, enc_weight, cell_x,
                 cell_u, tgw_cdf, ch_cdf, inv_p, side_fac, inst.phi, ok, K)
        total += out[3]
    return total


def list_matching_bound(p: Pmf, q: Pmf, K: int) -> np.ndarray:
    """Closed-form per-symbol mismatch bound 1 - (1 + p/(K q))**-1."""
    r = _safe_ratio(p.probs, K * q.probs)
    return 1.0 - 1.0 / (1.0 + r)


def simulate_list_matching(p: Pmf, q: Pmf, K: int, trials: int = 100_000,
                           seed: int = 0, workers: int = 1) -> ListMatchingResult:
    """Race K labeled sub-processes: encoder scores with p, decoders with q.

    Returns per-symbol selection and mismatch counts together with the
    closed-form mismatch bound they are expected to respect.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if len(p) != len(q):
        raise DimensionMismatchError("p and q must share one alphabet")
    if K < 1:
        raise ValueError("label count K must be >= 1")
    nu = len(p)
    inv_p = _safe_inverse(p.probs)
    inv_q = _safe_inverse(q.probs)
    fn = kernel("list")

    def run(start, count):
        u = rng.uniform_block(seed, start, count, 0, nu * K)
        tau = np.ascontiguousarray(-np.log(u) * float(K))
        return fn(tau, inv_p, inv_q, K)

    parts = _map_chunks(run, trials, workers)
    selected = sum(p_[0] for p_ in parts)
    mismatches = sum(p_[1] for p_ in parts)
    ties = sum(p_[2] for p_ in parts)
    return ListMatchingResult(trials, selected, mismatches,
                              list_matching_bound(p, q, K), ties)


def simulate_conditional_list_matching(p_x: Pmf, p_u_given_x: Kernel,
                                       p_y_given_xu: np.ndarray, q_u_given_y: Kernel,
                                       J: int, L: int, trials: int = 100_000,
                                       seed: int = 0, workers: int = 1) -> CondListMatchingResult:
    """Grouped race with conditioning: encoder sees X, decoder k sees Y_k.

    ``p_y_given_xu[x, u]`` is the observation distribution given the input
    and the encoder's selected symbol.  The per-trial bound
    1 - sum_j (J + min over the group of p(U|X)/q(U|Y_k))**-1 is evaluated
    on the same trials so the comparison is paired.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if J < 1 or L < 1:
        raise ValueError("group count and size must be >= 1")
    K = J * L
    nx = len(p_x)
    nu = p_u_given_x.n_outputs
    obs = np.asarray(p_y_given_xu, dtype=np.float64)
    if p_u_given_x.n_inputs != nx:
        raise DimensionMismatchError("p_u_given_x must have |X| rows")
    if obs.ndim != 3 or obs.shape[:2] != (nx, nu):
        raise DimensionMismatchError("p_y_given_xu must be |X| x |U| x |Y|")
    ny = obs.shape[2]
    if q_u_given_y.n_inputs != ny or q_u_given_y.n_outputs != nu:
        raise DimensionMismatchError("q_u_given_y must be |Y| x |U|")
    if np.any(obs < 0) or not np.allclose(obs.sum(axis=2), 1.0, atol=1e-9):
        raise DimensionMismatchError("p_y_given_xu rows must be distributions")

    inv_pux = np.ascontiguousarray(_safe_inverse(p_u_given_x.rows))
    py_cdf = np.ascontiguousarray(capped_cdf(obs))
    inv_q = np.ascontiguousarray(_safe_inverse(q_u_given_y.rows))
    ratio = np.ascontiguousarray(
        _safe_ratio(p_u_given_x.rows[:, None, :], q_u_given_y.rows[None, :, :]))
    cdf_x = _searchable_cdf(p_x.probs)
    fn = kernel("cond_list")

    def run(start, count):
        u = rng.uniform_block(seed, start, count, 0, 1 + nu * J + K)
        x_idx = np.searchsorted(cdf_x, u[:, 0])
        tau = np.ascontiguousarray(-np.log(u[:, 1:1 + nu * J]) * float(J))
        u_y = np.ascontiguousarray(u[:, 1 + nu * J:])
        mismatch, rhs, ties = fn(x_idx, tau, u_y, inv_pux, py_cdf, inv_q, ratio, J, L, K)
        diff = mismatch.astype(np.float64) - rhs
        return (int(mismatch.sum()), float(np.sum(rhs)), float(np.sum(diff)),
                float(np.sum(diff * diff)), int(ties))

    parts = _map_chunks(run, trials, workers)
    return CondListMatchingResult(
        trials=trials,
        mismatch_count=sum(p_[0] for p_ in parts),
        bound_sum=math.fsum(p_[1] for p_ in parts),
        diff_sum=math.fsum(p_[2] for p_ in parts),
        diff_sq_sum=math.fsum(p_[3] for p_ in parts),
        ties=sum(p_[4] for p_ in parts),
    )


# ---------------------------------------------------------------------------
# sequential stream reference (public, test-scale)
# ---------------------------------------------------------------------------


class StreamCodebook:
    """Lazy sequential realization of the marked codebook process.

    Point i carries a cumulative arrival time (unit-rate exponential gaps),
    a cell drawn from the normalized intensity, and a label uniform on
    {0..J-1}.  The same (seed, trial) always yields the same sequence.
    """

    def __init__(self, intensity, J: int, seed: int, trial: int = 0):
        weights = np.asarray(intensity, dtype=np.float64)
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("intensity must be non-negative with positive mass")
        if J < 1:
            raise ValueError("label count J must be >= 1")
        self.intensity = weights / weights.sum()
        self.J = J
        self.seed = int(seed)
        self.trial = int(trial)
        self._cdf = _searchable_cdf(self.intensity)
        self._tau = np.empty(0)
        self._cells = np.empty(0, dtype=np.int64)
        self._labels = np.empty(0, dtype=np.int64)

    def _ensure(self, n: int):
        have = self._tau.size
        if n <= have:
            return
        grow = max(n - have, 64)
        u = rng.uniform_block(self.seed, self.trial, 1, 3 * have, 3 * grow)[0]
        pts = u.reshape(grow, 3)
        base = self._tau[-1] if have else 0.0
        tau = base + np.cumsum(-np.log(pts[:, 0]))
        self._tau = np.concatenate([self._tau, tau])
        self._cells = np.concatenate([self._cells, np.searchsorted(self._cdf, pts[:, 1])])
        self._labels = np.concatenate([self._labels, (pts[:, 2] * self.J).astype(np.int64)])

    def point(self, i: int) -> tuple[float, int, int]:
        self._ensure(i + 1)
        return float(self._tau[i]), int(self._cells[i]), int(self._labels[i])


@dataclass(frozen=True)
class StreamSelection:
    index: int
    cell: int
    label: int
    tau: float
    score: float
    scanned: int


def stream_select(codebook: StreamCodebook, r, label: int | None = None) -> StreamSelection:
    """Exact argmin of ``tau * r[cell]`` over the infinite stream.

    ``r`` gives the per-cell score weight; +inf marks inadmissible cells.
    Scanning stops once the arrival time alone rules out any improvement
    (``tau >= best_score / r_min``).
    """
    r = np.asarray(r, dtype=np.float64)
    finite = np.isfinite(r) & (codebook.intensity > 0)
    if not finite.any():
        raise ValueError("no admissible cell")
    r_min = float(r[finite].min())
    if r_min <= 0:
        raise ValueError("score weights must be strictly positive on admissible cells")
    best = _INF
    sel = None
    i = 0
    while True:
        tau, cell, lab = codebook.point(i)
        if tau >= best / r_min:
            break
        if (label is None or lab == label) and np.isfinite(r[cell]):
            score = tau * r[cell]
            if score < best:
                best = score
                sel = StreamSelection(i, cell, lab, tau, score, 0)
        i += 1
    if sel is None:  # pragma: no cover - unreachable: admissible cells recur a.s.
        raise RuntimeError("stream terminated without an admissible point")
    return StreamSelection(sel.index, sel.cell, sel.label, sel.tau, sel.score, i)
