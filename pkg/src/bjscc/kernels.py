"""Hot Monte-Carlo trial kernels: numba-compiled loops with a numpy fallback.

Each kernel exists twice, as an ``@njit`` per-trial loop and as a vectorized
numpy implementation.  The active variant is chosen by :func:`set_backend`
(default from the ``BJSCC_NUMBA`` environment variable; any value other than
``"0"`` enables numba when it is importable).  ``benchmarks/bench_kernels.py``
compares the two.

Both variants of a kernel are bit-identical by construction:

* all randomness is pregenerated by the host (counter-based, vectorized)
  and passed in as arrays; kernels perform only multiplications, divisions,
  comparisons and table lookups, which round identically everywhere;
* float accumulations that depend on summation order are returned per trial
  and reduced by the host through a single code path.

Selection rule shared by every kernel: the candidate minimizing the score
wins; exact score ties go to the smaller arrival time, then the smaller
flat index.  Each selection event with two or more minimizing candidates
increments a tie counter (ties have probability zero in exact arithmetic,
so the counters are expected to stay at zero).

Inverse-cdf sampling expects cdf rows whose final entry is +inf so that
index scans terminate in-range; the host prepares them with
:func:`capped_cdf`.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None
    NUMBA_AVAILABLE = False

_INF = np.inf


def _default_backend() -> str:
    if NUMBA_AVAILABLE and os.environ.get("BJSCC_NUMBA", "1") != "0":
        return "numba"
    return "numpy"


_backend = _default_backend()


def set_backend(name: str) -> None:
    """Select the kernel implementation: ``"numba"`` or ``"numpy"``."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not importable in this environment")
    _backend = name


def get_backend() -> str:
    return _backend


def capped_cdf(rows: np.ndarray) -> np.ndarray:
    """Row-wise cumulative distribution with the last entry forced to +inf."""
    rows = np.atleast_2d(rows)
    cdf = np.cumsum(rows, axis=-1)
    cdf[..., -1] = _INF
    return np.ascontiguousarray(cdf)


def _njit(fn):
    if not NUMBA_AVAILABLE:
        return None
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# scheme simulation, arrival-table backend
# ---------------------------------------------------------------------------
# Per-trial draw layout (positions within the trial stream):
#   0                 source symbol uniform
#   1 .. C            cell arrival exponentials, C = n_cells * J,
#                     flat index cell * J + label
#   C+1 .. C+K        channel output uniforms, one per decoder
# The host converts draws 1..C into arrival times (exponential / rate) before
# the kernel runs; ``tau`` below already contains them.


def _scheme_cell_py(w_idx, tau, u_y, admissible, cell_x, cell_z, ch_cdf, inv_p,
                    ok, rho_zero, J, L, K):
    T = w_idx.shape[0]
    nc = cell_x.shape[0]
    nw, nz = ok.shape
    errors = 0
    ties = 0
    per_dec = np.zeros(K, dtype=np.int64)
    counts_wz = np.zeros((nw, nz), dtype=np.int64)
    for t in range(T):
        w = w_idx[t]
        if rho_zero[w]:
            errors += 1
            for k in range(K):
                per_dec[k] += 1
            continue
        # encoder: earliest arrival among admissible cells, any label
        best = _INF
        bidx = -1
        nb = 1
        for c in range(nc):
            if admissible[w, c]:
                base = c * J
                for j in range(J):
                    v = tau[t, base + j]
                    if v < best:
                        best = v
                        bidx = base + j
                        nb = 1
                    elif v == best:
                        nb += 1
        if nb > 1:
            ties += 1
        ecell = bidx // J
        x = cell_x[ecell]
        counts_wz[w, cell_z[ecell]] += 1
        all_fail = True
        for k in range(K):
            u = u_y[t, k]
            y = 0
            while u > ch_cdf[x, y]:
                y += 1
            lab = k // L
            bcell = 0
            btau = tau[t, lab]
            bs = btau * inv_p[y, cell_x[0]]
            nb = 1
            for c in range(1, nc):
                tv = tau[t, c * J + lab]
                v = tv * inv_p[y, cell_x[c]]
                if v < bs:
                    bs = v
                    btau = tv
                    bcell = c
                    nb = 1
                elif v == bs:
                    nb += 1
                    if tv < btau:
                        btau = tv
                        bcell = c
            if nb > 1:
                ties += 1
            if ok[w, cell_z[bcell]]:
                all_fail = False
            else:
                per_dec[k] += 1
        if all_fail:
            errors += 1
    return errors, per_dec, ties, counts_wz


_scheme_cell_nb = _njit(_scheme_cell_py)


def _scheme_cell_np(w_idx, tau, u_y, admissible, cell_x, cell_z, ch_cdf, inv_p,
                    ok, rho_zero, J, L, K):
    T = w_idx.shape[0]
    nc = cell_x.shape[0]
    nw, nz = ok.shape
    valid = ~rho_zero[w_idx]
    n_invalid = int((~valid).sum())
    tau3 = tau.reshape(T, nc, J)

    adm = np.broadcast_to(admissible[w_idx][:, :, None], (T, nc, J))
    masked = np.where(adm, tau3, _INF).reshape(T, nc * J)
    emin = masked.min(axis=1)
    eties = ((masked == emin[:, None]).sum(axis=1) > 1) & valid
    ties = int(eties.sum())
    eidx = np.argmin(masked, axis=1)
    ecell = eidx // J
    x_star = cell_x[ecell]

    counts_wz = np.zeros((nw, nz), dtype=np.int64)
    np.add.at(counts_wz, (w_idx[valid], cell_z[ecell[valid]]), 1)

    per_dec = np.full(K, n_invalid, dtype=np.int64)
    all_fail = np.ones(T, dtype=bool)
    cdf_rows = ch_cdf[x_star]
    for k in range(K):
        y = (u_y[:, k, None] > cdf_rows).sum(axis=1)
        lab = k // L
        tk = tau3[:, :, lab]
        s = tk * inv_p[y][:, cell_x]
        smin = s.min(axis=1)
        cand = s == smin[:, None]
        ties += int(((cand.sum(axis=1) > 1) & valid).sum())
        bcell = np.argmin(np.where(cand, tk, _INF), axis=1)
        fail = ~ok[w_idx, cell_z[bcell]]
        per_dec[k] += int((fail & valid).sum())
        all_fail &= fail
    errors = n_invalid + int((all_fail & valid).sum())
    return errors, per_dec, ties, counts_wz


# ---------------------------------------------------------------------------
# side-information (Wyner-Ziv style) simulation, arrival-table backend
# ---------------------------------------------------------------------------
# Per-trial draw layout:
#   0                  source symbol uniform
#   1 .. C             cell arrival exponentials, C = n_cells * K
#   C+1 .. C+K         side-information uniforms
#   C+K+1 .. C+2K      channel output uniforms


def _wz_cell_py(w_idx, tau, u_t, u_y, enc_weight, cell_x, cell_u, tgw_cdf,
                ch_cdf, inv_p, side_fac, phi, ok, K):
    T = w_idx.shape[0]
    nc = cell_x.shape[0]
    nw = enc_weight.shape[0]
    nu = side_fac.shape[1]
    errors = 0
    ties = 0
    per_dec = np.zeros(K, dtype=np.int64)
    counts_wu = np.zeros((nw, nu), dtype=np.int64)
    for t in range(T):
        w = w_idx[t]
        # encoder: score tau * p_U(u) / p_{U|W}(u|w)
        btau = tau[t, 0]
        bs = btau * enc_weight[w, cell_u[0]]
        bidx = 0
        nb = 1
        for i in range(1, nc * K):
            tv = tau[t, i]
            v = tv * enc_weight[w, cell_u[i // K]]
            if v < bs:
                bs = v
                btau = tv
                bidx = i
                nb = 1
            elif v == bs:
                nb += 1
                if tv < btau:
                    btau = tv
                    bidx = i
        if nb > 1:
            ties += 1
        ecell = bidx // K
        x = cell_x[ecell]
        counts_wu[w, cell_u[ecell]] += 1
        all_fail = True
        for k in range(K):
            u = u_t[t, k]
            tk = 0
            while u > tgw_cdf[w, tk]:
                tk += 1
            u = u_y[t, k]
            y = 0
            while u > ch_cdf[x, y]:
                y += 1
            bcell = 0
            btau = tau[t, k]
            bs = (btau * inv_p[y, cell_x[0]]) * side_fac[tk, cell_u[0]]
            nb = 1
            for c in range(1, nc):
                tv = tau[t, c * K + k]
                v = (tv * inv_p[y, cell_x[c]]) * side_fac[tk, cell_u[c]]
                if v < bs:
                    bs = v
                    btau = tv
                    bcell = c
                    nb = 1
                elif v == bs:
                    nb += 1
                    if tv < btau:
                        btau = tv
                        bcell = c
            if nb > 1:
                ties += 1
            if ok[w, phi[cell_u[bcell], tk]]:
                all_fail = False
            else:
                per_dec[k] += 1
        if all_fail:
            errors += 1
    return errors, per_dec, ties, counts_wu


_wz_cell_nb = _njit(_wz_cell_py)


def _wz_cell_np(w_idx, tau, u_t, u_y, enc_weight, cell_x, cell_u, tgw_cdf,
                ch_cdf, inv_p, side_fac, phi, ok, K):
    T = w_idx.shape[0]
    nc = cell_x.shape[0]
    nw = enc_weight.shape[0]
    nu = side_fac.shape[1]
    tau3 = tau.reshape(T, nc, K)

    escore = tau * np.repeat(enc_weight[w_idx][:, cell_u], K, axis=1)
    emin = escore.min(axis=1)
    cand = escore == emin[:, None]
    ties = int((cand.sum(axis=1) > 1).sum())
    eidx = np.argmin(np.where(cand, tau, _INF), axis=1)
    ecell = eidx // K
    x_star = cell_x[ecell]

    counts_wu = np.zeros((nw, nu), dtype=np.int64)
    np.add.at(counts_wu, (w_idx, cell_u[ecell]), 1)

    per_dec = np.zeros(K, dtype=np.int64)
    all_fail = np.ones(T, dtype=bool)
    t_cdf = tgw_cdf[w_idx]
    y_cdf = ch_cdf[x_star]
    for k in range(K):
        tk = (u_t[:, k, None] > t_cdf).sum(axis=1)
        y = (u_y[:, k, None] > y_cdf).sum(axis=1)
        tkk = tau3[:, :, k]
        s = (tkk * inv_p[y][:, cell_x]) * side_fac[tk][:, cell_u]
        smin = s.min(axis=1)
        cand = s == smin[:, None]
        ties += int((cand.sum(axis=1) > 1).sum())
        bcell = np.argmin(np.where(cand, tkk, _INF), axis=1)
        zhat = phi[cell_u[bcell], tk]
        fail = ~ok[w_idx, zhat]
        per_dec[k] += int(fail.sum())
        all_fail &= fail
    errors = int(all_fail.sum())
    return errors, per_dec, ties, counts_wu


# ---------------------------------------------------------------------------
# list matching (unconditional): one scored race per label
# ---------------------------------------------------------------------------
# Per-trial draw layout: positions 0 .. n_u * K - 1 hold the arrival
# exponentials, flat index u * K + label.


def _list_py(tau, inv_p, inv_q, K):
    T = tau.shape[0]
    nu = inv_p.shape[0]
    ties = 0
    u_counts = np.zeros(nu, dtype=np.int64)
    u_mismatch = np.zeros(nu, dtype=np.int64)
    for t in range(T):
        btau = tau[t, 0]
        bs = btau * inv_p[0]
        bidx = 0
        nb = 1
        for i in range(1, nu * K):
            tv = tau[t, i]
            v = tv * inv_p[i // K]
            if v < bs:
                bs = v
                btau = tv
                bidx = i
                nb = 1
            elif v == bs:
                nb += 1
                if tv < btau:
                    btau = tv
                    bidx = i
        if nb > 1:
            ties += 1
        u_p = bidx // K
        u_counts[u_p] += 1
        matched = False
        for k in range(K):
            bu = 0
            btau = tau[t, k]
            bs = btau * inv_q[0]
            nb = 1
            for u in range(1, nu):
                tv = tau[t, u * K + k]
                v = tv * inv_q[u]
                if v < bs:
                    bs = v
                    btau = tv
                    bu = u
                    nb = 1
                elif v == bs:
                    nb += 1
                    if tv < btau:
                        btau = tv
                        bu = u
            if nb > 1:
                ties += 1
            if bu == u_p:
                matched = True
        if not matched:
            u_mismatch[u_p] += 1
    return u_counts, u_mismatch, ties


_list_nb = _njit(_list_py)


def _list_np(tau, inv_p, inv_q, K):
    T = tau.shape[0]
    nu = inv_p.shape[0]
    tau3 = tau.reshape(T, nu, K)

    escore = tau * np.repeat(inv_p, K)[None, :]
    emin = escore.min(axis=1)
    cand = escore == emin[:, None]
    ties = int((cand.sum(axis=1) > 1).sum())
    eidx = np.argmin(np.where(cand, tau, _INF), axis=1)
    u_p = eidx // K

    u_counts = np.bincount(u_p, minlength=nu).astype(np.int64)
    matched = np.zeros(T, dtype=bool)
    for k in range(K):
        tkk = tau3[:, :, k]
        s = tkk * inv_q[None, :]
        smin = s.min(axis=1)
        cand = s == smin[:, None]
        ties += int((cand.sum(axis=1) > 1).sum())
        bu = np.argmin(np.where(cand, tkk, _INF), axis=1)
        matched |= bu == u_p
    u_mismatch = np.bincount(u_p[~matched], minlength=nu).astype(np.int64)
    return u_counts, u_mismatch, ties


# ---------------------------------------------------------------------------
# conditional list matching with grouped labels
# ---------------------------------------------------------------------------
# Per-trial draw layout:
#   0                  conditioning-input uniform
#   1 .. C             cell arrival exponentials, C = n_u * J
#   C+1 .. C+K         observation uniforms


def _cond_list_py(x_idx, tau, u_y, inv_pux, py_cdf, inv_q, ratio, J, L, K):
    T = x_idx.shape[0]
    nu = inv_q.shape[1]
    ties = 0
    mismatch = np.zeros(T, dtype=np.bool_)
    rhs = np.zeros(T, dtype=np.float64)
    y_buf = np.zeros(K, dtype=np.int64)
    for t in range(T):
        x = x_idx[t]
        btau = tau[t, 0]
        bs = btau * inv_pux[x, 0]
        bidx = 0
        nb = 1
        for i in range(1, nu * J):
            tv = tau[t, i]
            v = tv * inv_pux[x, i // J]
            if v < bs:
                bs = v
                btau = tv
                bidx = i
                nb = 1
            elif v == bs:
                nb += 1
                if tv < btau:
                    btau = tv
                    bidx = i
        if nb > 1:
            ties += 1
        u_p = bidx // J
        matched = False
        for k in range(K):
            u = u_y[t, k]
            y = 0
            while u > py_cdf[x, u_p, y]:
                y += 1
            y_buf[k] = y
            lab = k // L
            bu = 0
            btau = tau[t, lab]
            bs = btau * inv_q[y, 0]
            nb = 1
            for uu in range(1, nu):
                tv = tau[t, uu * J + lab]
                v = tv * inv_q[y, uu]
                if v < bs:
                    bs = v
                    btau = tv
                    bu = uu
                    nb = 1
                elif v == bs:
                    nb += 1
                    if tv < btau:
                        btau = tv
                        bu = uu
            if nb > 1:
                ties += 1
            if bu == u_p:
                matched = True
        mismatch[t] = not matched
        acc = 0.0
        for j in range(J):
            m = _INF
            for k in range(j * L, (j + 1) * L):
                r = ratio[x, y_buf[k], u_p]
                if r < m:
                    m = r
            acc += 1.0 / (J + m)
        rhs[t] = 1.0 - acc
    return mismatch, rhs, ties


_cond_list_nb = _njit(_cond_list_py)


def _cond_list_np(x_idx, tau, u_y, inv_pux, py_cdf, inv_q, ratio, J, L, K):
    T = x_idx.shape[0]
    nu = inv_q.shape[1]
    tau3 = tau.reshape(T, nu, J)

    escore = tau * np.repeat(inv_pux[x_idx], J, axis=1)
    emin = escore.min(axis=1)
    cand = escore == emin[:, None]
    ties = int((cand.sum(axis=1) > 1).sum())
    eidx = np.argmin(np.where(cand, tau, _INF), axis=1)
    u_p = eidx // J

    y_cdf = py_cdf[x_idx, u_p]
    matched = np.zeros(T, dtype=bool)
    ys = np.zeros((T, K), dtype=np.int64)
    for k in range(K):
        y = (u_y[:, k, None] > y_cdf).sum(axis=1)
        ys[:, k] = y
        lab = k // L
        tkk = tau3[:, :, lab]
        s = tkk * inv_q[y]
        smin = s.min(axis=1)
        cand = s == smin[:, None]
        ties += int((cand.sum(axis=1) > 1).sum())
        bu = np.argmin(np.where(cand, tkk, _INF), axis=1)
        matched |= bu == u_p
    mismatch = ~matched

    acc = np.zeros(T, dtype=np.float64)
    for j in range(J):
        m = np.full(T, _INF)
        for k in range(j * L, (j + 1) * L):
            m = np.minimum(m, ratio[x_idx, ys[:, k], u_p])
        acc = acc + 1.0 / (J + m)
    rhs = 1.0 - acc
    return mismatch, rhs, ties


# ---------------------------------------------------------------------------
# scheme simulation, sequential-stream backend
# ---------------------------------------------------------------------------
# Per-trial draw layout:
#   0                  source symbol uniform
#   1 .. K             channel output uniforms
#   K+1 + 3i + (0,1,2) point i: arrival gap, cell uniform, label uniform
# The host turns these into cumulative arrival times, cell indices and
# labels; kernels receive ``n_pts`` prepared points per pending trial and
# flag trials whose stopping rules were not all reached within the block.


def _scheme_stream_py(w_idx, u_y, tau_pts, cell_pts, lab_pts, admissible,
                      cell_x, cell_z, ch_cdf, inv_p, pmax, ok, rho_zero, J, L, K):
    T = w_idx.shape[0]
    B = tau_pts.shape[1]
    nw, nz = ok.shape
    errors = 0
    ties = 0
    per_dec = np.zeros(K, dtype=np.int64)
    counts_wz = np.zeros((nw, nz), dtype=np.int64)
    unfinished = np.zeros(T, dtype=np.bool_)
    fail_buf = np.zeros(K, dtype=np.bool_)
    for t in range(T):
        w = w_idx[t]
        if rho_zero[w]:
            errors += 1
            for k in range(K):
                per_dec[k] += 1
            continue
        eidx = -1
        for i in range(B):
            if admissible[w, cell_pts[t, i]]:
                eidx = i
                break
        if eidx < 0:
            unfinished[t] = True
            continue
        ecell = cell_pts[t, eidx]
        x = cell_x[ecell]
        trial_ties = 0
        done = True
        for k in range(K):
            u = u_y[t, k]
            y = 0
            while u > ch_cdf[x, y]:
                y += 1
            lab = k // L
            bs = _INF
            bcell = 0
            nb = 1
            stopped = False
            for i in range(B):
                tv = tau_pts[t, i]
                if tv >= bs * pmax[y]:
                    stopped = True
                    break
                if lab_pts[t, i] == lab:
                    c = cell_pts[t, i]
                    v = tv * inv_p[y, cell_x[c]]
                    if v < bs:
                        bs = v
                        bcell = c
                        nb = 1
                    elif v == bs:
                        nb += 1
            if not stopped:
                done = False
                break
            if nb > 1:
                trial_ties += 1
            fail_buf[k] = not ok[w, cell_z[bcell]]
        if not done:
            unfinished[t] = True
            continue
        counts_wz[w, cell_z[ecell]] += 1
        ties += trial_ties
        all_fail = True
        for k in range(K):
            if fail_buf[k]:
                per_dec[k] += 1
            else:
                all_fail = False
        if all_fail:
            errors += 1
    return errors, per_dec, ties, counts_wz, unfinished


_scheme_stream_nb = _njit(_scheme_stream_py)


def _scheme_stream_np(w_idx, u_y, tau_pts, cell_pts, lab_pts, admissible,
                      cell_x, cell_z, ch_cdf, inv_p, pmax, ok, rho_zero, J, L, K):
    T = w_idx.shape[0]
    nw, nz = ok.shape
    errors = 0
    ties = 0
    per_dec = np.zeros(K, dtype=np.int64)
    counts_wz = np.zeros((nw, nz), dtype=np.int64)
    unfinished = np.zeros(T, dtype=np.bool_)
    for t in range(T):
        w = w_idx[t]
        if rho_zero[w]:
            errors += 1
            per_dec += 1
            continue
        cells = cell_pts[t]
        adm = admissible[w, cells]
        if not adm.any():
            unfinished[t] = True
            continue
        ecell = cells[int(np.argmax(adm))]
        x = cell_x[ecell]
        taus = tau_pts[t]
        trial_ties = 0
        fails = np.zeros(K, dtype=bool)
        done = True
        for k in range(K):
            y = int((u_y[t, k] > ch_cdf[x]).sum())
            lab = k // L
            s = np.where(lab_pts[t] == lab, taus * inv_p[y, cell_x[cells]], _INF)
            run_before = np.concatenate(([_INF], np.minimum.accumulate(s)[:-1]))
            stop = taus >= run_before * pmax[y]
            if not stop.any():
                done = False
                break
            si = int(np.argmax(stop))
            head = s[:si]
            m = head.min()
            cand = head == m
            if int(cand.sum()) > 1:
                trial_ties += 1
            fails[k] = not ok[w, cell_z[cells[int(np.argmax(cand))]]]
        if not done:
            unfinished[t] = True
            continue
        counts_wz[w, cell_z[ecell]] += 1
        ties += trial_ties
        per_dec += fails
        if fails.all():
            errors += 1
    return errors, per_dec, ties, counts_wz, unfinished


_IMPLS = {
    "scheme_cell": {"numpy": _scheme_cell_np, "numba": _scheme_cell_nb},
    "wz_cell": {"numpy": _wz_cell_np, "numba": _wz_cell_nb},
    "list": {"numpy": _list_np, "numba": _list_nb},
    "cond_list": {"numpy": _cond_list_np, "numba": _cond_list_nb},
    "scheme_stream": {"numpy": _scheme_stream_np, "numba": _scheme_stream_nb},
}


def kernel(name: str):
    """Resolve a kernel by name under the active backend."""
    return _IMPLS[name][_backend]
