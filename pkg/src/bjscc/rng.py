"""Counter-based random streams for reproducible parallel Monte Carlo.

Every random draw consumed by the simulators is addressed by a triple
(master seed, trial index, draw position) and is a pure function of that
triple, evaluated with a Philox-style 2x64 block cipher.  Consequences:

* a trial can be regenerated in isolation, identically, at any time;
* results are independent of chunking, worker count, and scheduling;
* disjoint trial indices yield statistically independent streams.

All generation is vectorized over trials and draw positions.  The uniform
variates lie strictly inside (0, 1), so ``-log(u)`` is always positive and
finite.
"""

from __future__ import annotations

import numpy as np

_MULTIPLIER = np.uint64(0xD2B74407B1CE6E93)
_MASK32 = np.uint64(0xFFFFFFFF)
_ROUNDS = 10
_SHIFT11 = np.uint64(11)
_SHIFT32 = np.uint64(32)
_HALF = 0.5
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def _mulhilo(a: np.ndarray, b: np.uint64) -> tuple[np.ndarray, np.ndarray]:
    """Full 128-bit product of uint64 arrays with a uint64 constant."""
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _SHIFT32
    b_lo = b & _MASK32
    b_hi = b >> _SHIFT32
    # cross terms stay below 2**64: (2**32-1)**2 + 2*(2**32-1) = 2**64 - 1
    cross = ((a_lo * b_lo) >> _SHIFT32) + (a_hi * b_lo & _MASK32) + a_lo * b_hi
    hi = a_hi * b_hi + ((a_hi * b_lo) >> _SHIFT32) + (cross >> _SHIFT32)
    return hi, lo


def _philox2x64(c0: np.ndarray, c1: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Apply the 10-round bijection to counters (c0, c1) under ``seed``."""
    x0 = np.broadcast_to(c0, np.broadcast_shapes(c0.shape, c1.shape)).copy()
    x1 = np.broadcast_to(c1, x0.shape).copy()
    base = seed & 0xFFFFFFFFFFFFFFFF
    bump = 0x9E3779B97F4A7C15
    keys = [np.uint64((base + r * bump) & 0xFFFFFFFFFFFFFFFF) for r in range(_ROUNDS)]
    for key in keys:
        hi, lo = _mulhilo(x0, _MULTIPLIER)
        x0 = hi ^ key ^ x1
        x1 = lo
    return x0, x1


def raw_block(seed: int, trial_start: int, n_trials: int, pair_start: int, n_pairs: int) -> np.ndarray:
    """Raw uint64 outputs, shape (n_trials, 2 * n_pairs).

    Column 2*p (resp. 2*p + 1) holds the first (second) output word of the
    cipher applied to counter (trial, pair_start + p).
    """
    trials = np.arange(trial_start, trial_start + n_trials, dtype=np.uint64)[:, None]
    pairs = np.arange(pair_start, pair_start + n_pairs, dtype=np.uint64)[None, :]
    x0, x1 = _philox2x64(trials, pairs, seed)
    out = np.empty((n_trials, 2 * n_pairs), dtype=np.uint64)
    out[:, 0::2] = x0
    out[:, 1::2] = x1
    return out


def uniform_block(seed: int, trial_start: int, n_trials: int, draw_start: int, n_draws: int) -> np.ndarray:
    """Uniform(0, 1) variates, shape (n_trials, n_draws).

    Entry [t, j] is draw ``draw_start + j`` of trial ``trial_start + t``.
    Values lie in [2**-54, 1 - 2**-54]; neither endpoint of (0, 1) is
    attainable, so log/division transforms never overflow.
    """
    trials = np.arange(trial_start, trial_start + n_trials, dtype=np.uint64)
    return uniform_for_trials(seed, trials, draw_start, n_draws)


def uniform_for_trials(seed: int, trials: np.ndarray, draw_start: int, n_draws: int) -> np.ndarray:
    """Like :func:`uniform_block` for an arbitrary vector of trial indices."""
    n_trials = len(trials)
    if n_draws == 0:
        return np.empty((n_trials, 0), dtype=np.float64)
    pair_start = draw_start >> 1
    pair_stop = (draw_start + n_draws + 1) >> 1
    c0 = np.asarray(trials, dtype=np.uint64)[:, None]
    c1 = np.arange(pair_start, pair_stop, dtype=np.uint64)[None, :]
    x0, x1 = _philox2x64(c0, c1, seed)
    raw = np.empty((n_trials, 2 * (pair_stop - pair_start)), dtype=np.uint64)
    raw[:, 0::2] = x0
    raw[:, 1::2] = x1
    offset = draw_start & 1
    mantissa = (raw[:, offset:offset + n_draws] >> _SHIFT11).astype(np.float64)
    return (mantissa + _HALF) * _INV53


def exponential_block(seed: int, trial_start: int, n_trials: int, draw_start: int, n_draws: int) -> np.ndarray:
    """Unit-rate exponential variates with the same addressing as uniforms."""
    return -np.log(uniform_block(seed, trial_start, n_trials, draw_start, n_draws))


class TrialStream:
    """Sequential view of one trial's draw stream (see :func:`spawn`)."""

    def __init__(self, seed: int, trial: int):
        self.seed = int(seed)
        self.trial = int(trial)
        self._cursor = 0

    def uniforms(self, n: int) -> np.ndarray:
        out = uniform_block(self.seed, self.trial, 1, self._cursor, n)[0]
        self._cursor += n
        return out

    def exponentials(self, n: int) -> np.ndarray:
        return -np.log(self.uniforms(n))


def spawn(seed: int, trial: int) -> TrialStream:
    """Per-trial generator: same (seed, trial) always yields the same stream."""
    if trial < 0:
        raise ValueError("trial index must be non-negative")
    return TrialStream(seed, trial)
