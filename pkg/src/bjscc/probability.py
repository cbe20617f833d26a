"""Finite-alphabet probability primitives.

Distributions, channels, information densities and the variance quantities
used by the second-order analysis.  Conventions, applied throughout the
package:

* all information quantities are in bits (base-2 logarithms);
* probabilities are 64-bit floats, validated to sum to 1 within 1e-12 —
  silent renormalization is refused, callers must fix their inputs;
* a cell with zero conditional probability carries information density
  -inf, ``2**(-inf)`` contributions evaluate to 0, and expectations skip
  cells of zero joint mass.

All types are immutable after construction and safe to share between
workers; every operation is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

PROB_ATOL = 1e-12
PRODUCT_CELL_BUDGET = 2**20


class DimensionMismatchError(ValueError):
    """Shapes of distributions/kernels/matrices do not agree."""


class InvalidDistributionError(ValueError):
    """Probability vector fails validation (negative mass or bad total)."""


def _validated_probs(probs, what: str) -> np.ndarray:
    arr = np.array(probs, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidDistributionError(f"{what}: expected a non-empty 1-d probability vector")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InvalidDistributionError(f"{what}: entries must be finite and non-negative")
    total = float(arr.sum())
    if abs(total - 1.0) > PROB_ATOL:
        raise InvalidDistributionError(
            f"{what}: probabilities sum to {total!r}, outside 1 +/- {PROB_ATOL}; "
            "renormalize explicitly before constructing"
        )
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over a finite indexed alphabet."""

    probs: np.ndarray
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "probs", _validated_probs(self.probs, "Pmf"))
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != self.probs.size:
                raise DimensionMismatchError("labels length must match alphabet size")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.probs.size

    def support(self) -> np.ndarray:
        """Indices with strictly positive probability."""
        return np.flatnonzero(self.probs > 0)


@dataclass(frozen=True)
class Kernel:
    """Row-stochastic conditional pmf matrix (rows: inputs, cols: outputs)."""

    rows: np.ndarray

    def __post_init__(self):
        arr = np.array(self.rows, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidDistributionError("Kernel: expected a non-empty 2-d matrix")
        for i in range(arr.shape[0]):
            _validated_probs(arr[i], f"Kernel row {i}")
        arr.flags.writeable = False
        object.__setattr__(self, "rows", arr)

    @property
    def n_inputs(self) -> int:
        return self.rows.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.rows.shape[1]

    def row(self, i: int) -> Pmf:
        return Pmf(self.rows[i])


@dataclass(frozen=True)
class DistortionMatrix:
    """Non-negative distortion values, rows: source symbols, cols: reconstructions."""

    d: np.ndarray

    def __post_init__(self):
        arr = np.array(self.d, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionMismatchError("DistortionMatrix: expected a non-empty 2-d matrix")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise InvalidDistributionError("DistortionMatrix: entries must be finite and >= 0")
        arr.flags.writeable = False
        object.__setattr__(self, "d", arr)

    def ball(self, limit: float) -> np.ndarray:
        """Boolean matrix of reconstructions within ``limit`` of each source symbol."""
        return self.d <= limit


@dataclass(frozen=True)
class InfoDensityTable:
    """Per-cell information density (bits) plus the output marginal.

    ``iota[x, y] = log2(p(y|x) / p_Y(y))``; cells with ``p(y|x) = 0`` hold
    -inf, cells with ``p_Y(y) = 0`` hold +inf but carry zero joint mass and
    are never sampled.
    """

    iota: np.ndarray
    marginal_y: Pmf


def uniform(n: int) -> Pmf:
    if n < 1:
        raise InvalidDistributionError("alphabet size must be >= 1")
    return Pmf(np.full(n, 1.0 / n))


def bsc(delta: float) -> Kernel:
    """Binary symmetric channel with crossover probability ``delta``."""
    if not 0.0 <= delta <= 1.0:
        raise InvalidDistributionError("crossover probability must lie in [0, 1]")
    return Kernel(np.array([[1.0 - delta, delta], [delta, 1.0 - delta]]))


def hamming_distortion(n: int) -> DistortionMatrix:
    return DistortionMatrix(1.0 - np.eye(n))


def entropy(p: Pmf) -> float:
    """Shannon entropy in bits."""
    pos = p.probs[p.probs > 0]
    return float(-(pos * np.log2(pos)).sum())


def binary_entropy(x: float) -> float:
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * np.log2(x) - (1 - x) * np.log2(1 - x))


def _check_channel_input(p_x: Pmf, ch: Kernel):
    if len(p_x) != ch.n_inputs:
        raise DimensionMismatchError(
            f"input pmf has {len(p_x)} symbols but kernel expects {ch.n_inputs}"
        )


def output_marginal(p_x: Pmf, ch: Kernel) -> Pmf:
    _check_channel_input(p_x, ch)
    return Pmf(p_x.probs @ ch.rows)


def information_density(p_x: Pmf, ch: Kernel) -> InfoDensityTable:
    """Density table log2(p(y|x)/p_Y(y)) under input ``p_x``."""
    _check_channel_input(p_x, ch)
    p_y = p_x.probs @ ch.rows
    with np.errstate(divide="ignore"):
        iota = np.log2(ch.rows) - np.log2(p_y)[None, :]
    iota.flags.writeable = False
    return InfoDensityTable(iota=iota, marginal_y=Pmf(p_y))


def mutual_information(p_x: Pmf, ch: Kernel) -> float:
    """I(X;Y) in bits, computed as H(Y) - H(Y|X)."""
    _check_channel_input(p_x, ch)
    h_y = entropy(output_marginal(p_x, ch))
    h_y_given_x = 0.0
    for x in p_x.support():
        h_y_given_x += p_x.probs[x] * entropy(ch.row(x))
    c = h_y - h_y_given_x
    return max(c, 0.0)


def posterior(p_x: Pmf, ch: Kernel) -> Kernel:
    """Bayes reverse kernel, rows indexed by output symbol.

    Defined only when every output has positive marginal; otherwise the
    reverse row does not exist and querying it is an error.
    """
    _check_channel_input(p_x, ch)
    p_y = p_x.probs @ ch.rows
    dead = np.flatnonzero(p_y == 0)
    if dead.size:
        raise InvalidDistributionError(
            f"posterior undefined for outputs with zero marginal: {dead.tolist()}"
        )
    return Kernel((p_x.probs[:, None] * ch.rows).T / p_y[:, None])


def posterior_row(p_x: Pmf, ch: Kernel, y: int) -> Pmf:
    """Posterior over inputs for a single observed output ``y``."""
    _check_channel_input(p_x, ch)
    p_y = float(p_x.probs @ ch.rows[:, y])
    if p_y == 0:
        raise InvalidDistributionError(f"output {y} has zero marginal; posterior undefined")
    return Pmf(p_x.probs * ch.rows[:, y] / p_y)


def channel_dispersion(p_x: Pmf, ch: Kernel) -> tuple[float, float]:
    """(V, V_tilde): variance of the density and of its per-input mean.

    V is the unconditional variance of the information density; V_tilde is
    the variance over inputs of the conditional KL divergence
    D(p(.|x) || p_Y), i.e. the conditional-mean part of the total-variance
    decomposition.  Always 0 <= V_tilde <= V.
    """
    table = information_density(p_x, ch)
    joint = p_x.probs[:, None] * ch.rows
    mask = joint > 0
    mean = float((joint[mask] * table.iota[mask]).sum())
    v = float((joint[mask] * (table.iota[mask] - mean) ** 2).sum())
    cond_mean = np.zeros(len(p_x))
    for x in range(len(p_x)):
        m = mask[x]
        cond_mean[x] = (ch.rows[x, m] * table.iota[x, m]).sum()
    v_tilde = float((p_x.probs * (cond_mean - mean) ** 2).sum())
    return v, min(v_tilde, v)


def product_channel(ch: Kernel, n: int, max_cells: int = PRODUCT_CELL_BUDGET) -> Kernel:
    """Memoryless n-fold product channel.

    Row/column indices are length-n digit strings over the base alphabets,
    first use most significant.  The density of the product is the sum of
    the per-use densities.
    """
    if n < 1:
        raise DimensionMismatchError("n must be >= 1")
    cells = (ch.n_inputs * ch.n_outputs) ** n
    if cells > max_cells:
        raise DimensionMismatchError(
            f"product channel would hold {cells} cells, over the budget of {max_cells}"
        )
    rows = ch.rows
    for _ in range(n - 1):
        rows = np.kron(rows, ch.rows)
    return Kernel(rows)


def iid_pmf(p: Pmf, n: int, max_cells: int = PRODUCT_CELL_BUDGET) -> Pmf:
    """n-fold product distribution, same index convention as product_channel."""
    if n < 1:
        raise DimensionMismatchError("n must be >= 1")
    if len(p) ** n > max_cells:
        raise DimensionMismatchError("product alphabet exceeds the cell budget")
    probs = p.probs
    for _ in range(n - 1):
        probs = np.kron(probs, p.probs)
    return Pmf(probs)


def distortion_ball_mass(p_z: Pmf, dmat: DistortionMatrix, limit: float, w: int) -> float:
    """Reconstruction mass within distortion ``limit`` of source symbol ``w``."""
    if dmat.d.shape[1] != len(p_z):
        raise DimensionMismatchError("distortion columns must match reconstruction alphabet")
    return float(p_z.probs[dmat.d[w] <= limit].sum())


def distortion_ball_masses(p_z: Pmf, dmat: DistortionMatrix, limit: float) -> np.ndarray:
    """Vector of ball masses for every source symbol."""
    if dmat.d.shape[1] != len(p_z):
        raise DimensionMismatchError("distortion columns must match reconstruction alphabet")
    return (dmat.d <= limit) @ p_z.probs
