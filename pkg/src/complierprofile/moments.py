"""Sample moments, strata shares and strata covariate means.

The complier covariate mean is not observable unit by unit, but it is a
smooth function of six sample means (see :class:`MomentVector`)::

    mu_co = (mu - mu_vnt / pi_z - mu_vat / (1 - pi_z))
            / (1 - pi_vnt / pi_z - pi_vat / (1 - pi_z))

Never-taker and always-taker means are plain cell means of the
``(Z=1, D=0)`` and ``(Z=0, D=1)`` cells, which are pure under monotonicity.

All sums use :func:`math.fsum`, which is correctly rounded, so every moment is
bit-identical under any reordering of the units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateInstrumentError,
    EmptyDataError,
    MonotonicityViolationError,
    warn,
)

__all__ = [
    "Observation",
    "Dataset",
    "MomentVector",
    "StrataShares",
    "StrataMeans",
    "ObservableMeans",
    "WEAK_COMPLIER_THRESHOLD",
    "contributions",
    "compute_moments",
    "share_moments",
    "observable_strata_means",
    "strata_shares",
    "complier_mean",
    "strata_means",
    "decomposition_residual",
]

WEAK_COMPLIER_THRESHOLD = 0.01


@dataclass(frozen=True)
class Observation:
    z: int
    d: int
    x: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Instrument, treatment and profiling covariates for N units.

    ``x`` has shape ``(N, K)``. A NaN entry marks a missing covariate value;
    such rows are dropped for that covariate only (see :meth:`column`).
    Infinite values are rejected.
    """

    z: np.ndarray
    d: np.ndarray
    x: np.ndarray
    covariate_names: tuple[str, ...]

    def __post_init__(self) -> None:
        z = np.asarray(self.z)
        d = np.asarray(self.d)
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if z.ndim != 1 or d.ndim != 1 or x.ndim != 2:
            raise ValueError("z and d must be 1-D and x 2-D")
        if not (z.shape[0] == d.shape[0] == x.shape[0]):
            raise ValueError(
                f"length mismatch: z={z.shape[0]}, d={d.shape[0]}, x={x.shape[0]}"
            )
        for name, arr in (("z", z), ("d", d)):
            if arr.size and not np.all((arr == 0) | (arr == 1)):
                raise ValueError(f"{name} must be binary (0/1)")
        if np.any(np.isinf(x)):
            raise ValueError("covariates must be finite (NaN marks missing)")
        names = tuple(self.covariate_names)
        if len(names) != x.shape[1]:
            raise ValueError(f"{len(names)} covariate names for {x.shape[1]} columns")
        object.__setattr__(self, "z", z.astype(np.int8))
        object.__setattr__(self, "d", d.astype(np.int8))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_observations(
        cls, observations: Sequence[Observation], covariate_names: Sequence[str]
    ) -> "Dataset":
        k = len(covariate_names)
        if any(len(o.x) != k for o in observations):
            raise ValueError("all observations must have the same covariate dimension")
        x = np.array([o.x for o in observations], dtype=np.float64).reshape(-1, k)
        return cls(
            z=np.array([o.z for o in observations], dtype=np.int8),
            d=np.array([o.d for o in observations], dtype=np.int8),
            x=x,
            covariate_names=tuple(covariate_names),
        )

    @property
    def n(self) -> int:
        return int(self.z.shape[0])

    @property
    def k(self) -> int:
        return int(self.x.shape[1])

    def index_of(self, name: str) -> int:
        return self.covariate_names.index(name)

    def column(self, covariate_index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """Complete cases for one covariate: ``(z, d, x, n_dropped)``."""
        if not 0 <= covariate_index < self.k:
            raise IndexError(f"covariate index {covariate_index} out of range (K={self.k})")
        x = self.x[:, covariate_index]
        keep = ~np.isnan(x)
        dropped = int(keep.size - keep.sum())
        if dropped:
            return self.z[keep], self.d[keep], x[keep], dropped
        return self.z, self.d, x, 0


@dataclass(frozen=True)
class MomentVector:
    """The six sample means entering the complier-mean estimator, plus N."""

    mu: float
    mu_vnt: float
    mu_vat: float
    pi_vnt: float
    pi_vat: float
    pi_z: float
    n: int

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mu, self.mu_vnt, self.mu_vat, self.pi_vnt, self.pi_vat, self.pi_z]
        )

    @classmethod
    def from_array(cls, beta: Sequence[float], n: int) -> "MomentVector":
        return cls(*(float(b) for b in beta), n=int(n))


@dataclass(frozen=True)
class StrataShares:
    pi_nt: float
    pi_at: float
    pi_co: float
    first_stage: float


@dataclass(frozen=True)
class StrataMeans:
    mu_co: float
    mu_at: float | None
    mu_nt: float | None
    mu_sample: float


class ObservableMeans(NamedTuple):
    mu_nt: float | None
    mu_at: float | None


def contributions(z: np.ndarray, d: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-unit contribution vectors, shape ``(N, 6)``.

    Columns: ``X, Z(1-D)X, (1-Z)DX, Z(1-D), (1-Z)D, Z``.
    """
    z = np.asarray(z, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    vnt = z * (1.0 - d)
    vat = (1.0 - z) * d
    return np.column_stack([x, vnt * x, vat * x, vnt, vat, z])


def _mean(values: np.ndarray) -> float:
    return math.fsum(values.tolist()) / values.shape[0]


def _moments(z: np.ndarray, d: np.ndarray, x: np.ndarray) -> MomentVector:
    n = int(z.shape[0])
    if n == 0:
        raise EmptyDataError("no observations (after dropping missing values)")
    c = contributions(z, d, x)
    beta = [_mean(c[:, j]) for j in range(6)]
    if beta[5] in (0.0, 1.0):
        raise DegenerateInstrumentError(
            "instrument takes a single value; need units with z=0 and z=1",
            pi_z=beta[5],
        )
    return MomentVector.from_array(beta, n)


def compute_moments(data: Dataset, covariate_index: int) -> MomentVector:
    """Six sample moments for one covariate over its complete cases.

    Raises
    ------
    EmptyDataError
        No complete cases.
    DegenerateInstrumentError
        All complete cases share the same instrument value.
    """
    z, d, x, _ = data.column(covariate_index)
    return _moments(z, d, x)


def share_moments(data: Dataset) -> MomentVector:
    """Moments over all N units with a unit covariate; only the share block matters."""
    return _moments(data.z, data.d, np.ones(data.n))


def observable_strata_means(data: Dataset, covariate_index: int) -> ObservableMeans:
    """Cell means of the ``(Z=1, D=0)`` and ``(Z=0, D=1)`` cells.

    An empty cell yields ``None`` for that stratum and a ``ProfilingWarning``;
    one-sided noncompliance empties a cell by design.
    """
    z, d, x, _ = data.column(covariate_index)
    out = []
    for label, cell in (
        ("never-taker", (z == 1) & (d == 0)),
        ("always-taker", (z == 0) & (d == 1)),
    ):
        if cell.any():
            out.append(_mean(x[cell]))
        else:
            warn(
                f"{label} cell is empty (one-sided compliance); {label} mean undefined",
                code="one-sided-compliance",
            )
            out.append(None)
    return ObservableMeans(*out)


def strata_shares(m: MomentVector) -> StrataShares:
    """Never-taker, always-taker and complier shares.

    The first-stage difference ``E[D|Z=1] - E[D|Z=0]`` is returned alongside;
    it is the complier share computed the same way and therefore equal to it.
    """
    if not 0.0 < m.pi_z < 1.0:
        raise DegenerateInstrumentError(f"pi_z={m.pi_z} is not in (0, 1)", pi_z=m.pi_z)
    pi_nt = m.pi_vnt / m.pi_z
    pi_at = m.pi_vat / (1.0 - m.pi_z)
    pi_co = 1.0 - pi_nt - pi_at
    first_stage = (1.0 - m.pi_vnt / m.pi_z) - m.pi_vat / (1.0 - m.pi_z)
    if pi_co <= 0.0:
        raise MonotonicityViolationError(
            f"estimated complier share {pi_co:.6g} <= 0: instrument relevance or "
            "monotonicity fails in this sample",
            shares=(pi_nt, pi_at, pi_co),
        )
    return StrataShares(pi_nt=pi_nt, pi_at=pi_at, pi_co=pi_co, first_stage=first_stage)


def complier_mean(m: MomentVector, weak_threshold: float = WEAK_COMPLIER_THRESHOLD) -> float:
    """Plug-in estimate of the complier covariate mean.

    Warns with code ``weak-complier-share`` when the estimated complier share
    is below ``weak_threshold``; raises ``MonotonicityViolationError`` when it
    is not positive.
    """
    shares = strata_shares(m)
    if shares.pi_co < weak_threshold:
        warn(
            f"complier share {shares.pi_co:.4g} below {weak_threshold}; "
            "complier mean is weakly identified",
            code="weak-complier-share",
        )
    numerator = m.mu - m.mu_vnt / m.pi_z - m.mu_vat / (1.0 - m.pi_z)
    denominator = 1.0 - m.pi_vnt / m.pi_z - m.pi_vat / (1.0 - m.pi_z)
    return numerator / denominator


def strata_means(
    data: Dataset, covariate_index: int, weak_threshold: float = WEAK_COMPLIER_THRESHOLD
) -> StrataMeans:
    m = compute_moments(data, covariate_index)
    mu_co = complier_mean(m, weak_threshold)
    observed = observable_strata_means(data, covariate_index)
    return StrataMeans(mu_co=mu_co, mu_at=observed.mu_at, mu_nt=observed.mu_nt, mu_sample=m.mu)


def decomposition_residual(shares: StrataShares, means: StrataMeans) -> float:
    """Relative gap between the share-weighted strata means and the sample mean.

    Undefined strata contribute nothing; their share is zero in-sample.
    """
    total = shares.pi_co * means.mu_co
    if means.mu_at is not None:
        total += shares.pi_at * means.mu_at
    if means.mu_nt is not None:
        total += shares.pi_nt * means.mu_nt
    scale = max(
        abs(means.mu_sample),
        abs(shares.pi_co * means.mu_co),
        abs(shares.pi_at * (means.mu_at or 0.0)),
        abs(shares.pi_nt * (means.mu_nt or 0.0)),
        np.finfo(float).tiny,
    )
    return abs(total - means.mu_sample) / scale
