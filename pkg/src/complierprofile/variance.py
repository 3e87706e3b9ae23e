"""Standard errors and confidence intervals for strata means and shares.

Analytic (delta-method) standard errors for the complier mean use the
gradient of the plug-in formula and the sample covariance of the per-unit
contribution vectors::

    SE = sqrt(grad' Sigma_hat grad / N)

The nonparametric bootstrap is offered as the alternative. Its replicates draw
from per-index Philox substreams, so the result depends only on
``(data, replicates, seed)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import stats

from .errors import (
    BootstrapDegenerateError,
    GradientUndefinedError,
    InsufficientDataError,
    InvalidCovarianceError,
    warn,
)
from .moments import (
    Dataset,
    MomentVector,
    WEAK_COMPLIER_THRESHOLD,
    _moments,
    complier_mean,
    contributions,
)
from .rng import ReplicateStreams

__all__ = [
    "EstimateWithUncertainty",
    "ObservableSE",
    "gradient",
    "sample_covariance",
    "CovarianceMatrix",
    "covariance_of",
    "plugin_se",
    "plugin_estimate",
    "bootstrap_se",
    "bootstrap_share_se",
    "confidence_interval",
    "observable_strata_se",
    "strata_share_se",
    "complier_mean_from_moments",
]

NEGATIVE_TOLERANCE = 1e-10
DISCARD_CAP_FACTOR = 10


@dataclass(frozen=True)
class EstimateWithUncertainty:
    point: float
    se: float | None
    ci_low: float | None
    ci_high: float | None
    method: str
    n: int
    warnings: tuple[str, ...] = ()
    discarded: int = 0

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "method": self.method,
            "n": self.n,
            "warnings": list(self.warnings),
            "discarded": self.discarded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateWithUncertainty":
        return cls(
            point=d["point"],
            se=d["se"],
            ci_low=d["ci_low"],
            ci_high=d["ci_high"],
            method=d["method"],
            n=d["n"],
            warnings=tuple(d.get("warnings", ())),
            discarded=d.get("discarded", 0),
        )


class ObservableSE(NamedTuple):
    se_nt: float | None
    se_at: float | None
    se_sample: float | None


def complier_mean_from_moments(beta: np.ndarray) -> np.ndarray:
    """Vectorized plug-in formula over the last axis of ``beta``."""
    beta = np.asarray(beta, dtype=np.float64)
    mu, mu_vnt, mu_vat, pi_vnt, pi_vat, pi_z = np.moveaxis(beta, -1, 0)
    numerator = mu - mu_vnt / pi_z - mu_vat / (1.0 - pi_z)
    denominator = 1.0 - pi_vnt / pi_z - pi_vat / (1.0 - pi_z)
    return numerator / denominator


def gradient(m: MomentVector) -> np.ndarray:
    """Gradient of the plug-in complier mean with respect to the six moments."""
    pz = m.pi_z
    if not 0.0 < pz < 1.0:
        raise GradientUndefinedError(f"pi_z={pz} is not in (0, 1)")
    qz = 1.0 - pz
    pi_co = 1.0 - m.pi_vnt / pz - m.pi_vat / qz
    if pi_co == 0.0:
        raise GradientUndefinedError("complier share is zero")
    numerator = m.mu - m.mu_vnt / pz - m.mu_vat / qz
    co2 = pi_co * pi_co
    d_pi_z = (
        (m.pi_vat / qz**2 - m.pi_vnt / pz**2) * m.mu
        + (1.0 - m.pi_vat / qz**2) * m.mu_vnt / pz**2
        + (m.pi_vnt / pz**2 - 1.0) * m.mu_vat / qz**2
    ) / co2
    return np.array(
        [
            1.0 / pi_co,
            -1.0 / (pi_co * pz),
            -1.0 / (pi_co * qz),
            numerator / (pz * co2),
            numerator / (qz * co2),
            d_pi_z,
        ]
    )


class CovarianceMatrix(np.ndarray):
    """A 6x6 sample covariance that remembers the centered rows it came from.

    Behaves as a plain ndarray. When ``deviations`` is available the
    quadratic form ``g' S g`` is evaluated as ``||D g||^2 / (N - 1)``, which is
    non-negative by construction and exactly zero up to round-off when
    ``g . C_i`` is constant (e.g. a constant covariate); forming ``S`` first
    leaves a residue of order ``eps * |g|^2 |S|``.
    """

    deviations: np.ndarray | None

    def __new__(cls, matrix: np.ndarray, deviations: np.ndarray | None = None):
        obj = np.asarray(matrix, dtype=np.float64).view(cls)
        obj.deviations = deviations
        return obj

    def __array_finalize__(self, obj) -> None:
        self.deviations = None


def covariance_of(c: np.ndarray, center: np.ndarray | None = None) -> CovarianceMatrix:
    """Unbiased covariance of the rows of ``c``.

    Uses ``einsum`` rather than BLAS so the result does not depend on the
    number of BLAS threads.
    """
    n = c.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {n}")
    if center is None:
        center = c.mean(axis=0)
    dev = c - center
    return CovarianceMatrix(np.einsum("ni,nj->ij", dev, dev) / (n - 1), dev)


def sample_covariance(data: Dataset, covariate_index: int) -> CovarianceMatrix:
    """6x6 sample covariance (divisor N-1) of the contribution vectors."""
    z, d, x, _ = data.column(covariate_index)
    if z.shape[0] < 2:
        raise InsufficientDataError(f"need at least 2 observations, got {z.shape[0]}")
    m = _moments(z, d, x)
    return covariance_of(contributions(z, d, x), m.as_array())


def _quadratic_form(g: np.ndarray, s: np.ndarray) -> float:
    dev = getattr(s, "deviations", None)
    if dev is not None and dev.shape[1] == g.shape[0]:
        proj = np.einsum("ni,i->n", dev, g)
        return math.fsum((proj * proj).tolist()) / (dev.shape[0] - 1)
    return float(np.einsum("i,ij,j->", g, np.asarray(s), g))


def _quadratic_se(g: np.ndarray, s: np.ndarray, n: int) -> float:
    q = _quadratic_form(g, s)
    if q < -NEGATIVE_TOLERANCE:
        raise InvalidCovarianceError(f"negative quadratic form {q:.3g}")
    return math.sqrt(max(q, 0.0) / n)


def plugin_se(m: MomentVector, s: np.ndarray) -> float:
    """Delta-method standard error of the plug-in complier mean."""
    return _quadratic_se(gradient(m), s, m.n)


def confidence_interval(point: float, se: float, level: float = 0.95) -> tuple[float, float]:
    """Normal-approximation interval ``point +/- z * se``."""
    if se < 0:
        raise ValueError("se must be non-negative")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if se == 0:
        return point, point
    half = float(stats.norm.ppf(0.5 + level / 2.0)) * se
    return point - half, point + half


def plugin_estimate(
    data: Dataset,
    covariate_index: int,
    level: float = 0.95,
    weak_threshold: float = WEAK_COMPLIER_THRESHOLD,
) -> EstimateWithUncertainty:
    m = _column_moments(data, covariate_index)
    point = complier_mean(m, weak_threshold)
    se = plugin_se(m, sample_covariance(data, covariate_index))
    lo, hi = confidence_interval(point, se, level)
    return EstimateWithUncertainty(point, se, lo, hi, "plug-in", m.n)


def _column_moments(data: Dataset, covariate_index: int) -> MomentVector:
    z, d, x, _ = data.column(covariate_index)
    return _moments(z, d, x)


def _valid_for_complier(beta: np.ndarray) -> bool:
    pz = beta[5]
    if not 0.0 < pz < 1.0:
        return False
    return 1.0 - beta[3] / pz - beta[4] / (1.0 - pz) > 0.0


def _valid_for_shares(beta: np.ndarray) -> bool:
    return 0.0 < beta[5] < 1.0


def _resample_chunk(
    c: np.ndarray,
    streams: ReplicateStreams,
    indices: range,
    valid: Callable[[np.ndarray], bool],
    max_draws: int,
) -> tuple[np.ndarray, int]:
    n = c.shape[0]
    betas = np.empty((len(indices), c.shape[1]))
    draws = 0
    for row, r in enumerate(indices):
        g = streams(r)
        while True:
            draws += 1
            if draws > max_draws:
                return betas[:row], draws
            counts = np.bincount(g.integers(0, n, size=n), minlength=n)
            beta = np.einsum("i,ij->j", counts.astype(np.float64), c) / n
            if valid(beta):
                betas[row] = beta
                break
    return betas, draws


def _bootstrap_moments(
    c: np.ndarray,
    replicates: int,
    seed: int,
    valid: Callable[[np.ndarray], bool],
    workers: int = 1,
) -> tuple[np.ndarray, int]:
    """``replicates`` valid resampled moment vectors and the number discarded."""
    if replicates < 2:
        raise ValueError("replicates must be at least 2")
    streams = ReplicateStreams(seed)
    cap = int(DISCARD_CAP_FACTOR * replicates)
    if workers <= 1:
        chunks = [range(replicates)]
    else:
        bounds = np.linspace(0, replicates, workers + 1).astype(int)
        chunks = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(chunks) == 1:
        results = [_resample_chunk(c, streams, chunks[0], valid, cap)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda ch: _resample_chunk(c, streams, ch, valid, cap), chunks)
            )
    total = sum(draws for _, draws in results)
    betas = np.concatenate([b for b, _ in results])
    discarded = total - replicates
    if total > cap or betas.shape[0] < replicates:
        raise BootstrapDegenerateError(
            f"more than {cap} resamples needed for {replicates} valid replicates",
            discard_rate=discarded / max(total, 1),
        )
    return betas, discarded


def _interval(point, se, replicate_values, level, interval):
    if interval == "normal":
        return confidence_interval(point, se, level)
    if interval == "percentile":
        alpha = 1.0 - level
        lo, hi = np.quantile(replicate_values, [alpha / 2.0, 1.0 - alpha / 2.0])
        return float(lo), float(hi)
    raise ValueError(f"unknown interval type {interval!r}")


def bootstrap_se(
    data: Dataset,
    covariate_index: int,
    replicates: int = 1000,
    seed: int = 0,
    level: float = 0.95,
    interval: str = "normal",
    workers: int = 1,
    weak_threshold: float = WEAK_COMPLIER_THRESHOLD,
) -> EstimateWithUncertainty:
    """Nonparametric bootstrap of the complier mean.

    Resamples with ``pi_z`` in {0, 1} or a non-positive complier share are
    redrawn from the same replicate stream; more than ``10 * replicates``
    draws in total raises ``BootstrapDegenerateError``. The SE is the sample
    SD (ddof=1) of exactly ``replicates`` valid estimates.
    """
    z, d, x, _ = data.column(covariate_index)
    m = _moments(z, d, x)
    point = complier_mean(m, weak_threshold)
    c = contributions(z, d, x)
    betas, discarded = _bootstrap_moments(c, replicates, seed, _valid_for_complier, workers)
    values = complier_mean_from_moments(betas)
    se = float(np.std(values, ddof=1))
    lo, hi = _interval(point, se, values, level, interval)
    notes = ()
    if discarded:
        notes = (f"bootstrap-discarded:{discarded}",)
    return EstimateWithUncertainty(point, se, lo, hi, "bootstrap", m.n, notes, discarded)


def _share_gradients(m: MomentVector) -> np.ndarray:
    """Rows: gradients of (pi_nt, pi_at, pi_co) w.r.t. (pi_vnt, pi_vat, pi_z)."""
    pz = m.pi_z
    if not 0.0 < pz < 1.0:
        raise GradientUndefinedError(f"pi_z={pz} is not in (0, 1)")
    qz = 1.0 - pz
    g_nt = np.array([1.0 / pz, 0.0, -m.pi_vnt / pz**2])
    g_at = np.array([0.0, 1.0 / qz, m.pi_vat / qz**2])
    return np.vstack([g_nt, g_at, -(g_nt + g_at)])


def strata_share_se(m: MomentVector, s: np.ndarray) -> tuple[float, float, float]:
    """Delta-method SEs of the never-taker, always-taker and complier shares."""
    dev = getattr(s, "deviations", None)
    sub = CovarianceMatrix(
        np.asarray(s, dtype=np.float64)[3:, 3:], None if dev is None else dev[:, 3:]
    )
    grads = _share_gradients(m)
    return tuple(_quadratic_se(g, sub, m.n) for g in grads)


def bootstrap_share_se(
    data: Dataset, replicates: int = 1000, seed: int = 0, workers: int = 1
) -> tuple[float, float, float]:
    """Bootstrap SEs of the never-taker, always-taker and complier shares."""
    c = contributions(data.z, data.d, np.ones(data.n))
    betas, _ = _bootstrap_moments(c, replicates, seed, _valid_for_shares, workers)
    pi_nt = betas[:, 3] / betas[:, 5]
    pi_at = betas[:, 4] / (1.0 - betas[:, 5])
    pi_co = 1.0 - pi_nt - pi_at
    return tuple(float(np.std(v, ddof=1)) for v in (pi_nt, pi_at, pi_co))


def _cell_se(values: np.ndarray, label: str) -> float | None:
    n = values.shape[0]
    if n < 2:
        warn(f"{label} has {n} unit(s); standard error undefined", code="cell-too-small")
        return None
    mean = math.fsum(values.tolist()) / n
    var = math.fsum(((values - mean) ** 2).tolist()) / (n - 1)
    return math.sqrt(var / n)


def observable_strata_se(data: Dataset, covariate_index: int) -> ObservableSE:
    """Within-cell standard errors ``s / sqrt(n)``."""
    z, d, x, _ = data.column(covariate_index)
    return ObservableSE(
        se_nt=_cell_se(x[(z == 1) & (d == 0)], "never-taker cell"),
        se_at=_cell_se(x[(z == 0) & (d == 1)], "always-taker cell"),
        se_sample=_cell_se(x, "sample"),
    )

