"""Monte Carlo data-generating processes and the coverage experiment.

Two DGPs, both following the latent-strata model in which a unit's
treatment is 0 for never-takers, 1 for always-takers and equal to the
instrument for compliers:

* ``fixed``: equal strata shares, ``P(Z=1) = 0.75`` and normal covariates
  with (mean, sd) = (2, 0.5) for compliers, (1, 1) for never-takers and
  (0.5, 2) for always-takers.
* ``random``: per dataset, shares from a flat Dirichlet with every share
  at least 0.1 (rejection sampling), ``P(Z=1) ~ U(0.1, 0.9)``, strata means
  ``~ U(-2, 2)`` and strata SDs ``~ U(0.25, 2)``.

Every replication draws from its own substream addressed by
``(variant, n, replication)``, so tallies do not depend on ``workers``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from .errors import (
    BootstrapDegenerateError,
    DegenerateInstrumentError,
    DGPRejectionOverflowError,
    EmptyDataError,
    EmptyStratumError,
    GradientUndefinedError,
    MonotonicityViolationError,
    ProfilingWarning,
)
from .moments import Dataset, _moments, complier_mean, contributions
from .rng import ALGORITHM, derive_seed, substream
from .variance import (
    _bootstrap_moments,
    _valid_for_complier,
    complier_mean_from_moments,
    confidence_interval,
    covariance_of,
    plugin_se,
)

__all__ = [
    "NT",
    "AT",
    "CO",
    "SIZE_GRID",
    "DGPParams",
    "FixedDGPConfig",
    "RandomDGPConfig",
    "LabeledDataset",
    "ReplicationOutcome",
    "CoverageRow",
    "CoverageResult",
    "generate_fixed",
    "generate_random",
    "oracle_complier_mean",
    "replicate",
    "run_replications",
    "tally",
    "run_coverage_experiment",
]

NT, AT, CO = 0, 1, 2
STRATUM_NAMES = ("nt", "at", "co")
SIZE_GRID = (500, 750, 1000, 1500, 2000, 3000, 4000, 6000, 8000, 12000, 16000, 20000, 24000)
VARIANTS = {"fixed": 1, "random": 2}
EXCLUDABLE = (
    MonotonicityViolationError,
    DegenerateInstrumentError,
    GradientUndefinedError,
    BootstrapDegenerateError,
    EmptyDataError,
)


@dataclass(frozen=True)
class DGPParams:
    """Population parameters, each triple ordered (never-taker, always-taker, complier)."""

    shares: tuple[float, float, float]
    pi_z: float
    means: tuple[float, float, float]
    sds: tuple[float, float, float]

    @property
    def mu_co(self) -> float:
        return self.means[CO]


@dataclass(frozen=True)
class FixedDGPConfig:
    n: int
    seed: int = 0
    shares: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    pi_z: float = 0.75
    means: tuple[float, float, float] = (1.0, 0.5, 2.0)
    sds: tuple[float, float, float] = (1.0, 2.0, 0.5)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if abs(sum(self.shares) - 1.0) > 1e-12 or min(self.shares) < 0:
            raise ValueError("shares must be non-negative and sum to 1")
        if min(self.sds) <= 0:
            raise ValueError("standard deviations must be positive")
        if not 0.0 < self.pi_z < 1.0:
            raise ValueError("pi_z must lie in (0, 1)")

    def params(self) -> DGPParams:
        return DGPParams(tuple(self.shares), self.pi_z, tuple(self.means), tuple(self.sds))


@dataclass(frozen=True)
class RandomDGPConfig:
    n: int
    seed: int = 0
    min_share: float = 0.1
    pi_z_range: tuple[float, float] = (0.1, 0.9)
    mean_range: tuple[float, float] = (-2.0, 2.0)
    sd_range: tuple[float, float] = (0.25, 2.0)
    max_rejections: int = 10_000

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.min_share < 1.0 / 3.0:
            raise ValueError("min_share must lie in [0, 1/3)")


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    data: Dataset
    strata: np.ndarray
    params: DGPParams

    @property
    def true_mu_co(self) -> float:
        return self.params.mu_co


def _draw(rng: np.random.Generator, n: int, params: DGPParams) -> LabeledDataset:
    strata = rng.choice(3, size=n, p=np.asarray(params.shares))
    z = (rng.random(n) < params.pi_z).astype(np.int8)
    eps = rng.standard_normal(n)
    x = np.asarray(params.means)[strata] + np.asarray(params.sds)[strata] * eps
    d = np.where(strata == NT, 0, np.where(strata == AT, 1, z)).astype(np.int8)
    data = Dataset(z=z, d=d, x=x.reshape(-1, 1), covariate_names=("x",))
    return LabeledDataset(data=data, strata=strata.astype(np.int8), params=params)


def generate_fixed(config: FixedDGPConfig) -> LabeledDataset:
    return _draw(substream(config.seed), config.n, config.params())


def generate_random(config: RandomDGPConfig) -> LabeledDataset:
    """Draw DGP parameters, then a dataset; the parameters ride along in ``params``."""
    rng = substream(config.seed)
    for _ in range(config.max_rejections):
        shares = rng.dirichlet(np.ones(3))
        if shares.min() >= config.min_share:
            break
    else:
        raise DGPRejectionOverflowError(
            f"no Dirichlet draw with all shares >= {config.min_share} "
            f"in {config.max_rejections} attempts"
        )
    pi_z = rng.uniform(*config.pi_z_range)
    means = rng.uniform(*config.mean_range, size=3)
    sds = rng.uniform(*config.sd_range, size=3)
    params = DGPParams(
        shares=tuple(float(s) for s in shares),
        pi_z=float(pi_z),
        means=tuple(float(m) for m in means),
        sds=tuple(float(s) for s in sds),
    )
    return _draw(rng, config.n, params)


def oracle_complier_mean(d: LabeledDataset) -> float:
    """Sample mean of the covariate over units whose true stratum is complier."""
    mask = d.strata == CO
    if not mask.any():
        raise EmptyStratumError("no units labeled complier")
    return math.fsum(d.data.x[mask, 0].tolist()) / int(mask.sum())


@dataclass(frozen=True)
class ReplicationOutcome:
    n: int
    rep: int
    true_mu_co: float
    oracle: float
    point: float = math.nan
    se_plugin: float = math.nan
    se_bootstrap: float = math.nan
    excluded: str | None = None


def _generate(variant: str, n: int, seed: int) -> LabeledDataset:
    if variant == "fixed":
        return generate_fixed(FixedDGPConfig(n=n, seed=seed))
    if variant == "random":
        return generate_random(RandomDGPConfig(n=n, seed=seed))
    raise ValueError(f"unknown variant {variant!r}")


def replicate(variant: str, n: int, rep: int, seed: int, bootstrap_B: int = 0) -> ReplicationOutcome:
    """One Monte Carlo replication: generate, estimate, plug-in and bootstrap SEs."""
    rep_seed = derive_seed(seed, VARIANTS[variant], n, rep)
    ld = _generate(variant, n, rep_seed)
    oracle = oracle_complier_mean(ld) if (ld.strata == CO).any() else math.nan
    base = dict(n=n, rep=rep, true_mu_co=ld.true_mu_co, oracle=oracle)
    z, d, x = ld.data.z, ld.data.d, ld.data.x[:, 0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ProfilingWarning)
            m = _moments(z, d, x)
            point = complier_mean(m)
        c = contributions(z, d, x)
        se_p = plugin_se(m, covariance_of(c, m.as_array()))
        se_b = math.nan
        if bootstrap_B > 0:
            betas, _ = _bootstrap_moments(
                c, bootstrap_B, derive_seed(rep_seed, 1), _valid_for_complier
            )
            se_b = float(np.std(complier_mean_from_moments(betas), ddof=1))
    except EXCLUDABLE as exc:
        return ReplicationOutcome(**base, excluded=exc.code)
    return ReplicationOutcome(**base, point=point, se_plugin=se_p, se_bootstrap=se_b)


def _replicate_task(args: tuple) -> ReplicationOutcome:
    return replicate(*args)


def run_replications(
    variant: str,
    n: int,
    reps: int,
    seed: int,
    bootstrap_B: int = 0,
    workers: int = 1,
) -> list[ReplicationOutcome]:
    """All replications at one sample size, in replication order."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    tasks = [(variant, n, r, seed, bootstrap_B) for r in range(reps)]
    if workers <= 1:
        return [_replicate_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_replicate_task, tasks, chunksize=max(1, reps // (4 * workers))))


@dataclass(frozen=True)
class CoverageRow:
    variant: str
    n: int
    method: str
    reps: int
    valid: int
    excluded: int
    coverage: float
    mc_half_width: float
    ribbon_low: float
    ribbon_high: float
    mean_se: float
    empirical_sd: float
    rmse_se: float
    rmse_se_scaled: float
    bias: float
    rmse_estimate: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class CoverageResult:
    variant: str
    sizes: tuple[int, ...]
    reps: int
    bootstrap_B: int
    seed: int
    level: float
    rows: tuple[CoverageRow, ...]
    excluded_codes: dict[int, dict[str, int]] = field(default_factory=dict)

    @property
    def metadata(self) -> dict:
        return {
            "tool": "complierprofile",
            "version": __version__,
            "rng": ALGORITHM,
            "variant": self.variant,
            "sizes": list(self.sizes),
            "reps": self.reps,
            "bootstrap_B": self.bootstrap_B,
            "seed": self.seed,
            "level": self.level,
            "excluded_codes": {str(k): v for k, v in self.excluded_codes.items()},
        }

    def row(self, n: int, method: str) -> CoverageRow:
        for r in self.rows:
            if r.n == n and r.method == method:
                return r
        raise KeyError((n, method))


def tally(variant: str, n: int, method: str, outcomes, level: float, reps: int) -> CoverageRow:
    """Summarize replication outcomes for one size and interval method."""
    ok = [o for o in outcomes if o.excluded is None]
    attr = "se_plugin" if method == "plug-in" else "se_bootstrap"
    points = np.array([o.point for o in ok])
    ses = np.array([getattr(o, attr) for o in ok])
    truth = np.array([o.true_mu_co for o in ok])
    covered = 0
    for p, s, t in zip(points.tolist(), ses.tolist(), truth.tolist()):
        lo, hi = confidence_interval(p, s, level)
        covered += int(lo <= t <= hi)
    valid = len(ok)
    nan = math.nan
    coverage = covered / valid if valid else nan
    half = 1.959963984540054 * math.sqrt(coverage * (1 - coverage) / valid) if valid else nan
    errors = points - truth
    bias = float(errors.mean()) if valid else nan
    rmse_est = float(np.sqrt(np.mean(errors**2))) if valid else nan
    mean_se = float(ses.mean()) if valid else nan
    # the SD of point estimates only targets one SE when the DGP is fixed
    if variant == "fixed" and valid > 1:
        emp_sd = float(np.std(points, ddof=1))
        rmse_se = float(np.sqrt(np.mean((ses - emp_sd) ** 2)))
    else:
        emp_sd = rmse_se = nan
    return CoverageRow(
        variant=variant,
        n=n,
        method=method,
        reps=reps,
        valid=valid,
        excluded=reps - valid,
        coverage=coverage,
        mc_half_width=half,
        ribbon_low=max(0.0, coverage - half) if valid else nan,
        ribbon_high=min(1.0, coverage + half) if valid else nan,
        mean_se=mean_se,
        empirical_sd=emp_sd,
        rmse_se=rmse_se,
        rmse_se_scaled=rmse_se * n,
        bias=bias,
        rmse_estimate=rmse_est,
    )


def run_coverage_experiment(
    variant: str,
    sizes: Sequence[int] = SIZE_GRID,
    reps: int = 1000,
    bootstrap_B: int = 1000,
    seed: int = 0,
    level: float = 0.95,
    workers: int = 1,
) -> CoverageResult:
    """Coverage of plug-in (and, when ``bootstrap_B > 0``, bootstrap) intervals.

    Replications whose sample violates the estimator's preconditions are
    excluded from the denominators; their counts by error code are kept in
    ``excluded_codes``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if not sizes:
        raise ValueError("sizes must be non-empty")
    methods = ["plug-in"] + (["bootstrap"] if bootstrap_B > 0 else [])
    rows = []
    excluded: dict[int, dict[str, int]] = {}
    for n in sizes:
        outcomes = run_replications(variant, int(n), reps, seed, bootstrap_B, workers)
        codes: dict[str, int] = {}
        for o in outcomes:
            if o.excluded is not None:
                codes[o.excluded] = codes.get(o.excluded, 0) + 1
        if codes:
            excluded[int(n)] = codes
        rows.extend(tally(variant, int(n), m, outcomes, level, reps) for m in methods)
    return CoverageResult(
        variant=variant,
        sizes=tuple(int(n) for n in sizes),
        reps=reps,
        bootstrap_B=bootstrap_B,
        seed=seed,
        level=level,
        rows=tuple(rows),
        excluded_codes=excluded,
    )
