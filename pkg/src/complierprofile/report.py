"""CSV ingestion, the profiling pipeline and report emission.

Exit codes returned by :func:`run_profile` (and the CLI):

====  =====================================================================
code  meaning
====  =====================================================================
0     success (warnings never change the exit status)
1     unreadable or invalid input: ``input-error``, ``empty-data``,
      ``degenerate-instrument``, ``insufficient-data``
2     ``monotonicity-or-relevance-violation`` (complier share <= 0)
3     estimation failure: ``bootstrap-degenerate``, ``invalid-covariance``,
      ``gradient-undefined``
4     ``report-integrity``: an internal consistency check failed
====  =====================================================================
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .errors import (
    BootstrapDegenerateError,
    DegenerateInstrumentError,
    EmptyDataError,
    GradientUndefinedError,
    InputError,
    InsufficientDataError,
    InvalidCovarianceError,
    MonotonicityViolationError,
    ProfilingError,
    ProfilingWarning,
    ReportIntegrityError,
)
from .moments import (
    Dataset,
    StrataMeans,
    StrataShares,
    complier_mean,
    compute_moments,
    contributions,
    decomposition_residual,
    observable_strata_means,
    share_moments,
    strata_shares,
)
from .rng import derive_seed
from .simulate import CoverageResult
from .variance import (
    EstimateWithUncertainty,
    bootstrap_se,
    bootstrap_share_se,
    confidence_interval,
    covariance_of,
    observable_strata_se,
    plugin_se,
    sample_covariance,
    strata_share_se,
)

SCHEMA_VERSION = "1.0"
IDENTITY_TOLERANCE = 1e-10
NA_TOKENS = frozenset({"", "na", "nan", "null", "none", ".", "n/a"})

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MONOTONICITY = 2
EXIT_ESTIMATION = 3
EXIT_INTERNAL = 4

EXIT_CODES = {
    InputError: EXIT_INPUT,
    EmptyDataError: EXIT_INPUT,
    DegenerateInstrumentError: EXIT_INPUT,
    InsufficientDataError: EXIT_INPUT,
    MonotonicityViolationError: EXIT_MONOTONICITY,
    BootstrapDegenerateError: EXIT_ESTIMATION,
    InvalidCovarianceError: EXIT_ESTIMATION,
    GradientUndefinedError: EXIT_ESTIMATION,
    ReportIntegrityError: EXIT_INTERNAL,
}

STRATA = ("complier", "always_taker", "never_taker", "sample")
STRATUM_LABELS = {
    "complier": "Complier",
    "always_taker": "Always-taker",
    "never_taker": "Never-taker",
    "sample": "Sample",
}


def exit_code_for(exc: ProfilingError) -> int:
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return EXIT_ESTIMATION


@dataclass(frozen=True)
class RunConfig:
    input: str | Path
    instrument: str = "z"
    treatment: str = "d"
    covariates: tuple[str, ...] | None = None
    se: str = "plugin"
    boot: int = 1000
    level: float = 0.95
    seed: int = 0
    format: str = "text"
    match_id: str | None = None
    weak_threshold: float = 0.01
    interval: str = "normal"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.instrument == self.treatment:
            raise ValueError("instrument and treatment columns must differ")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if self.se not in ("plugin", "bootstrap", "both"):
            raise ValueError(f"unknown SE method {self.se!r}")
        if self.format not in ("text", "json", "csv"):
            raise ValueError(f"unknown format {self.format!r}")
        if self.se != "plugin" and self.boot < 2:
            raise ValueError("bootstrap needs at least 2 replicates")


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def _parse_number(cell: str) -> float | None:
    text = cell.strip()
    if text.lower() in NA_TOKENS:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _parse_binary(cell: str, row: int, column: str) -> int:
    value = _parse_number(cell)
    if value not in (0.0, 1.0):
        raise InputError(
            f"row {row}, column {column}: expected 0 or 1, got {cell.strip()!r}",
            row=row,
            column=column,
        )
    return int(value)


def _read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise InputError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if all(_parse_number(h) is not None for h in header):
        raise InputError(f"{path} has no header row")
    if len(set(header)) != len(header):
        raise InputError(f"{path} has duplicate column names")
    return header, rows[1:]


def _select_covariates(header, body, config: RunConfig) -> list[str]:
    reserved = {config.instrument, config.treatment}
    if config.match_id:
        reserved.add(config.match_id)
    if config.covariates is not None:
        missing = [c for c in config.covariates if c not in header]
        if missing:
            raise InputError(f"covariate column(s) not found: {', '.join(missing)}")
        clash = [c for c in config.covariates if c in reserved]
        if clash:
            raise InputError(f"reserved column(s) used as covariates: {', '.join(clash)}")
        return list(config.covariates)
    chosen = []
    for j, name in enumerate(header):
        if name in reserved:
            continue
        if any(j < len(r) and _parse_number(r[j]) is not None for r in body):
            chosen.append(name)
    return chosen


def _build_dataset(header: list[str], body: list[list[str]], config: RunConfig) -> Dataset:
    for col in (config.instrument, config.treatment):
        if col not in header:
            raise InputError(f"column {col!r} not found in header")
    if config.match_id and config.match_id not in header:
        raise InputError(f"match id column {config.match_id!r} not found in header")
    names = _select_covariates(header, body, config)
    if not names:
        raise InputError("no numeric covariate columns to profile")
    zi, di = header.index(config.instrument), header.index(config.treatment)
    xi = [header.index(c) for c in names]
    z = np.empty(len(body), dtype=np.int8)
    d = np.empty(len(body), dtype=np.int8)
    x = np.full((len(body), len(names)), np.nan)
    for i, r in enumerate(body):
        row = i + 1
        if len(r) != len(header):
            raise InputError(
                f"row {row}: {len(r)} fields, header has {len(header)}", row=row
            )
        z[i] = _parse_binary(r[zi], row, config.instrument)
        d[i] = _parse_binary(r[di], row, config.treatment)
        for k, j in enumerate(xi):
            v = _parse_number(r[j])
            if v is not None:
                x[i, k] = v
    return Dataset(z=z, d=d, x=x, covariate_names=tuple(names))


def ingest_csv(path: str | Path, config: RunConfig) -> Dataset:
    """Read and validate a CSV file.

    Instrument and treatment cells must be 0 or 1; anything else is an
    ``InputError`` naming the 1-based data row and the column. Covariate
    cells that are empty, NA-like, non-numeric or infinite become NaN, which
    drops that row for that covariate only; ``Dataset.column`` reports the
    count.
    """
    header, body = _read_table(path)
    return _build_dataset(header, body, config)


# ---------------------------------------------------------------------------
# report types
# ---------------------------------------------------------------------------


def _est_to_dict(e: EstimateWithUncertainty | None) -> dict | None:
    return None if e is None else e.to_dict()


def _est_from_dict(d: dict | None) -> EstimateWithUncertainty | None:
    return None if d is None else EstimateWithUncertainty.from_dict(d)


@dataclass(frozen=True)
class CovariateProfile:
    """One covariate's row of the report.

    ``complier`` holds one estimate per SE method (plug-in first).
    ``shares`` are the (never-taker, always-taker, complier) shares on this
    covariate's complete cases, used for the decomposition check.
    """

    name: str
    n: int
    dropped: int
    complier: tuple[EstimateWithUncertainty, ...]
    always_taker: EstimateWithUncertainty | None
    never_taker: EstimateWithUncertainty | None
    sample: EstimateWithUncertainty
    shares: tuple[float, float, float]
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "dropped": self.dropped,
            "complier": [e.to_dict() for e in self.complier],
            "always_taker": _est_to_dict(self.always_taker),
            "never_taker": _est_to_dict(self.never_taker),
            "sample": self.sample.to_dict(),
            "shares": list(self.shares),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CovariateProfile":
        return cls(
            name=d["name"],
            n=d["n"],
            dropped=d["dropped"],
            complier=tuple(EstimateWithUncertainty.from_dict(e) for e in d["complier"]),
            always_taker=_est_from_dict(d["always_taker"]),
            never_taker=_est_from_dict(d["never_taker"]),
            sample=EstimateWithUncertainty.from_dict(d["sample"]),
            shares=tuple(d["shares"]),
            warnings=tuple(d.get("warnings", ())),
        )


@dataclass(frozen=True)
class SharesProfile:
    """Strata proportions; each stratum carries one estimate per SE method."""

    never_taker: tuple[EstimateWithUncertainty, ...]
    always_taker: tuple[EstimateWithUncertainty, ...]
    complier: tuple[EstimateWithUncertainty, ...]

    def to_dict(self) -> dict:
        return {
            k: [e.to_dict() for e in getattr(self, k)]
            for k in ("complier", "always_taker", "never_taker")
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SharesProfile":
        return cls(
            **{
                k: tuple(EstimateWithUncertainty.from_dict(e) for e in d[k])
                for k in ("never_taker", "always_taker", "complier")
            }
        )


@dataclass(frozen=True)
class ProfileReport:
    covariates: tuple[CovariateProfile, ...] = ()
    shares: SharesProfile | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "metadata": self.metadata,
            "shares": None if self.shares is None else self.shares.to_dict(),
            "covariates": [c.to_dict() for c in self.covariates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProfileReport":
        return cls(
            covariates=tuple(CovariateProfile.from_dict(c) for c in d["covariates"]),
            shares=None if d["shares"] is None else SharesProfile.from_dict(d["shares"]),
            metadata=d["metadata"],
        )


def verify_report(r: ProfileReport) -> None:
    """Re-check the decomposition identity and the shares row.

    Raises ``ReportIntegrityError``; a failure means a bug in this package.
    """
    for c in r.covariates:
        pi_nt, pi_at, pi_co = c.shares
        shares = StrataShares(pi_nt=pi_nt, pi_at=pi_at, pi_co=pi_co, first_stage=pi_co)
        means = StrataMeans(
            mu_co=c.complier[0].point,
            mu_at=None if c.always_taker is None else c.always_taker.point,
            mu_nt=None if c.never_taker is None else c.never_taker.point,
            mu_sample=c.sample.point,
        )
        gap = decomposition_residual(shares, means)
        if not gap <= IDENTITY_TOLERANCE:
            raise ReportIntegrityError(
                f"decomposition identity fails for {c.name!r}: relative gap {gap:.3g}"
            )
        if abs(sum(c.shares) - 1.0) > 1e-12:
            raise ReportIntegrityError(f"shares for {c.name!r} do not sum to 1")
    if r.shares is not None:
        total = r.shares.never_taker[0].point + r.shares.always_taker[0].point
        total += r.shares.complier[0].point
        if abs(total - 1.0) > 1e-12:
            raise ReportIntegrityError("strata shares do not sum to 1")


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def _cell_estimate(point, se, n, level) -> EstimateWithUncertainty:
    if se is None:
        return EstimateWithUncertainty(point, None, None, None, "within-cell", n)
    lo, hi = confidence_interval(point, se, level)
    return EstimateWithUncertainty(point, se, lo, hi, "within-cell", n)


def _profile_covariate(data: Dataset, k: int, config: RunConfig) -> CovariateProfile:
    name = data.covariate_names[k]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ProfilingWarning)
        z, d, x, dropped = data.column(k)
        m = compute_moments(data, k)
        sh = strata_shares(m)
        point = complier_mean(m, config.weak_threshold)
        complier = []
        if config.se in ("plugin", "both"):
            se = plugin_se(m, sample_covariance(data, k))
            lo, hi = confidence_interval(point, se, config.level)
            complier.append(EstimateWithUncertainty(point, se, lo, hi, "plug-in", m.n))
        if config.se in ("bootstrap", "both"):
            complier.append(
                bootstrap_se(
                    data,
                    k,
                    replicates=config.boot,
                    seed=derive_seed(config.seed, 1, k),
                    level=config.level,
                    interval=config.interval,
                    workers=config.workers,
                    weak_threshold=config.weak_threshold,
                )
            )
        means = observable_strata_means(data, k)
        ses = observable_strata_se(data, k)
    n_nt = int(((z == 1) & (d == 0)).sum())
    n_at = int(((z == 0) & (d == 1)).sum())
    never = None if means.mu_nt is None else _cell_estimate(means.mu_nt, ses.se_nt, n_nt, config.level)
    always = None if means.mu_at is None else _cell_estimate(means.mu_at, ses.se_at, n_at, config.level)
    codes = tuple(dict.fromkeys(f"{w.message.code}: {w.message}" for w in caught
                                if isinstance(w.message, ProfilingWarning)))
    return CovariateProfile(
        name=name,
        n=m.n,
        dropped=dropped,
        complier=tuple(complier),
        always_taker=always,
        never_taker=never,
        sample=_cell_estimate(m.mu, ses.se_sample, m.n, config.level),
        shares=(sh.pi_nt, sh.pi_at, sh.pi_co),
        warnings=codes,
    )


def _profile_shares(data: Dataset, config: RunConfig) -> SharesProfile:
    m = share_moments(data)
    sh = strata_shares(m)
    points = (sh.pi_nt, sh.pi_at, sh.pi_co)
    per_stratum: list[list[EstimateWithUncertainty]] = [[], [], []]
    if config.se in ("plugin", "both"):
        c = contributions(data.z, data.d, np.ones(data.n))
        ses = strata_share_se(m, covariance_of(c, m.as_array()))
        for i, (p, s) in enumerate(zip(points, ses)):
            lo, hi = confidence_interval(p, s, config.level)
            per_stratum[i].append(EstimateWithUncertainty(p, s, lo, hi, "plug-in", m.n))
    if config.se in ("bootstrap", "both"):
        ses = bootstrap_share_se(
            data, config.boot, derive_seed(config.seed, 0), config.workers
        )
        for i, (p, s) in enumerate(zip(points, ses)):
            lo, hi = confidence_interval(p, s, config.level)
            per_stratum[i].append(EstimateWithUncertainty(p, s, lo, hi, "bootstrap", m.n))
    return SharesProfile(*(tuple(e) for e in per_stratum))


def profile_dataset(data: Dataset, config: RunConfig, notes: Sequence[str] = ()) -> ProfileReport:
    """Run the estimation pipeline on an in-memory dataset."""
    metadata: dict[str, Any] = {
        "tool": "complierprofile",
        "version": __version__,
        "n": data.n,
        "se_method": config.se,
        "bootstrap_replicates": config.boot if config.se != "plugin" else None,
        "level": config.level,
        "seed": config.seed,
        "dropped": {},
        "warnings": [],
        "notes": list(notes),
        "error": None,
    }
    if data.n == 0:
        raise EmptyDataError("no observations")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ProfilingWarning)
        shares = _profile_shares(data, config)
    run_warnings = [f"{w.message.code}: {w.message}" for w in caught
                    if isinstance(w.message, ProfilingWarning)]
    if shares.never_taker[0].point == 0.0 or shares.always_taker[0].point == 0.0:
        run_warnings.append("one-sided-compliance: at least one noncomplier cell is empty")
    covariates = tuple(_profile_covariate(data, k, config) for k in range(data.k))
    metadata["dropped"] = {c.name: c.dropped for c in covariates}
    all_warnings = list(run_warnings)
    for c in covariates:
        all_warnings.extend(f"{c.name}: {w}" for w in c.warnings)
    metadata["warnings"] = list(dict.fromkeys(all_warnings))
    report = ProfileReport(covariates=covariates, shares=shares, metadata=metadata)
    verify_report(report)
    return report


def run_profile(config: RunConfig) -> tuple[int, ProfileReport]:
    """Ingest, estimate and verify. Never raises for data problems.

    Returns the exit status and a report; on failure the report carries
    ``metadata["error"] = {"code", "message", ...}``.
    """
    notes = []
    if config.match_id:
        notes.append(
            f"match id column {config.match_id!r} present; estimates are unconditional "
            "on the matching variables (valid for matched samples)"
        )
    base_meta = {"tool": "complierprofile", "version": __version__, "seed": config.seed,
                 "notes": notes}
    try:
        data = ingest_csv(config.input, config)
        return EXIT_OK, profile_dataset(data, config, notes)
    except ProfilingError as exc:
        meta = dict(base_meta, error=exc.to_dict())
        return exit_code_for(exc), ProfileReport(metadata=meta)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def fmt_sig(value: float | None, digits: int = 4) -> str:
    """Fixed, locale-independent formatting to ``digits`` significant digits."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "undefined"
    text = format(float(value), f"#.{digits}g")
    if "e" in text:
        mantissa, exp = text.split("e")
        return mantissa.rstrip(".") + "e" + exp
    if text.endswith("."):
        text = text[:-1]
    if text == "-0.000":
        text = "0.000"
    return text


def _cell_text(estimates: Sequence[EstimateWithUncertainty] | None) -> str:
    if not estimates or estimates[0] is None:
        return "undefined"
    first = estimates[0]
    out = f"{fmt_sig(first.point)} ({fmt_sig(first.se)})"
    if len(estimates) > 1:
        out += f" [{fmt_sig(estimates[1].se)}]"
    return out


def _text_report(r: ProfileReport) -> str:
    meta = r.metadata
    lines = []
    if meta.get("error"):
        err = meta["error"]
        lines.append(f"error [{err['code']}]: {err['message']}")
        return "\n".join(lines) + "\n"
    se_method = meta.get("se_method", "plugin")
    legend = {
        "plugin": "mean (plug-in SE)",
        "bootstrap": "mean (bootstrap SE)",
        "both": "mean (plug-in SE) [bootstrap SE]",
    }[se_method]
    lines.append(f"Strata profile: N = {meta.get('n')}; cells show {legend}")
    header = ["Variable"] + [STRATUM_LABELS[s] for s in STRATA]
    table = [header]
    if r.shares is not None:
        one = EstimateWithUncertainty(1.0, 0.0, 1.0, 1.0, "plug-in", meta.get("n", 0))
        table.append(
            ["Proportion", _cell_text(r.shares.complier), _cell_text(r.shares.always_taker),
             _cell_text(r.shares.never_taker), _cell_text([one])]
        )
    for c in r.covariates:
        name = c.name if not c.dropped else f"{c.name} (n={c.n})"
        table.append(
            [name, _cell_text(c.complier), _cell_text([c.always_taker]),
             _cell_text([c.never_taker]), _cell_text([c.sample])]
        )
    widths = [max(len(row[j]) for row in table) for j in range(len(header))]
    for row in table:
        cells = [row[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    if meta.get("dropped") and any(meta["dropped"].values()):
        dropped = ", ".join(f"{k}={v}" for k, v in meta["dropped"].items() if v)
        lines.append(f"Rows dropped for missing values: {dropped}")
    for w in meta.get("warnings", []):
        lines.append(f"warning: {w}")
    for note in meta.get("notes", []):
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def _num(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def _csv_report(r: ProfileReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variable", "stratum", "method", "point", "se", "ci_low", "ci_high", "n"])
    if r.shares is not None:
        for s in ("complier", "always_taker", "never_taker"):
            for e in getattr(r.shares, s):
                w.writerow(["proportion", s, e.method, _num(e.point), _num(e.se),
                            _num(e.ci_low), _num(e.ci_high), e.n])
    for c in r.covariates:
        cells = [("complier", e) for e in c.complier] + [
            ("always_taker", c.always_taker),
            ("never_taker", c.never_taker),
            ("sample", c.sample),
        ]
        for s, e in cells:
            if e is None:
                w.writerow([c.name, s, "undefined", "", "", "", "", 0])
            else:
                w.writerow([c.name, s, e.method, _num(e.point), _num(e.se),
                            _num(e.ci_low), _num(e.ci_high), e.n])
    return buf.getvalue()


def emit_report(r: ProfileReport, format: str = "text") -> bytes:
    """Serialize a report; identical reports give identical bytes."""
    if r.covariates:
        verify_report(r)
    if format == "json":
        text = json.dumps(r.to_dict(), indent=2) + "\n"
    elif format == "csv":
        text = _csv_report(r)
    elif format == "text":
        text = _text_report(r)
    else:
        raise ValueError(f"unknown format {format!r}")
    return text.encode("utf-8")


def parse_report(payload: bytes) -> ProfileReport:
    """Inverse of ``emit_report(..., "json")``."""
    d = json.loads(payload.decode("utf-8"))
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
    return ProfileReport.from_dict(d)


COVERAGE_COLUMNS = (
    "variant", "n", "method", "reps", "valid", "excluded", "coverage", "mc_half_width",
    "ribbon_low", "ribbon_high", "mean_se", "empirical_sd", "rmse_se", "rmse_se_scaled",
    "bias", "rmse_estimate",
)


def _jsonable(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def emit_coverage(result: CoverageResult, format: str = "csv") -> bytes:
    """One row per (variant, N, method), plus run metadata (json/text only)."""
    if format == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "metadata": result.metadata,
            "rows": [{k: _jsonable(v) for k, v in r.to_dict().items()} for r in result.rows],
        }
        return (json.dumps(payload, indent=2) + "\n").encode("utf-8")
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COVERAGE_COLUMNS)
        for r in result.rows:
            d = r.to_dict()
            w.writerow([_num(d[k]) if isinstance(d[k], float) and not math.isnan(d[k])
                        else ("" if isinstance(d[k], float) else d[k]) for k in COVERAGE_COLUMNS])
        return buf.getvalue().encode("utf-8")
    if format == "text":
        meta = result.metadata
        lines = [
            f"Coverage of {int(result.level * 100)}% intervals, {meta['variant']} DGP, "
            f"{meta['reps']} replications, seed {meta['seed']}",
            f"{'N':>6}  {'method':<9}  {'coverage':>8}  {'+/-':>6}  {'mean SE':>9}  "
            f"{'emp. SD':>9}  {'excl':>4}",
        ]
        for r in result.rows:
            lines.append(
                f"{r.n:>6}  {r.method:<9}  {fmt_sig(r.coverage, 3):>8}  "
                f"{fmt_sig(r.mc_half_width, 2):>6}  {fmt_sig(r.mean_se):>9}  "
                f"{fmt_sig(r.empirical_sd):>9}  {r.excluded:>4}"
            )
        lines.append(f"rng: {meta['rng']}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {format!r}")
