import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from complierprofile.errors import ReportIntegrityError
from complierprofile.report import (
    EXIT_INPUT,
    EXIT_MONOTONICITY,
    EXIT_OK,
    RunConfig,
    emit_report,
    fmt_sig,
    ingest_csv,
    parse_report,
    profile_dataset,
    run_profile,
    verify_report,
)

from conftest import TEN_OBS, make_dataset, write_csv

DATA = Path(__file__).parent / "data"
TEN_OBS_PLUGIN_SE = math.sqrt(21) / 6


def _exact_share_se(rows):
    """Delta-method SE of the complier share, in exact rational arithmetic."""
    n = len(rows)
    cols = [[Fraction(z * (1 - d)), Fraction((1 - z) * d), Fraction(z)] for z, d, _ in rows]
    mean = [sum(c[j] for c in cols) / n for j in range(3)]
    cov = [[sum((c[i] - mean[i]) * (c[j] - mean[j]) for c in cols) / (n - 1)
            for j in range(3)] for i in range(3)]
    a, b, p = mean
    g = [-1 / p, -1 / (1 - p), a / p**2 - b / (1 - p) ** 2]
    q = sum(g[i] * cov[i][j] * g[j] for i in range(3) for j in range(3))
    return math.sqrt(q / n)


def _run(path, **kw):
    status, report = run_profile(RunConfig(input=path, **kw))
    return status, report


# -- ingestion ----------------------------------------------------------------


def test_ingest_ten_obs(ten_obs_csv):
    data = ingest_csv(ten_obs_csv, RunConfig(input=ten_obs_csv))
    assert (data.n, data.k, data.covariate_names) == (10, 1, ("x1",))
    assert data.x[:, 0].tolist() == [r[2] for r in TEN_OBS]


def test_bad_binary_cell_names_row_and_column(tmp_path):
    rows = [list(r) for r in TEN_OBS]
    rows[6][0] = 2
    path = write_csv(tmp_path / "bad.csv", ["z", "d", "x1"], rows)
    status, report = _run(path)
    assert status == EXIT_INPUT
    err = report.metadata["error"]
    assert err["code"] == "input-error"
    assert "row 7, column z" in err["message"]


def test_missing_covariate_dropped_per_column(tmp_path):
    rows = [list(r) + [float(i)] for i, r in enumerate(TEN_OBS)]
    rows[2][2] = "NA"
    path = write_csv(tmp_path / "na.csv", ["z", "d", "x1", "x2"], rows)
    status, report = _run(path)
    assert status == EXIT_OK
    x1, x2 = report.covariates
    assert (x1.n, x1.dropped) == (9, 1)
    assert (x2.n, x2.dropped) == (10, 0)
    assert report.metadata["dropped"] == {"x1": 1, "x2": 0}


@pytest.mark.parametrize("content,fragment", [
    ("", "empty"),
    ("1,1,3\n0,0,2\n", "no header"),
    ("z,z,x\n1,1,3\n", "duplicate"),
    ("z,x1\n1,3\n", "'d' not found"),
    ("z,d,x1\n1,1,2\n0,0\n", "row 2: 2 fields"),
])
def test_malformed_files(tmp_path, content, fragment):
    path = tmp_path / "m.csv"
    path.write_text(content)
    status, report = _run(path)
    assert status == EXIT_INPUT
    assert fragment in report.metadata["error"]["message"]


def test_unreadable_path(tmp_path):
    status, report = _run(tmp_path / "nope.csv")
    assert status == EXIT_INPUT and report.metadata["error"]["code"] == "input-error"


def test_default_covariates_skip_text_and_reserved(tmp_path):
    path = write_csv(tmp_path / "c.csv", ["z", "d", "x1", "label", "mid"],
                     [list(r) + ["a", i // 2] for i, r in enumerate(TEN_OBS)])
    data = ingest_csv(path, RunConfig(input=path, match_id="mid"))
    assert data.covariate_names == ("x1",)
    with pytest.raises(Exception, match="not found"):
        ingest_csv(path, RunConfig(input=path, covariates=("nope",)))
    with pytest.raises(Exception, match="reserved"):
        ingest_csv(path, RunConfig(input=path, covariates=("z",)))


def test_degenerate_instrument_exit(tmp_path):
    rows = [(1, d, x) for _, d, x in TEN_OBS]
    status, report = _run(write_csv(tmp_path / "z1.csv", ["z", "d", "x1"], rows))
    assert status == EXIT_INPUT
    assert report.metadata["error"]["code"] == "degenerate-instrument"


def test_monotonicity_violation_exit(tmp_path):
    # D = 1 - Z gives a negative first stage
    rows = [(z, 1 - z, float(i)) for i, (z, _, _) in enumerate(TEN_OBS)]
    status, report = _run(write_csv(tmp_path / "mono.csv", ["z", "d", "x1"], rows))
    assert status == EXIT_MONOTONICITY
    err = report.metadata["error"]
    assert err["code"] == "monotonicity-or-relevance-violation"


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(input="x", instrument="a", treatment="a")
    with pytest.raises(ValueError):
        RunConfig(input="x", level=1.0)
    with pytest.raises(ValueError):
        RunConfig(input="x", se="jackknife")
    with pytest.raises(ValueError):
        RunConfig(input="x", se="both", boot=1)


# -- pipeline -----------------------------------------------------------------


def test_ten_obs_numbers(ten_obs_csv):
    status, r = _run(ten_obs_csv)
    assert status == EXIT_OK
    (c,) = r.covariates
    assert c.complier[0].point == 3.0
    assert c.complier[0].se == pytest.approx(TEN_OBS_PLUGIN_SE, rel=1e-14)
    assert c.always_taker.point == 6.0 and c.never_taker.point == 1.0
    assert c.sample.point == pytest.approx(2.8, rel=1e-15)
    assert c.always_taker.se is None  # single always-taker unit
    assert any("cell-too-small" in w for w in c.warnings)
    assert r.shares.complier[0].point == pytest.approx(0.4, rel=1e-14)
    assert r.shares.complier[0].se == pytest.approx(_exact_share_se(TEN_OBS), rel=1e-12)


def test_perfect_compliance(tmp_path, perfect_compliance):
    data = perfect_compliance
    rows = zip(data.z.tolist(), data.d.tolist(), data.x[:, 0].tolist())
    status, r = _run(write_csv(tmp_path / "pc.csv", ["z", "d", "x1"], rows))
    assert status == EXIT_OK
    (c,) = r.covariates
    assert c.complier[0].point == pytest.approx(c.sample.point, rel=1e-15)
    assert c.always_taker is None and c.never_taker is None
    assert any("one-sided-compliance" in w for w in r.metadata["warnings"])
    text = emit_report(r, "text").decode()
    assert text.count("undefined") >= 2


def test_both_standard_errors(ten_obs_csv):
    status, r = _run(ten_obs_csv, se="both", boot=200, seed=3)
    assert status == EXIT_OK
    plug, boot = r.covariates[0].complier
    assert (plug.method, boot.method) == ("plug-in", "bootstrap")
    assert math.isfinite(plug.se) and math.isfinite(boot.se) and boot.se > 0
    assert "[" in emit_report(r, "text").decode().splitlines()[3]


def test_match_id_note(tmp_path):
    rows = [list(r) + [i // 2] for i, r in enumerate(TEN_OBS)]
    path = write_csv(tmp_path / "m.csv", ["z", "d", "x1", "pair"], rows)
    status, r = _run(path, match_id="pair")
    assert status == EXIT_OK
    assert [c.name for c in r.covariates] == ["x1"]
    assert any("pair" in note for note in r.metadata["notes"])
    plain = _run(path, covariates=("x1",))[1]
    assert r.covariates[0].complier == plain.covariates[0].complier


# -- emission -----------------------------------------------------------------


def test_text_report_layout(ten_obs_csv):
    text = emit_report(_run(ten_obs_csv)[1], "text").decode()
    lines = text.splitlines()
    assert lines[1].split() == ["Variable", "Complier", "Always-taker", "Never-taker", "Sample"]
    assert lines[2].startswith("Proportion") and lines[2].endswith("1.000 (0.000)")
    assert lines[3].split()[:3] == ["x1", "3.000", "(0.7638)"]


def test_shares_sum_to_one_in_report(ten_obs_csv):
    r = _run(ten_obs_csv)[1]
    total = sum(getattr(r.shares, s)[0].point for s in ("complier", "always_taker", "never_taker"))
    assert total == pytest.approx(1.0, abs=1e-12)
    assert fmt_sig(total) == "1.000"


@pytest.mark.parametrize("name", ["ten_obs", "fixture"])
def test_json_round_trip(name):
    payload = (DATA / f"{name}.json.golden").read_bytes()
    r = parse_report(payload)
    assert emit_report(r, "json") == payload
    assert r.metadata == json.loads(payload)["metadata"]


def test_parse_rejects_unknown_schema():
    with pytest.raises(ValueError):
        parse_report(b'{"schema_version": "9"}')


@pytest.mark.parametrize("name", ["ten_obs", "fixture"])
@pytest.mark.parametrize("fmt", ["text", "json", "csv"])
def test_golden_files(name, fmt):
    from data.make_golden import build
    assert build(name, fmt) == (DATA / f"{name}.{fmt}.golden").read_bytes()


def test_emission_is_byte_stable(ten_obs_csv):
    cfg = dict(se="both", boot=100, seed=5)
    a = emit_report(_run(ten_obs_csv, **cfg)[1], "csv")
    b = emit_report(_run(ten_obs_csv, **cfg, workers=3)[1], "csv")
    assert a == b


def test_verify_report_catches_tampering():
    r = parse_report((DATA / "ten_obs.json.golden").read_bytes())
    d = r.to_dict()
    d["covariates"][0]["complier"][0]["point"] = 3.1
    bad = type(r).from_dict(d)
    with pytest.raises(ReportIntegrityError):
        verify_report(bad)


@pytest.mark.parametrize("value,text", [
    (3.0, "3.000"), (0.4, "0.4000"), (0.76376, "0.7638"), (None, "undefined"),
    (float("nan"), "undefined"), (12345.6, "1.235e+04"), (-0.0, "0.000"), (0.0, "0.000"),
])
def test_fmt_sig(value, text):
    assert fmt_sig(value) == text


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(30, 400))
def test_profile_identity_property(seed, n):
    from conftest import random_dataset
    data = random_dataset(np.random.default_rng(seed), n, k=2)
    r = profile_dataset(data, RunConfig(input="-"))
    verify_report(r)
    for c in r.covariates:
        terms = [c.shares[2] * c.complier[0].point, c.shares[1] * c.always_taker.point,
                 c.shares[0] * c.never_taker.point]
        scale = max(abs(c.sample.point), *map(abs, terms))
        assert abs(math.fsum(terms) - c.sample.point) <= 1e-10 * scale
