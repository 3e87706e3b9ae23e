import numpy as np
import pytest

from complierprofile import Dataset

# (z, d, x) for the ten-unit worked example
TEN_OBS = [
    (1, 1, 3.0), (1, 1, 5.0), (1, 0, 1.0), (1, 0, 1.0), (1, 1, 4.0),
    (0, 0, 2.0), (0, 0, 2.0), (0, 1, 6.0), (0, 0, 3.0), (0, 0, 1.0),
]


def make_dataset(z, d, x, names=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    names = names or tuple(f"x{j + 1}" for j in range(x.shape[1]))
    return Dataset(z=np.asarray(z), d=np.asarray(d), x=x, covariate_names=tuple(names))


def random_dataset(rng, n, k=1, all_cells=True):
    """Random binary-IV data; with ``all_cells`` every (z, d) cell is occupied."""
    while True:
        z = rng.integers(0, 2, n)
        s = rng.choice(3, size=n, p=rng.dirichlet(np.ones(3)))
        d = np.where(s == 0, 0, np.where(s == 1, 1, z))
        cells = [((z == a) & (d == b)).any() for a in (0, 1) for b in (0, 1)]
        if 0 < z.sum() < n and (all(cells) or not all_cells):
            vnt, vat = ((z == 1) & (d == 0)).mean(), ((z == 0) & (d == 1)).mean()
            if 1 - vnt / z.mean() - vat / (1 - z.mean()) > 0.02:
                break
    x = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 10), size=(n, k))
    return make_dataset(z, d, x)


@pytest.fixture
def ten_obs():
    z, d, x = zip(*TEN_OBS)
    return make_dataset(z, d, x, ("x1",))


@pytest.fixture
def perfect_compliance():
    z = [1, 1, 1, 0, 0, 0, 1, 0]
    x = [2.0, 4.0, 1.5, 3.0, 0.5, 7.0, 2.5, 1.0]
    return make_dataset(z, z, x)


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def ten_obs_csv(tmp_path):
    return write_csv(tmp_path / "ten.csv", ["z", "d", "x1"], TEN_OBS)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
