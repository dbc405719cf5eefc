import numpy as np
import pytest

from confband.core.parallel import set_threads
from confband.demo.synthetic import linear_data
from confband.types import FunctionalDataset


@pytest.fixture(autouse=True)
def _default_threads():
    yield
    set_threads(None)


@pytest.fixture
def linear_ds():
    return linear_data(60, seed=0)


@pytest.fixture
def bivariate_ds():
    return linear_data(60, q=2, seed=1)


@pytest.fixture
def curves_ds():
    """20 two-component curves on 30-point grids."""
    rng = np.random.default_rng(7)
    t = np.linspace(0.0, 1.0, 30)
    a = np.sin(2 * np.pi * t)[None, :] + rng.normal(0, 0.3, size=(20, 30))
    b = t[None, :] ** 2 + rng.normal(0, 0.1, size=(20, 30))
    return FunctionalDataset(values=[a, b], grids=[t, t])


@pytest.fixture
def linear_csv(tmp_path):
    path = tmp_path / "linear.csv"
    rows = ["x,y,is_test"]
    ds = linear_data(31, seed=3)
    for i in range(ds.n):
        rows.append(f"{ds.x[i, 0]:.10g},{ds.y[i, 0]:.10g},{1 if i >= 29 else 0}")
    path.write_text("\n".join(rows) + "\n")
    return path
