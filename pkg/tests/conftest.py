from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from utils.data import Dataset
from utils.dgp import DgpSpec, draw_sample
from utils.logit import fit_logit


@pytest.fixture
def tiny():
    """y=(1,1,0,0), one predictor."""
    return Dataset(y=[1, 1, 0, 0], x=[[0.9], [0.4], [0.6], [0.2]], columns=("x",))


@pytest.fixture
def random_small():
    """n=60 with ties in the score."""
    rng = np.random.default_rng(5)
    y = np.r_[np.ones(25), np.zeros(35)]
    g = np.round(rng.normal(size=60) + 0.8 * y, 1)
    return Dataset(y=y, x=g.reshape(-1, 1), columns=("g",))


@pytest.fixture(scope="module")
def spec():
    return DgpSpec(n=500)


@pytest.fixture(scope="module")
def sample(spec):
    return draw_sample(spec, 11)


@pytest.fixture(scope="module")
def model(sample):
    return fit_logit(sample)


@pytest.fixture(scope="module")
def noise_sample():
    return draw_sample(DgpSpec(n=500, noise=1), 23)


@pytest.fixture
def sample_csv(tmp_path, sample):
    df = pd.DataFrame(sample.x, columns=list(sample.columns))
    df.insert(0, "y", sample.y.astype(int))
    path = tmp_path / "sample.csv"
    df.to_csv(path, index=False)
    return path
