import numpy as np
import pytest

from dpprec import _accel
from dpprec.catalog import SynthConfig, generate_synthetic
from dpprec.embedding import fit_reduction, project


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    with _accel.backend_scope(request.param):
        yield request.param


@pytest.fixture(scope="session")
def small_world():
    config = SynthConfig(n_items=600, n_users=12, n_categories=8, semantic_dim=48, retrieval_dim=16)
    catalog, users = generate_synthetic(config, seed=3)
    model = fit_reduction(catalog.semantic_matrix, 24)
    reduced = project(model, catalog.semantic_matrix)
    return catalog, users, reduced


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
