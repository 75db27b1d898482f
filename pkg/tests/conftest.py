import numpy as np
import pytest

from crosshash import SynthConfig, generate_synthetic


def unit_vectors(rng, count, dim):
    """Random float64 rows exactly normalized to unit length."""
    x = rng.normal(size=(count, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def tiny_store():
    """Small labeled store: 3 clusters, 24 samples, 2 views."""
    return generate_synthetic(
        SynthConfig(clusters=3, samples=24, views=2, image_dim=10, text_dim=6, seed=5)
    )
