import numpy as np
import pytest


def random_pd(rng, dim, scale=1.0):
    """Random well-conditioned positive definite matrix."""
    A = rng.standard_normal((dim, dim))
    return scale * (A @ A.T / dim + np.eye(dim))


def make_blobs(rng, d=20, n=300, classes=3, sep=4.0, nuisance=12, nuisance_scale=6.0):
    """Gaussian class blobs separated in the leading dimensions, with
    high-variance nuisance dimensions appended (anisotropic by design)."""
    per = n // classes
    informative = d - nuisance
    X_parts, y_parts = [], []
    for c in range(classes):
        mean = np.zeros(d)
        mean[:informative] = sep * rng.standard_normal(informative) / np.sqrt(informative)
        pts = mean[:, None] + rng.standard_normal((d, per))
        pts[informative:, :] *= nuisance_scale
        X_parts.append(pts)
        y_parts.append(np.full(per, c))
    return np.concatenate(X_parts, axis=1), np.concatenate(y_parts)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
