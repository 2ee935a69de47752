import numpy as np
import pytest

from lvggm import SampleCovariance, generate_latent_model, marginal_precision


def random_symmetric(rng, p, scale=1.0):
    A = rng.normal(size=(p, p)) * scale
    return (A + A.T) / 2.0


def random_pd(rng, p, margin=0.1):
    A = rng.normal(size=(p, p))
    return A @ A.T / p + margin * np.eye(p)


def random_psd_cov(rng, p, n=None):
    return SampleCovariance(matrix=random_pd(rng, p), n=n)


@pytest.fixture
def worked_example():
    """The 3x3 joint precision with one latent touching both observed nodes."""
    K = np.array([[2.0, 0.0, 1.0], [0.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
    K_O, S_star, L_star = marginal_precision(K, [0, 1], [2])
    return {
        "K_joint": K,
        "K_O": K_O,
        "S_star": S_star,
        "L_star": L_star,
        "Sigma_pop": SampleCovariance(matrix=np.linalg.inv(K_O), n=None),
    }


@pytest.fixture
def small_model():
    return generate_latent_model(
        p=10, h=1, max_degree=3, latent_fanout=1.0,
        edge_strength=0.4, latent_strength=1.0, seed=11,
    )
