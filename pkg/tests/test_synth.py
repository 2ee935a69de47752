import json

import numpy as np
import pytest

from lvggm import (
    draw_samples,
    generate_latent_model,
    marginal_precision,
    numeric_rank,
    sample_covariance,
)
from lvggm.synth import load_model, model_from_dict, model_to_dict, save_model


class TestGenerateLatentModel:
    def test_no_latents(self):
        model = generate_latent_model(p=6, h=0, max_degree=2, edge_strength=0.3, seed=1)
        np.testing.assert_allclose(model.L_star, 0.0)
        np.testing.assert_allclose(model.K_O, model.S_star)
        np.testing.assert_allclose(model.K_joint, model.S_star)

    def test_structure_of_worked_example(self):
        # one latent over two observed nodes, no conditional edges:
        # diagonal S*, rank-one L* with equal-magnitude entries
        model = generate_latent_model(
            p=2, h=1, max_degree=1, latent_fanout=1.0,
            edge_strength=0.0, latent_strength=1.0, seed=7,
        )
        off = model.S_star[~np.eye(2, dtype=bool)]
        np.testing.assert_allclose(off, 0.0)
        assert numeric_rank(model.L_star) == 1
        mags = np.abs(model.L_star)
        assert np.allclose(mags, mags[0, 0])
        assert model.graph == ()

    def test_degree_cap_and_rank(self):
        model = generate_latent_model(
            p=40, h=2, max_degree=4, latent_fanout=1.0,
            edge_strength=0.3, latent_strength=1.0, seed=3,
        )
        assert numeric_rank(model.L_star) == 2
        off = np.abs(model.S_star) > 0
        np.fill_diagonal(off, False)
        assert off.sum(axis=1).max() <= 4
        nnz_per_row = (np.abs(model.S_star) > 0).sum(axis=1)
        assert nnz_per_row.max() <= 5

    def test_eigenvalue_margin(self):
        for seed in range(5):
            model = generate_latent_model(
                p=15, h=2, max_degree=4, latent_fanout=0.8,
                edge_strength=0.5, latent_strength=1.5, seed=seed,
            )
            assert np.linalg.eigvalsh(model.K_joint)[0] >= 0.1

    def test_marginal_consistency(self, small_model):
        K_O, S_star, L_star = marginal_precision(
            small_model.K_joint,
            np.arange(small_model.p),
            np.arange(small_model.p, small_model.p + small_model.h),
        )
        np.testing.assert_allclose(K_O, small_model.K_O, atol=1e-12)
        np.testing.assert_allclose(S_star, small_model.S_star, atol=1e-12)
        np.testing.assert_allclose(L_star, small_model.L_star, atol=1e-12)

    def test_support_matches_graph(self, small_model):
        support = set()
        p = small_model.p
        for i in range(p):
            for j in range(i + 1, p):
                if small_model.S_star[i, j] != 0.0:
                    support.add((i, j))
        assert support == set(small_model.graph)

    def test_latent_strength_does_not_change_support(self):
        kw = dict(p=12, h=1, max_degree=3, latent_fanout=1.0, edge_strength=0.4, seed=9)
        m1 = generate_latent_model(latent_strength=0.5, **kw)
        m2 = generate_latent_model(latent_strength=2.0, **kw)
        assert m1.graph == m2.graph
        np.testing.assert_array_equal(m1.S_star != 0, m2.S_star != 0)

    def test_deterministic_given_seed(self):
        kw = dict(p=9, h=2, max_degree=3, latent_fanout=0.7,
                  edge_strength=0.3, latent_strength=1.0)
        m1 = generate_latent_model(seed=42, **kw)
        m2 = generate_latent_model(seed=42, **kw)
        np.testing.assert_array_equal(m1.K_joint, m2.K_joint)
        m3 = generate_latent_model(seed=43, **kw)
        assert not np.array_equal(m1.K_joint, m3.K_joint)

    def test_degenerate_p_rejected(self):
        with pytest.raises(ValueError):
            generate_latent_model(p=0, h=1, max_degree=0)
        with pytest.raises(ValueError):
            generate_latent_model(p=4, h=1, max_degree=4)
        with pytest.raises(ValueError):
            generate_latent_model(p=4, h=-1, max_degree=2)
        with pytest.raises(ValueError):
            generate_latent_model(p=4, h=1, max_degree=2, latent_fanout=0.0)


class TestDrawSamples:
    def test_deterministic(self, small_model):
        X1 = draw_samples(small_model, 50, seed=5)
        X2 = draw_samples(small_model, 50, seed=5)
        np.testing.assert_array_equal(X1, X2)
        X3 = draw_samples(small_model, 50, seed=6)
        assert not np.array_equal(X1, X3)

    def test_monte_carlo_covariance(self):
        model = generate_latent_model(
            p=3, h=1, max_degree=1, latent_fanout=1.0,
            edge_strength=0.3, latent_strength=1.0, seed=2,
        )
        X = draw_samples(model, 100_000, seed=1)
        emp = sample_covariance(X).matrix
        rel = np.linalg.norm(emp - model.cov_O) / np.linalg.norm(model.cov_O)
        assert rel < 0.05

    def test_identity_covariance_case(self):
        model = generate_latent_model(p=4, h=0, max_degree=0, edge_strength=0.0, seed=0)
        np.testing.assert_allclose(model.cov_O, np.eye(4) / 1.1, atol=1e-12)
        X = draw_samples(model, 100_000, seed=3)
        var = X.var(axis=0)
        assert np.all(np.abs(var - 1.0 / 1.1) < 0.05)

    def test_n_positive_required(self, small_model):
        with pytest.raises(ValueError):
            draw_samples(small_model, 0)


class TestModelJson:
    def test_round_trip_bit_exact(self, small_model, tmp_path):
        path = tmp_path / "model.json"
        save_model(small_model, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.K_joint, small_model.K_joint)
        np.testing.assert_array_equal(loaded.S_star, small_model.S_star)
        np.testing.assert_array_equal(loaded.L_star, small_model.L_star)
        assert loaded.graph == small_model.graph
        assert loaded.seed == small_model.seed
        assert loaded.params == small_model.params
        assert loaded.rng_algorithm == "pcg64"

    def test_double_round_trip_identical_bytes(self, small_model, tmp_path):
        p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
        save_model(small_model, p1)
        save_model(load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_invalid_margin_rejected(self, small_model):
        doc = model_to_dict(small_model)
        d = small_model.p + small_model.h
        K = np.asarray(doc["K_joint"]).reshape(d, d).copy()
        K[0, 0] = -5.0
        doc["K_joint"] = [float(x) for x in K.ravel()]
        with pytest.raises(ValueError, match="margin"):
            model_from_dict(doc)

    def test_asymmetric_rejected(self, small_model):
        doc = model_to_dict(small_model)
        doc["K_joint"][1] += 0.5  # breaks symmetry of the stored matrix
        with pytest.raises(ValueError, match="symmetric"):
            model_from_dict(doc)
