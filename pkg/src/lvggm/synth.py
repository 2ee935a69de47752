"""Ground-truth latent-variable Gaussian models and sampling.

The generator builds a joint precision over observed and latent variables:
a bounded-degree random conditional graph among the observed nodes, latents
connected to a seeded random subset of observed nodes (conditionally
independent of each other), and a diagonal-dominance rule that makes the
joint matrix PD by construction. Marginalizing the latent block yields the
ground-truth triple (S*, L*, K_O) that recovery experiments compare against.

All randomness goes through an explicitly seeded PCG64 generator; the
algorithm name is recorded in the model so runs are reproducible across
platforms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import marginal_precision

RNG_ALGORITHM = "pcg64"
EIG_MARGIN = 0.1


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SyntheticModel:
    p: int
    h: int
    K_joint: np.ndarray
    S_star: np.ndarray
    L_star: np.ndarray
    K_O: np.ndarray
    cov_O: np.ndarray
    graph: tuple
    seed: int
    params: dict = field(default_factory=dict)
    rng_algorithm: str = RNG_ALGORITHM


def generate_latent_model(
    p,
    h,
    max_degree,
    latent_fanout=1.0,
    edge_strength=0.3,
    latent_strength=1.0,
    seed=0,
):
    """Build a ground-truth model with h latents over p observed variables.

    The conditional graph is a uniform random graph subject to the degree cap
    (candidate edges are visited in seeded random order and kept while both
    endpoints stay below max_degree). Each latent connects to
    ceil(latent_fanout * p) observed nodes with weights +-latent_strength/sqrt(p),
    so the spectral norm of L* stays O(latent_strength) as p grows. Diagonal
    entries are 1 + (row absolute off-diagonal sum) + 0.1, which keeps the
    smallest eigenvalue of the joint precision above 0.1 by Gershgorin.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if h < 0:
        raise ValueError(f"h must be >= 0, got {h}")
    if not (0 <= max_degree < p):
        raise ValueError(f"max_degree must be in [0, p), got {max_degree}")
    if not (0.0 < latent_fanout <= 1.0):
        raise ValueError(f"latent_fanout must be in (0, 1], got {latent_fanout}")

    rng = _rng(seed)
    d = p + h
    K = np.zeros((d, d))

    edges = []
    if max_degree > 0 and edge_strength != 0.0:
        degree = np.zeros(p, dtype=int)
        candidates = [(i, j) for i in range(p) for j in range(i + 1, p)]
        order = rng.permutation(len(candidates))
        for idx in order:
            i, j = candidates[idx]
            if degree[i] < max_degree and degree[j] < max_degree:
                sign = 1.0 if rng.random() < 0.5 else -1.0
                K[i, j] = K[j, i] = sign * edge_strength
                degree[i] += 1
                degree[j] += 1
                edges.append((i, j))
        edges.sort()

    fanout = math.ceil(latent_fanout * p)
    if latent_strength != 0.0:
        weight = latent_strength / math.sqrt(p)
        for a in range(h):
            targets = rng.choice(p, size=fanout, replace=False)
            signs = np.where(rng.random(fanout) < 0.5, 1.0, -1.0)
            K[targets, p + a] = signs * weight
            K[p + a, targets] = signs * weight

    row_abs = np.abs(K).sum(axis=1)
    K[np.diag_indices(d)] = 1.0 + row_abs + 0.1

    K_O, S_star, L_star = marginal_precision(K, np.arange(p), np.arange(p, d))
    w_o, V_o = np.linalg.eigh(K_O)
    cov_O = (V_o * (1.0 / w_o)) @ V_o.T
    cov_O = (cov_O + cov_O.T) / 2.0

    return SyntheticModel(
        p=p,
        h=h,
        K_joint=K,
        S_star=S_star,
        L_star=L_star,
        K_O=K_O,
        cov_O=cov_O,
        graph=tuple(edges),
        seed=int(seed),
        params={
            "max_degree": int(max_degree),
            "latent_fanout": float(latent_fanout),
            "edge_strength": float(edge_strength),
            "latent_strength": float(latent_strength),
        },
    )


def draw_samples(model, n, seed=0):
    """n independent rows from N(0, cov_O) via the symmetric square root."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = _rng(seed)
    w, V = np.linalg.eigh(model.cov_O)
    root = (V * np.sqrt(np.maximum(w, 0.0))) @ V.T
    Z = rng.standard_normal((n, model.p))
    return Z @ root


def model_to_dict(model):
    return {
        "p": model.p,
        "h": model.h,
        "seed": model.seed,
        "rng_algorithm": model.rng_algorithm,
        "params": model.params,
        "graph": [list(e) for e in model.graph],
        "K_joint": [float(x) for x in model.K_joint.ravel()],
    }


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def model_from_dict(doc):
    """Rebuild a model from its JSON document and re-validate invariants.

    The marginal quantities are recomputed from the stored joint precision
    rather than trusted from the file.
    """
    p, h = int(doc["p"]), int(doc["h"])
    d = p + h
    K = np.asarray(doc["K_joint"], dtype=float).reshape(d, d)
    if np.max(np.abs(K - K.T)) > 1e-12 * max(1.0, float(np.max(np.abs(K)))):
        raise ValueError("stored joint precision is not symmetric")
    w_min = float(np.linalg.eigvalsh(K)[0])
    if w_min < EIG_MARGIN:
        raise ValueError(
            f"stored joint precision violates the eigenvalue margin: "
            f"{w_min:.3e} < {EIG_MARGIN}"
        )
    K_O, S_star, L_star = marginal_precision(K, np.arange(p), np.arange(p, d))
    w_o, V_o = np.linalg.eigh(K_O)
    cov_O = (V_o * (1.0 / w_o)) @ V_o.T
    cov_O = (cov_O + cov_O.T) / 2.0
    return SyntheticModel(
        p=p,
        h=h,
        K_joint=K,
        S_star=S_star,
        L_star=L_star,
        K_O=K_O,
        cov_O=cov_O,
        graph=tuple(tuple(e) for e in doc.get("graph", [])),
        seed=int(doc["seed"]),
        params=dict(doc.get("params", {})),
        rng_algorithm=doc.get("rng_algorithm", RNG_ALGORITHM),
    )


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
