"""Planted test problems with known answers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ratings import RatingsTable
from .segre import random_point
from .tensor_core import CPDModel, cpd_reconstruct


def planted_tensor(shape, r: int, seed=None, noise: float = 0.0):
    """Dense tensor of exact rank ``r`` (plus optional relative Gaussian noise) and its model."""
    model = random_point(shape, r, scale=1.0, seed=seed)
    T = cpd_reconstruct(model)
    if noise:
        rng = np.random.default_rng(None if seed is None else seed + 1)
        E = rng.standard_normal(T.shape)
        T = T + noise * np.linalg.norm(T) / np.linalg.norm(E) * E
    return T, model


@dataclass(frozen=True)
class PlantedRatings:
    table: RatingsTable
    """Expected rating of every (user, item) pair under the planted model."""
    expected: np.ndarray
    model: CPDModel

    def noise_floor(self, test: RatingsTable) -> float:
        """RMSE of the planted expected ratings on ``test``."""
        pred = self.expected[test.users, test.items]
        return float(np.sqrt(np.mean((pred - test.ratings) ** 2)))


def planted_ratings(n_users: int = 30, n_items: int = 20, density: float = 0.7,
                    noise: float = 0.0, seed=None) -> PlantedRatings:
    """Ratings whose one-hot tensor has rank 3.

    Users in the first group give every item the same rating; users in the
    second group rate items of the first genre with a second value and the
    rest with a third. The three blocks tile the (user, item) grid, so the
    one-hot tensor is a sum of three rank-1 terms. With ``noise = q`` a
    rating is replaced by a uniform draw from 1..5 with probability ``q``.
    """
    if n_users < 2 or n_items < 2:
        raise ValueError("need at least two users and two items")
    rng = np.random.default_rng(seed)
    stars = rng.permutation(5)[:3] + 1
    group_a = rng.permutation(n_users) < n_users // 2
    genre_x = rng.permutation(n_items) < n_items // 2

    grid = np.where(group_a[:, None], stars[0], np.where(genre_x[None, :], stars[1], stars[2]))
    blocks = [(group_a, np.ones(n_items, bool)), (~group_a, genre_x), (~group_a, ~genre_x)]
    weights, factors = [], [[], [], []]
    for (users, items), k in zip(blocks, stars):
        u, v = users.astype(float), items.astype(float)
        w = np.zeros(5)
        w[k - 1] = 1.0
        weights.append(np.linalg.norm(u) * np.linalg.norm(v))
        for f, vec in zip(factors, (u / np.linalg.norm(u), v / np.linalg.norm(v), w)):
            f.append(vec)
    model = CPDModel(weights, [np.column_stack(f) for f in factors])

    observed = rng.random((n_users, n_items)) < density
    # every user and item keeps at least one rating so the id tables stay dense
    observed[np.arange(n_users), rng.integers(0, n_items, n_users)] = True
    observed[rng.integers(0, n_users, n_items), np.arange(n_items)] = True
    users, items = np.nonzero(observed)
    ratings = grid[users, items]
    if noise:
        flip = rng.random(ratings.size) < noise
        ratings = np.where(flip, rng.integers(1, 6, ratings.size), ratings)
    expected = (1 - noise) * grid + noise * 3.0
    table = RatingsTable(users, items, ratings, tuple(range(n_users)), tuple(range(n_items)))
    return PlantedRatings(table, expected, model)
