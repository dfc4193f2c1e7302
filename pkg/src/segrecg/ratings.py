"""Rating tables, their one-hot tensor form, splits and rating prediction."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import PredictionRule, predict_ratings, rmse
from .tensor_core import CPDModel, SparseObservations
from .tensor_io import ParseError

N_STARS = 5


class DuplicateRatingError(ParseError):
    pass


@dataclass(frozen=True)
class RatingsTable:
    """Ratings with users and items remapped to dense 0-based indices.

    ``user_ids[u]`` / ``item_ids[i]`` give the original identifiers.
    """

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    user_ids: tuple
    item_ids: tuple

    def __post_init__(self):
        users = np.asarray(self.users, dtype=np.int64).reshape(-1)
        items = np.asarray(self.items, dtype=np.int64).reshape(-1)
        ratings = np.asarray(self.ratings).reshape(-1)
        if not (users.shape == items.shape == ratings.shape):
            raise ValueError("users, items and ratings differ in length")
        if ratings.size and (np.any(ratings != np.round(ratings))
                             or ratings.min() < 1 or ratings.max() > N_STARS):
            raise ValueError("ratings must be integers in 1..5")
        ratings = ratings.astype(np.int64)
        if users.size and (users.min() < 0 or users.max() >= len(self.user_ids)
                           or items.min() < 0 or items.max() >= len(self.item_ids)):
            raise ValueError("user or item index outside the id tables")
        keys = users * max(len(self.item_ids), 1) + items
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate (user, item) pair")
        for name, arr in (("users", users), ("items", items), ("ratings", ratings)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "user_ids", tuple(self.user_ids))
        object.__setattr__(self, "item_ids", tuple(self.item_ids))

    def __len__(self):
        return self.ratings.shape[0]

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def shape(self) -> tuple:
        return (self.n_users, self.n_items, N_STARS)

    def subset(self, rows) -> "RatingsTable":
        rows = np.asarray(rows, dtype=np.int64)
        return RatingsTable(self.users[rows], self.items[rows], self.ratings[rows],
                            self.user_ids, self.item_ids)

    @classmethod
    def from_records(cls, records) -> "RatingsTable":
        """Build from ``(user_id, item_id, rating)`` triples with arbitrary ids."""
        records = list(records)
        user_ids = _sorted_ids(r[0] for r in records)
        item_ids = _sorted_ids(r[1] for r in records)
        umap = {u: n for n, u in enumerate(user_ids)}
        imap = {i: n for n, i in enumerate(item_ids)}
        return cls([umap[r[0]] for r in records], [imap[r[1]] for r in records],
                   [r[2] for r in records], user_ids, item_ids)


def _sorted_ids(ids):
    uniq = set(ids)
    try:
        return tuple(sorted(uniq, key=int))
    except (TypeError, ValueError):
        return tuple(sorted(uniq, key=str))


def _rating_value(token, lineno):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"rating {token!r} is not a number", lineno) from None
    if value != round(value) or not 1 <= value <= N_STARS:
        raise ParseError(f"rating {token!r} outside 1..5", lineno)
    return int(value)


def parse_ratings(path) -> RatingsTable:
    """Read ``user::item::rating[::timestamp]`` lines or a CSV file with a header row."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    first = next((ln for ln in lines if ln.strip() and not ln.startswith("#")), "")
    if "::" in first:
        rows = ((n, ln.split("::")) for n, ln in enumerate(lines, start=1)
                if ln.strip() and not ln.startswith("#"))
    else:
        rows = _csv_rows(lines)

    records, seen = [], {}
    for lineno, parts in rows:
        if len(parts) < 3:
            raise ParseError("expected user, item and rating fields", lineno)
        user, item = parts[0].strip(), parts[1].strip()
        if not user or not item:
            raise ParseError("empty user or item id", lineno)
        rating = _rating_value(parts[2].strip(), lineno)
        key = (user, item)
        if key in seen:
            raise DuplicateRatingError(f"duplicate rating, first seen on line {seen[key]}", lineno)
        seen[key] = lineno
        records.append((user, item, rating))
    return RatingsTable.from_records(records)


def _csv_rows(lines):
    reader = csv.reader(lines)
    header = None
    for lineno, row in enumerate(reader, start=1):
        if not row or not "".join(row).strip() or row[0].startswith("#"):
            continue
        if header is None:
            header = [h.strip().lower() for h in row]
            cols = _csv_columns(header, lineno)
            continue
        if len(row) <= max(cols):
            raise ParseError("too few columns", lineno)
        yield lineno, [row[c] for c in cols]
    if header is None:
        raise ParseError("empty ratings file")


def _csv_columns(header, lineno):
    def find(*names):
        for n, h in enumerate(header):
            if any(name in h for name in names):
                return n
        return None

    cols = [find("user"), find("item", "movie"), find("rating")]
    if None in cols:
        if len(header) < 3:
            raise ParseError("header needs user, item and rating columns", lineno)
        cols = [0, 1, 2]
    return cols


def one_hot_tensorize(table: RatingsTable) -> SparseObservations:
    """Each rating becomes five observed entries: 1 at the rated star, 0 elsewhere."""
    m = len(table)
    stars = np.arange(N_STARS)
    users = np.repeat(table.users, N_STARS)
    items = np.repeat(table.items, N_STARS)
    ks = np.tile(stars, m)
    values = (ks == np.repeat(table.ratings - 1, N_STARS)).astype(float)
    indices = np.column_stack([users, items, ks]) if m else np.zeros((0, 3), dtype=np.int64)
    return SparseObservations(table.shape, indices, values)


def table_from_observations(obs: SparseObservations, user_ids=None, item_ids=None) -> RatingsTable:
    """Inverse of :func:`one_hot_tensorize`: group entries by (user, item)."""
    n_users, n_items, _ = obs.shape
    ones = obs.values == 1.0
    idx = obs.indices[ones]
    order = np.lexsort((idx[:, 1], idx[:, 0]))
    idx = idx[order]
    return RatingsTable(idx[:, 0], idx[:, 1], idx[:, 2] + 1,
                        user_ids if user_ids is not None else tuple(range(n_users)),
                        item_ids if item_ids is not None else tuple(range(n_items)))


def split_train_test(data, fraction: float, seed=None):
    """Random split by rating; one-hot observations keep a pair's five entries together.

    Returns ``(train, test)`` of the same type as ``data``; the train part
    holds ``round(fraction * n)`` ratings.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    if isinstance(data, RatingsTable):
        n = len(data)
        perm = rng.permutation(n)
        n_train = int(round(fraction * n))
        return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))
    if isinstance(data, SparseObservations):
        pairs = data.indices[:, 0] * data.shape[1] + data.indices[:, 1]
        uniq, inverse = np.unique(pairs, return_inverse=True)
        perm = rng.permutation(uniq.size)
        n_train = int(round(fraction * uniq.size))
        in_train = np.zeros(uniq.size, dtype=bool)
        in_train[perm[:n_train]] = True
        mask = in_train[inverse]
        return data.subset(np.flatnonzero(mask)), data.subset(np.flatnonzero(~mask))
    raise TypeError("expected a RatingsTable or SparseObservations")


def pair_scores(model: CPDModel, users, items) -> np.ndarray:
    """``(m, 5)`` model values ``A(u, i, k)`` for each requested pair."""
    U, V, W = model.factors
    left = U[np.asarray(users)] * V[np.asarray(items)] * model.weights
    return left @ W.T


def predict_table(model: CPDModel, table: RatingsTable, rule, clip: bool = True):
    """Predicted ratings for every pair in ``table``.

    Rules 1-3 are clipped to ``[1, 5]`` when ``clip`` is set. Pairs where
    the rescaling rule is undefined fall back to rule 1. Returns the
    predictions and the number of fallbacks.
    """
    rule = PredictionRule.from_option(rule)
    scores = pair_scores(model, table.users, table.items)
    pred = predict_ratings(scores, rule)
    bad = np.isnan(pred)
    if bad.any():
        pred[bad] = predict_ratings(scores[bad], PredictionRule.WEIGHTED_AVERAGE)
    if clip and rule is not PredictionRule.ARGMAX:
        pred = np.clip(pred, 1.0, float(N_STARS))
    return pred, int(bad.sum())


def evaluate_rules(model: CPDModel, table: RatingsTable, rules=tuple(PredictionRule)) -> dict:
    if len(table) == 0:
        raise ValueError("cannot evaluate on an empty rating set")
    out = {}
    for rule in rules:
        rule = PredictionRule.from_option(rule)
        pred, fallbacks = predict_table(model, table, rule)
        out[rule] = {"rmse": rmse(pred, table.ratings), "fallbacks": fallbacks}
    return out


def top_k(model: CPDModel, users, k: int, exclude: RatingsTable | None = None) -> np.ndarray:
    """Indices of the ``k`` highest rule-1 predictions per user, skipping already rated items."""
    users = np.asarray(users, dtype=np.int64)
    U, V, W = model.factors
    stars = np.arange(1, N_STARS + 1)
    item_star = V * (W.T @ stars)  # (n_items, r): sum_k k W[k, r]
    pred = (U[users] * model.weights) @ item_star.T
    if exclude is not None and len(exclude):
        pos = {u: n for n, u in enumerate(users.tolist())}
        for u, i in zip(exclude.users.tolist(), exclude.items.tolist()):
            if u in pos:
                pred[pos[u], i] = -np.inf
    k = min(k, pred.shape[1])
    part = np.argpartition(-pred, k - 1, axis=1)[:, :k]
    order = np.argsort(-np.take_along_axis(pred, part, axis=1), axis=1, kind="stable")
    return np.take_along_axis(part, order, axis=1)
