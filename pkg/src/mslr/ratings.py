"""Rating-triple ingestion and the age-grouped completion setup.

Rating files are tab separated ``user item rating timestamp`` lines (the
MovieLens ``u.data`` layout). User ages come from ``|`` separated
``user|age|...`` lines (``u.user``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partition import MultiScalePartition, build_partition
from .solver import mask_from_entries

RATING_RANGE = (1.0, 5.0)


class RatingFormatError(ValueError):
    pass


@dataclass
class RatingTriples:
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray

    def __len__(self):
        return len(self.ratings)


def ingest_rating_triples(path):
    users, items, ratings = [], [], []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 3:
                raise RatingFormatError(f"line {lineno}: expected user, item, rating, timestamp")
            try:
                u, i, r = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise RatingFormatError(f"line {lineno}: {exc}") from None
            if u < 0 or i < 0:
                raise RatingFormatError(f"line {lineno}: negative id")
            if not np.isfinite(r):
                raise RatingFormatError(f"line {lineno}: non-finite rating")
            users.append(u)
            items.append(i)
            ratings.append(r)
    if not ratings:
        raise RatingFormatError(f"{path}: no ratings found")
    return RatingTriples(np.array(users), np.array(items), np.array(ratings, dtype=np.float64))


def ingest_user_ages(path):
    """``{user_id: age}`` from a ``user|age|...`` file."""
    ages = {}
    with open(path, encoding="latin-1") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.strip().split("|")
            try:
                ages[int(parts[0])] = float(parts[1])
            except (IndexError, ValueError):
                raise RatingFormatError(f"line {lineno}: expected user|age|...") from None
    return ages


@dataclass
class RatingMatrix:
    Y: np.ndarray
    mask: np.ndarray
    partition: MultiScalePartition
    item_ids: np.ndarray
    user_ids: np.ndarray  # in column order

    def entries(self, mask=None):
        """Observed ``(row, col, value)`` triples, optionally restricted to `mask`."""
        m = self.mask if mask is None else mask
        r, c = np.nonzero(m)
        return list(zip(r.tolist(), c.tolist(), self.Y[r, c].tolist()))


def build_rating_matrix(triples: RatingTriples, ages=None, group_count=1, factor=2):
    """Items x users matrix with users sorted by age and a one-sided age-group partition.

    Columns are ordered by ascending age, ties broken by user id. The finest
    scale groups ``ceil(users / group_count)`` consecutive users; block widths
    double up to the full matrix. ``group_count == 1`` gives the plain low
    rank completion problem.
    """
    user_ids = np.unique(triples.users)
    item_ids = np.unique(triples.items)
    if group_count < 1:
        raise ValueError("group_count must be >= 1")
    if group_count > len(user_ids):
        raise ValueError(f"{group_count} groups requested for {len(user_ids)} users")
    if ages is not None:
        missing = [u for u in user_ids if u not in ages]
        if missing:
            raise ValueError(f"no age for users {missing[:5]}")
        user_ids = np.array(sorted(user_ids, key=lambda u: (ages[u], u)))
    col_of = {u: k for k, u in enumerate(user_ids)}
    row_of = {i: k for k, i in enumerate(item_ids)}
    rows = np.array([row_of[i] for i in triples.items])
    cols = np.array([col_of[u] for u in triples.users])
    M, N = len(item_ids), len(user_ids)
    mask = mask_from_entries(rows, cols, (M, N))
    Y = np.zeros((M, N))
    Y[rows, cols] = triples.ratings
    width = -(-N // group_count)
    partition = build_partition(M, N, mode="one-sided", min_block=(M, width),
                                factor=factor, axis="cols")
    return RatingMatrix(Y, mask, partition, item_ids, user_ids)


def split_holdout(mask, fraction=0.2, seed=0):
    """Move a uniformly random `fraction` of observed entries into a test mask."""
    rng = np.random.default_rng(seed)
    r, c = np.nonzero(mask)
    n_test = int(round(fraction * len(r)))
    pick = rng.choice(len(r), size=n_test, replace=False)
    test = np.zeros_like(mask)
    test[r[pick], c[pick]] = True
    return mask & ~test, test
