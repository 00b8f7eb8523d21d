"""Stratified k-fold splitting, deterministic in the seed."""

from __future__ import annotations

import numpy as np

from ..seeds import rng_from

__all__ = ["kfold_split"]


def kfold_split(classes, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold over per-clip class labels.

    Returns k (train_indices, test_indices) pairs with pairwise-disjoint
    test sets covering all indices.  Within each class the indices are
    shuffled once and dealt round-robin, so every fold's class ratio is
    within one clip of the global ratio.
    """
    classes = np.asarray(classes)
    n = classes.size
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"cannot split {n} clips into {k} folds")
    rng = rng_from(seed, 0)
    fold_members: list[list[int]] = [[] for _ in range(k)]
    for cls in sorted(set(classes.tolist())):
        idx = np.flatnonzero(classes == cls)
        if idx.size < k:
            raise ValueError(f"class {cls!r} has {idx.size} clips, fewer than k={k}")
        perm = rng.permutation(idx)
        for f in range(k):
            fold_members[f].extend(perm[f::k].tolist())
    splits = []
    all_idx = np.arange(n)
    for f in range(k):
        test = np.array(sorted(fold_members[f]), dtype=np.intp)
        train = np.setdiff1d(all_idx, test)
        splits.append((train, test))
    return splits
