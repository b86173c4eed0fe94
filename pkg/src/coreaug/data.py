"""Synthetic dataset generators and the CSV interchange format.

CSV layout: header ``f0,...,f{d-1},label``, UTF-8, no quoting, one example per
row with features in [0, 1] and an integer class label. Loading validates
every row and reports the first offending line by number.
"""

from __future__ import annotations

import numpy as np

from .model import Dataset

__all__ = [
    "DataFormatError",
    "gen_dataset",
    "save_dataset_csv",
    "load_dataset_csv",
    "split_dataset",
]

GENERATOR_KINDS = ("gaussian_blobs", "two_moons_embedded", "grid_digits")


class DataFormatError(ValueError):
    """A dataset file violated the CSV contract; the message names the line."""


def _blob_means(rng: np.random.Generator, num_classes: int, d: int,
                margin: float) -> np.ndarray:
    for _ in range(1000):
        means = rng.uniform(0.25, 0.75, size=(num_classes, d))
        ok = True
        for a in range(num_classes):
            for b in range(a + 1, num_classes):
                if np.linalg.norm(means[a] - means[b]) < margin:
                    ok = False
        if ok:
            return means
    raise ValueError(f"could not place {num_classes} means with margin {margin} in {d} dims")


def gen_dataset(kind: str, n: int, d: int, num_classes: int, seed: int = 0,
                noise: float = 0.05, margin: float = 0.25) -> Dataset:
    """Balanced synthetic datasets with features clamped to [0, 1].

    ``gaussian_blobs``: class means pairwise separated by at least ``margin``.
    ``two_moons_embedded``: the classic two arcs in the first two feature
    dimensions (requires num_classes == 2), the rest held near 0.5.
    ``grid_digits``: per-class binary pixel templates plus noise.
    """
    if kind not in GENERATOR_KINDS:
        raise ValueError(f"kind must be one of {GENERATOR_KINDS}")
    if n < num_classes or n % num_classes != 0:
        raise ValueError("n must be a positive multiple of num_classes")
    if d < 1 or num_classes < 1 or noise < 0.0:
        raise ValueError("invalid generator parameters")
    rng = np.random.default_rng(seed)
    per = n // num_classes
    labels = np.repeat(np.arange(num_classes), per)
    if kind == "gaussian_blobs":
        means = _blob_means(rng, num_classes, d, margin)
        feats = means[labels] + noise * rng.standard_normal((n, d))
    elif kind == "two_moons_embedded":
        if num_classes != 2:
            raise ValueError("two_moons_embedded requires num_classes == 2")
        if d < 2:
            raise ValueError("two_moons_embedded requires d >= 2")
        theta = rng.uniform(0.0, np.pi, size=n)
        x = np.where(labels == 0, np.cos(theta), 1.0 - np.cos(theta))
        y = np.where(labels == 0, np.sin(theta), 0.5 - np.sin(theta))
        feats = np.full((n, d), 0.5)
        feats[:, 0] = 0.5 + 0.3 * (x - 0.5)
        feats[:, 1] = 0.5 + 0.3 * y
        feats += noise * rng.standard_normal((n, d))
    else:
        templates = np.where(rng.uniform(size=(num_classes, d)) < 0.5, 0.15, 0.85)
        feats = templates[labels] + noise * rng.standard_normal((n, d))
    feats = np.clip(feats, 0.0, 1.0)
    return Dataset(feats, labels, num_classes)


def save_dataset_csv(data: Dataset, path) -> None:
    header = ",".join(f"f{i}" for i in range(data.dim)) + ",label"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row, label in zip(data.features, data.labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")


def load_dataset_csv(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file, no header")
    header = lines[0].split(",")
    if header[-1] != "label" or any(h != f"f{i}" for i, h in enumerate(header[:-1])):
        raise DataFormatError(f"{path}: line 1: malformed header")
    d = len(header) - 1
    feats, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d + 1:
            raise DataFormatError(
                f"{path}: line {lineno}: expected {d + 1} columns, got {len(parts)}")
        try:
            row = [float(v) for v in parts[:-1]]
            label = int(parts[-1])
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {lineno}: non-numeric value") from exc
        for j, v in enumerate(row):
            if not np.isfinite(v) or v < 0.0 or v > 1.0:
                raise DataFormatError(
                    f"{path}: line {lineno}: feature f{j}={v} outside [0, 1]")
        if label < 0:
            raise DataFormatError(f"{path}: line {lineno}: negative label")
        feats.append(row)
        labels.append(label)
    if not feats:
        raise DataFormatError(f"{path}: no data rows")
    labels_arr = np.asarray(labels, dtype=np.int64)
    return Dataset(np.asarray(feats), labels_arr, int(labels_arr.max()) + 1)


def split_dataset(data: Dataset, test_fraction: float, seed: int = 0):
    """Stratified deterministic split into (train, test)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    test_idx = []
    for c in range(data.num_classes):
        idx = data.class_index[c]
        take = max(1, int(round(test_fraction * idx.size)))
        test_idx.append(rng.choice(idx, size=take, replace=False))
    test_idx = np.sort(np.concatenate(test_idx))
    mask = np.zeros(data.n, dtype=bool)
    mask[test_idx] = True
    return data.subset(np.flatnonzero(~mask)), data.subset(test_idx)
