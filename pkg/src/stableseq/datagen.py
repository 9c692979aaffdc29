"""Synthetic data generation and cumulative batch assembly.

A batch series holds ``B`` consecutive time intervals. Batch ``b`` trains on
intervals ``1..b`` (so train sets are nested by construction) and validates on
interval ``b+1``; the last batch validates on a carved-out tail of its own
final interval, since no later interval exists. Feature bounds are recorded
from the largest train set and shared by every pool built from the series, so
tree path distances stay comparable across batches.

All generation is single-threaded and deterministic in the seed (PCG64).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PRNG_NAME = "numpy.random.PCG64"
VAL_TAIL_FRACTION = 0.2


@dataclass(eq=False)
class Dataset:
    """Feature matrix, target vector, and per-row timestamps."""

    X: np.ndarray
    y: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-d")
        n = self.X.shape[0]
        if self.y.shape != (n,) or self.t.shape != (n,):
            raise ValueError("X, y, t lengths are inconsistent")
        for name, arr in (("X", self.X), ("y", self.y), ("t", self.t)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def to_csv(self, path: str | Path) -> None:
        header = ",".join([f"f{j}" for j in range(self.p)] + ["y", "t"])
        lines = [header]
        for i in range(self.n):
            row = [repr(float(v)) for v in self.X[i]]
            row.append(repr(float(self.y[i])))
            row.append(repr(float(self.t[i])))
            lines.append(",".join(row))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @staticmethod
    def from_csv(path: str | Path) -> "Dataset":
        text = Path(path).read_text(encoding="utf-8").strip().splitlines()
        header = text[0].split(",")
        if header[-2:] != ["y", "t"]:
            raise ValueError(f"{path}: expected trailing y,t columns, got {header[-2:]}")
        p = len(header) - 2
        rows = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
        if rows.size == 0:
            rows = rows.reshape(0, p + 2)
        return Dataset(rows[:, :p], rows[:, p], rows[:, p + 1])


def concat(datasets: list[Dataset]) -> Dataset:
    return Dataset(
        np.concatenate([d.X for d in datasets]),
        np.concatenate([d.y for d in datasets]),
        np.concatenate([d.t for d in datasets]),
    )


@dataclass(eq=False)
class BatchSeries:
    """Cumulative train sets over consecutive intervals, plus a holdout test set."""

    intervals: list[Dataset]
    test: Dataset
    feature_bounds: np.ndarray = field(default=None)  # computed from D_B when omitted
    val_tail_fraction: float = VAL_TAIL_FRACTION

    def __post_init__(self):
        if len(self.intervals) < 2:
            raise ValueError("a batch series needs at least 2 intervals")
        if self.feature_bounds is None:
            full = self.train_set(self.n_batches)
            self.feature_bounds = np.column_stack([full.X.min(axis=0), full.X.max(axis=0)])
        self.feature_bounds = np.asarray(self.feature_bounds, dtype=np.float64)

    @property
    def n_batches(self) -> int:
        return len(self.intervals)

    @property
    def p(self) -> int:
        return self.intervals[0].p

    def train_set(self, b: int) -> Dataset:
        """D_b: rows of intervals 1..b. Nesting D_b within D_{b+1} holds by construction."""
        if not (1 <= b <= self.n_batches):
            raise ValueError(f"batch index {b} outside 1..{self.n_batches}")
        return concat(self.intervals[:b])

    def validation_set(self, b: int) -> Dataset:
        """Interval b+1; for the final batch, the tail of its own last interval."""
        if not (1 <= b <= self.n_batches):
            raise ValueError(f"batch index {b} outside 1..{self.n_batches}")
        if b < self.n_batches:
            return self.intervals[b]
        last = self.intervals[-1]
        n_tail = max(1, int(last.n * self.val_tail_fraction))
        return Dataset(last.X[-n_tail:], last.y[-n_tail:], last.t[-n_tail:])

    def save(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for i, interval in enumerate(self.intervals, start=1):
            path = directory / f"interval_{i:03d}.csv"
            interval.to_csv(path)
            written.append(path)
        test_path = directory / "test.csv"
        self.test.to_csv(test_path)
        written.append(test_path)
        meta = {
            "schema_version": 1,
            "batch_count": self.n_batches,
            "p": self.p,
            "feature_bounds": [[float(a), float(b)] for a, b in self.feature_bounds],
            "val_tail_fraction": self.val_tail_fraction,
            "intervals": [p.name for p in written[:-1]],
            "test": "test.csv",
        }
        meta_path = directory / "series.json"
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(meta_path)
        return written

    @staticmethod
    def load(directory: str | Path) -> "BatchSeries":
        directory = Path(directory)
        meta = json.loads((directory / "series.json").read_text(encoding="utf-8"))
        intervals = [Dataset.from_csv(directory / name) for name in meta["intervals"]]
        test = Dataset.from_csv(directory / meta["test"])
        return BatchSeries(
            intervals=intervals,
            test=test,
            feature_bounds=np.asarray(meta["feature_bounds"], dtype=np.float64),
            val_tail_fraction=meta["val_tail_fraction"],
        )


def _interval_timestamps(b: int, n: int) -> np.ndarray:
    return (b - 1) + np.arange(n, dtype=np.float64) / n


def gen_linear(
    n_per_batch: int,
    p: int,
    noise_sd: float,
    n_batches: int,
    seed: int,
    drift_sd: float = 0.0,
    test_n: int | None = None,
) -> tuple[BatchSeries, np.ndarray]:
    """Linear-regression stream with per-batch coefficient random walk.

    Returns the series and the (B, p) matrix of true coefficients per batch.
    The holdout test set is drawn after the last interval with the final
    coefficients.
    """
    if n_per_batch < p + 1:
        raise ValueError(f"need n_per_batch >= p+1, got {n_per_batch} < {p + 1}")
    if n_batches < 2:
        raise ValueError("need at least 2 batches")
    rng = np.random.default_rng(np.random.PCG64(seed))
    betas = np.empty((n_batches, p))
    betas[0] = rng.standard_normal(p)
    for b in range(1, n_batches):
        betas[b] = betas[b - 1] + drift_sd * rng.standard_normal(p)
    intervals = []
    for b in range(n_batches):
        X = rng.standard_normal((n_per_batch, p))
        y = X @ betas[b] + noise_sd * rng.standard_normal(n_per_batch)
        intervals.append(Dataset(X, y, _interval_timestamps(b + 1, n_per_batch)))
    n_test = test_n if test_n is not None else n_per_batch
    Xt = rng.standard_normal((n_test, p))
    yt = Xt @ betas[-1] + noise_sd * rng.standard_normal(n_test)
    test = Dataset(Xt, yt, _interval_timestamps(n_batches + 1, n_test))
    return BatchSeries(intervals=intervals, test=test), betas


def gen_classification(
    n_per_batch: int,
    p: int,
    n_batches: int,
    seed: int,
    class_sep: float = 2.0,
    test_n: int | None = None,
) -> tuple[BatchSeries, np.ndarray]:
    """Binary-classification stream: y ~ Bernoulli(sigmoid(x . beta)), |beta| = class_sep.

    Returns the series and the oracle coefficient vector.
    """
    if n_per_batch < p + 1:
        raise ValueError(f"need n_per_batch >= p+1, got {n_per_batch} < {p + 1}")
    if n_batches < 2:
        raise ValueError("need at least 2 batches")
    rng = np.random.default_rng(np.random.PCG64(seed))
    direction = rng.standard_normal(p)
    norm = np.linalg.norm(direction)
    beta = class_sep * direction / norm if norm > 0 else np.zeros(p)

    def draw(n: int, b: int) -> Dataset:
        X = rng.standard_normal((n, p))
        prob = 1.0 / (1.0 + np.exp(-(X @ beta)))
        y = (rng.random(n) < prob).astype(np.float64)
        return Dataset(X, y, _interval_timestamps(b, n))

    intervals = [draw(n_per_batch, b + 1) for b in range(n_batches)]
    test = draw(test_n if test_n is not None else n_per_batch, n_batches + 1)
    return BatchSeries(intervals=intervals, test=test), beta


def split_batches(data: Dataset, n_batches: int, test_fraction: float) -> BatchSeries:
    """Time-order the rows, hold out the last fraction, split the rest into equal intervals."""
    if n_batches < 2:
        raise ValueError("need at least 2 batches")
    if not (0.0 <= test_fraction < 1.0):
        raise ValueError("test_fraction must lie in [0, 1)")
    order = np.argsort(data.t, kind="stable")
    X, y, t = data.X[order], data.y[order], data.t[order]
    n_test = int(data.n * test_fraction)
    n_train = data.n - n_test
    bounds_idx = np.array_split(np.arange(n_train), n_batches)
    min_rows = data.p + 1
    for i, idx in enumerate(bounds_idx, start=1):
        if len(idx) < min_rows:
            raise ValueError(
                f"interval {i} has {len(idx)} rows, fewer than p+1 = {min_rows}"
            )
    intervals = [Dataset(X[idx], y[idx], t[idx]) for idx in bounds_idx]
    test = Dataset(X[n_train:], y[n_train:], t[n_train:])
    return BatchSeries(intervals=intervals, test=test)
