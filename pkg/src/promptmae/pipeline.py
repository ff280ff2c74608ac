"""Dataset ingestion, windowing, instance normalization and patch tokens.

Multivariate series are handled channel-independently: every channel of
every window becomes its own univariate sample fed through shared weights.
Two normalizations stack: the whole series is standardized by per-channel
train-split statistics at ingestion (metrics are computed on that scale),
and each window is additionally normalized by its own history statistics
inside the model, with the inverse applied to forecasts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ContractError, DatasetError, ParseError
from .tensor import Tensor

REVIN_EPS = 1e-5       # added to the per-window std
STANDARDIZE_EPS = 1e-8  # added to the per-channel train std


def parse_split_ratios(spec: str | tuple) -> tuple[float, float, float]:
    """Accept "6:2:2"-style strings or a (train, val, test) triple."""
    if isinstance(spec, str):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"split must have three components, got {spec!r}")
        try:
            nums = [float(p) for p in parts]
        except ValueError as exc:
            raise ConfigError(f"non-numeric split component in {spec!r}") from exc
    else:
        nums = [float(p) for p in spec]
        if len(nums) != 3:
            raise ConfigError(f"split must have three components, got {spec!r}")
    total = sum(nums)
    if total <= 0 or any(n < 0 for n in nums):
        raise ConfigError(f"split ratios must be non-negative with positive sum: {spec!r}")
    return (nums[0] / total, nums[1] / total, nums[2] / total)


@dataclass
class TimeSeriesDataset:
    """Standardized multivariate series with contiguous train/val/test splits."""

    name: str
    values: np.ndarray              # (T, C), standardized by train stats
    split_ratios: tuple[float, float, float]
    n_train: int
    n_val: int
    n_test: int
    train_mean: np.ndarray          # (C,) raw-scale stats from the train split
    train_std: np.ndarray           # (C,), population std + STANDARDIZE_EPS
    channel_names: list[str]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def split(self, name: str) -> np.ndarray:
        if name == "train":
            return self.values[:self.n_train]
        if name == "val":
            return self.values[self.n_train:self.n_train + self.n_val]
        if name == "test":
            return self.values[self.n_train + self.n_val:]
        raise ContractError(f"unknown split {name!r}")


def _split_sizes(total: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    n_train = int(total * ratios[0])
    n_val = int(total * ratios[1])
    return n_train, n_val, total - n_train - n_val


def ingest_csv(path: str, split_ratios: str | tuple = "6:2:2",
               name: str | None = None) -> TimeSeriesDataset:
    """Parse a headered CSV into a standardized dataset.

    The first column is treated as a timestamp (and ignored) when its first
    data cell is not numeric; every remaining column must be fully numeric.
    """
    ratios = parse_split_ratios(split_ratios)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise DatasetError(f"{path}: no data rows")

    def _is_number(cell: str) -> bool:
        try:
            float(cell)
            return True
        except ValueError:
            return False

    first_data = 1 if not _is_number(rows[0][0]) else 0
    channel_names = [h.strip() for h in header[first_data:]]
    n_cols = len(header)
    values = np.empty((len(rows), n_cols - first_data), dtype=np.float64)
    for r, row in enumerate(rows):
        if len(row) != n_cols:
            raise ParseError(
                f"{path}: row {r + 2} has {len(row)} cells, expected {n_cols}")
        for c in range(first_data, n_cols):
            cell = row[c].strip()
            if cell == "" or not _is_number(cell):
                raise ParseError(
                    f"{path}: row {r + 2}, column {c + 1} ({header[c].strip()!r}): "
                    f"non-numeric value {row[c]!r}")
            values[r, c - first_data] = float(cell)

    n_train, n_val, n_test = _split_sizes(len(rows), ratios)
    if n_train < 1:
        raise DatasetError(f"{path}: train split is empty under ratios {ratios}")
    train = values[:n_train]
    mean = train.mean(axis=0)
    std = np.sqrt(((train - mean) ** 2).mean(axis=0)) + STANDARDIZE_EPS
    return TimeSeriesDataset(
        name=name or path,
        values=(values - mean) / std,
        split_ratios=ratios,
        n_train=n_train,
        n_val=n_val,
        n_test=n_test,
        train_mean=mean,
        train_std=std,
        channel_names=channel_names,
    )


@dataclass
class WindowSample:
    """One univariate (history, future) pair cut from a split of one channel."""

    history: np.ndarray
    future: np.ndarray              # empty during pretraining
    channel: int
    offset: int
    split: str
    norm_mean: float | None = None  # set by instance_normalize
    norm_std: float | None = None


def make_windows(ds: TimeSeriesDataset, history: int, horizon: int,
                 stride: int = 1, split: str = "train",
                 patch: int | None = None) -> list[WindowSample]:
    """Sliding windows per channel; never crosses the split boundary."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    if patch is not None and history % patch != 0:
        raise ConfigError(
            f"history length {history} is not divisible by patch size {patch}")
    seg = ds.split(split)
    usable = seg.shape[0] - history - horizon
    if usable < 0:
        raise DatasetError(
            f"split {split!r} has {seg.shape[0]} rows; needs at least "
            f"{history + horizon} for history {history} + horizon {horizon}")
    windows = []
    for ch in range(ds.n_channels):
        for off in range(0, usable + 1, stride):
            windows.append(WindowSample(
                history=seg[off:off + history, ch].copy(),
                future=seg[off + history:off + history + horizon, ch].copy(),
                channel=ch,
                offset=off,
                split=split,
            ))
    return windows


def instance_normalize(w: WindowSample) -> WindowSample:
    """Normalize by the history's own mean/std (population, eps-guarded).

    The future, when present as a training target, is scaled with the same
    history statistics so predictions and targets share one frame.
    """
    if w.history.size == 0:
        raise ContractError("cannot normalize a window with empty history")
    mean = float(w.history.mean())
    std = float(np.sqrt(((w.history - mean) ** 2).mean())) + REVIN_EPS
    return replace(
        w,
        history=(w.history - mean) / std,
        future=(w.future - mean) / std if w.future.size else w.future,
        norm_mean=mean,
        norm_std=std,
    )


def denormalize(values: np.ndarray, w: WindowSample) -> np.ndarray:
    """Invert instance_normalize for model outputs belonging to window w."""
    if w.norm_mean is None or w.norm_std is None:
        raise ContractError("window carries no normalization statistics")
    return values * w.norm_std + w.norm_mean


def normalize_histories(histories: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized instance normalization for a (B, L) history batch."""
    mean = histories.mean(axis=1, keepdims=True)
    std = np.sqrt(((histories - mean) ** 2).mean(axis=1, keepdims=True)) + REVIN_EPS
    return (histories - mean) / std, mean, std


def sinusoidal_pe(pos: int, d: int) -> np.ndarray:
    """Fixed positional embedding: even dims sin, odd dims cos."""
    if d % 2 != 0:
        raise ConfigError(f"positional embedding dimension must be even, got {d}")
    i = np.arange(d // 2, dtype=np.float64)
    angle = pos / np.power(10000.0, 2.0 * i / d)
    pe = np.empty(d, dtype=np.float64)
    pe[0::2] = np.sin(angle)
    pe[1::2] = np.cos(angle)
    return pe


def positional_encoding(positions, d: int) -> np.ndarray:
    """Stack sinusoidal_pe rows for a sequence of positions -> (len, d)."""
    return np.stack([sinusoidal_pe(int(p), d) for p in positions], axis=0) \
        if len(positions) else np.zeros((0, d), dtype=np.float64)


@dataclass
class PatchTokenBatch:
    """Position-embedded tokens for a batch of equally long windows."""

    tokens: Tensor                  # (B, N, d)
    positions: list[int]            # strictly increasing, length N
    patch_size: int
    model_dim: int

    @property
    def n_tokens(self) -> int:
        return len(self.positions)


def patchify(histories: np.ndarray, patch: int) -> np.ndarray:
    """(B, L) -> (B, L/patch, patch) non-overlapping patches."""
    if histories.ndim == 1:
        histories = histories[None, :]
    length = histories.shape[1]
    if length % patch != 0:
        raise ConfigError(f"window length {length} is not divisible by patch size {patch}")
    b = histories.shape[0]
    return histories.reshape(b, length // patch, patch)


def patchify_embed(histories: np.ndarray, patch: int, projection,
                   pos_base: int = 0) -> PatchTokenBatch:
    """Project non-overlapping patches to tokens and add positional embeddings.

    `projection` maps a (B, N, patch) Tensor to (B, N, d); positions run
    pos_base .. pos_base + N - 1 so future tokens can continue the history's
    numbering.
    """
    patches = patchify(histories, patch)
    tokens = projection(Tensor(patches))
    d = tokens.shape[-1]
    n = patches.shape[1]
    positions = list(range(pos_base, pos_base + n))
    pe = positional_encoding(positions, d)
    tokens = tokens + Tensor(pe)
    return PatchTokenBatch(tokens=tokens, positions=positions,
                           patch_size=patch, model_dim=d)
