"""Labelled spectral datasets: CSV I/O, synthetic spectra and stratified splitting."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, SplitError


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectraDataset:
    """n x p absorbance matrix on an increasing wavelength grid, with class labels.

    Labels are dense indices into ``class_names``. Arrays are copied and made
    read-only on construction.
    """

    absorbances: np.ndarray
    labels: np.ndarray
    class_names: tuple
    wavelengths: np.ndarray

    def __post_init__(self):
        X = _frozen(self.absorbances, float)
        y = _frozen(self.labels, np.int64)
        w = _frozen(self.wavelengths, float)
        names = tuple(str(c) for c in self.class_names)
        if X.ndim != 2:
            raise DataError(f"absorbances must be 2-D, got shape {X.shape}")
        n, p = X.shape
        if y.shape != (n,):
            raise DataError(f"expected {n} labels, got {y.shape[0] if y.ndim else 0}")
        if w.shape != (p,):
            raise DataError(f"wavelength grid has {w.size} values but matrix has {p} columns")
        if p > 1 and not np.all(np.diff(w) > 0):
            raise DataError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(X)):
            raise DataError("absorbances contain non-finite values")
        k = len(names)
        if n and (y.min() < 0 or y.max() >= k):
            raise DataError("label index out of range of class_names")
        counts = np.bincount(y, minlength=k)
        empty = [names[c] for c in range(k) if counts[c] == 0]
        if empty:
            raise DataError(f"classes without samples: {empty}")
        object.__setattr__(self, "absorbances", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "wavelengths", w)
        object.__setattr__(self, "class_names", names)

    @property
    def n(self) -> int:
        return self.absorbances.shape[0]

    @property
    def p(self) -> int:
        return self.absorbances.shape[1]

    @property
    def k(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def subset(self, indices) -> "SpectraDataset":
        """Rows ``indices`` as a new dataset. Keeps the full class list."""
        idx = np.asarray(indices, dtype=np.int64)
        return _unchecked(self.absorbances[idx], self.labels[idx], self.class_names, self.wavelengths)


def _unchecked(X, y, names, w):
    # subsets may legitimately lack a class (e.g. a test fold); skip the empty-class rule
    ds = object.__new__(SpectraDataset)
    object.__setattr__(ds, "absorbances", _frozen(X, float))
    object.__setattr__(ds, "labels", _frozen(y, np.int64))
    object.__setattr__(ds, "class_names", tuple(names))
    object.__setattr__(ds, "wavelengths", _frozen(w, float))
    return ds


def as_matrix(data) -> np.ndarray:
    """Absorbance matrix of a dataset, or ``data`` itself as a float 2-D array."""
    if isinstance(data, SpectraDataset):
        return data.absorbances
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise DataError(f"expected a 2-D matrix, got shape {X.shape}")
    return X


# --------------------------------------------------------------------------- CSV


def load_csv(path) -> SpectraDataset:
    """Read ``label,w1,...,wp`` CSV. Class indices follow first appearance order."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2:
        raise DataError(f"{path}: header needs a label column and at least one wavelength")
    try:
        wavelengths = [float(h) for h in header[1:]]
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric wavelength header ({exc})") from None
    if any(b <= a for a, b in zip(wavelengths, wavelengths[1:])):
        raise DataError(f"{path}: wavelength headers are not strictly increasing")

    p = len(wavelengths)
    names: dict[str, int] = {}
    labels, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != p + 1:
            raise DataError(f"{path}:{lineno}: expected {p + 1} fields, got {len(row)}")
        label = row[0].strip()
        if not label:
            raise DataError(f"{path}:{lineno}: empty label")
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
        labels.append(names.setdefault(label, len(names)))
        values.append(vals)
    if not values:
        raise DataError(f"{path}: no data rows")
    return SpectraDataset(np.array(values), np.array(labels), tuple(names), np.array(wavelengths))


def save_csv(data: SpectraDataset, path) -> None:
    """Write ``data`` in the ``load_csv`` format with 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + [format(w, ".17g") for w in data.wavelengths])
        for row, lab in zip(data.absorbances, data.labels):
            writer.writerow([data.class_names[lab]] + [format(v, ".17g") for v in row])


# ------------------------------------------------------------------------ splits


@dataclass(frozen=True, eq=False)
class TrainTestSplit:
    train: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "train", _frozen(np.sort(self.train), np.int64))
        object.__setattr__(self, "test", _frozen(np.sort(self.test), np.int64))

    def __eq__(self, other):
        return (
            isinstance(other, TrainTestSplit)
            and self.seed == other.seed
            and np.array_equal(self.train, other.train)
            and np.array_equal(self.test, other.test)
        )

    def to_json(self) -> str:
        return json.dumps({"seed": int(self.seed), "train": self.train.tolist(), "test": self.test.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "TrainTestSplit":
        d = json.loads(text)
        return cls(np.array(d["train"]), np.array(d["test"]), int(d["seed"]))


def derive_seed(*parts: int) -> int:
    """64-bit seed mixed from ``parts`` through numpy's SeedSequence hash."""
    state = np.random.SeedSequence([int(x) for x in parts]).generate_state(1, np.uint64)
    return int(state[0])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def train_counts(class_counts: Sequence[int], fraction: float, rng=None) -> np.ndarray:
    """Per-class training sizes for a stratified split.

    The training total is ``round_half_up(fraction * n)``. Each class first
    receives ``floor(fraction * n_c)`` and the remaining places go to the
    classes with the largest fractional parts; equal parts are ordered by
    ``rng`` (class index order when ``rng`` is None).
    """
    counts = np.asarray(class_counts, dtype=np.int64)
    exact = fraction * counts
    base = np.floor(exact + 1e-12).astype(np.int64)
    rem = exact - base
    extra = _round_half_up(fraction * counts.sum()) - int(base.sum())
    tiebreak = rng.permutation(len(counts)) if rng is not None else np.arange(len(counts))
    # largest remainder first, then random tiebreak
    order = np.lexsort((tiebreak, -np.round(rem, 12)))
    base[order[:extra]] += 1
    return base


def stratified_split(data: SpectraDataset, fraction: float = 0.5, seed: int = 0) -> TrainTestSplit:
    """Random train/test split that samples within each class without replacement."""
    if not 0.0 < fraction < 1.0:
        raise SplitError(f"fraction must lie in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    counts = data.class_counts()
    n_train = train_counts(counts, fraction, rng)
    for c, (nc, nt) in enumerate(zip(counts, n_train)):
        if nt < 1 or nc - nt < 1:
            raise SplitError(
                f"class {data.class_names[c]!r} has {nc} samples; cannot place one on each side "
                f"at fraction {fraction}"
            )
    train = []
    for c in range(data.k):
        members = np.flatnonzero(data.labels == c)
        train.append(rng.choice(members, size=n_train[c], replace=False))
    train = np.concatenate(train)
    test = np.setdiff1d(np.arange(data.n), train)
    return TrainTestSplit(train, test, int(seed))


def repeated_splits(data: SpectraDataset, fraction: float = 0.5, count: int = 100, seed: int = 0):
    """``count`` independent stratified splits; split i is seeded by ``derive_seed(seed, i)``."""
    if count < 1:
        raise SplitError("count must be >= 1")
    return [stratified_split(data, fraction, derive_seed(seed, i)) for i in range(count)]


def stratified_folds(labels, n_folds: int, rng) -> np.ndarray:
    """Fold id per sample; each class is shuffled and dealt round-robin over folds.

    The dealing offset rotates between classes so fold sizes stay balanced.
    """
    labels = np.asarray(labels)
    if n_folds < 2:
        raise SplitError("need at least 2 folds")
    if n_folds > labels.size:
        raise SplitError(f"{n_folds} folds requested for {labels.size} samples")
    fold = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        fold[members] = (offset + np.arange(members.size)) % n_folds
        offset = (offset + members.size) % n_folds
    return fold


# --------------------------------------------------------------------- synthetic


def _smooth_noise(rng, n, p, length, sd):
    """Gaussian-filtered white noise with unit marginal sd scaled to ``sd``."""
    if sd == 0:
        return np.zeros((n, p))
    half = int(math.ceil(3 * length))
    t = np.arange(-half, half + 1)
    kern = np.exp(-0.5 * (t / length) ** 2)
    kern /= np.sqrt(np.sum(kern**2))
    raw = rng.standard_normal((n, p + 2 * half))
    out = np.stack([np.convolve(r, kern, mode="valid") for r in raw])
    return sd * out


def synth_spectra(
    n_per_class: int,
    p: int,
    k: int,
    informative: Iterable[int],
    noise_sd: float,
    seed: int = 0,
    *,
    bump_width: float = 3.0,
    class_sep: float = 1.0,
    smooth_sd: float = 0.02,
    smooth_length: float = 15.0,
) -> SpectraDataset:
    """Smooth NIR-like spectra whose class means differ only near ``informative``.

    Every class shares a smooth baseline. Class c adds Gaussian bumps of
    width ``bump_width`` (in grid steps) at each informative index, with
    amplitudes ``class_sep`` times an even spread over [-1, 1] whose class
    order is drawn per index; ``bump_width=0`` confines the signal to
    exactly the informative columns. Each sample then gets class-independent
    smooth noise (sd ``smooth_sd``, correlation length ``smooth_length``) plus
    white noise of sd ``noise_sd``.
    """
    informative = sorted({int(j) for j in informative})
    if n_per_class < 1 or p < 1 or k < 1:
        raise DataError("n_per_class, p and k must be positive")
    if not informative:
        raise DataError("informative index set is empty")
    if informative[0] < 0 or informative[-1] >= p:
        raise DataError(f"informative indices must lie in [0, {p})")
    if noise_sd < 0 or smooth_sd < 0 or bump_width < 0:
        raise DataError("noise levels and bump width must be non-negative")

    rng = np.random.default_rng(seed)
    t = np.arange(p, dtype=float)
    centres = rng.uniform(0, p, size=4)
    widths = rng.uniform(0.15, 0.4, size=4) * p
    heights = rng.uniform(0.3, 1.0, size=4)
    baseline = 0.5 + sum(h * np.exp(-0.5 * ((t - c) / w) ** 2) for c, h, w in zip(centres, heights, widths))

    # every informative index spreads the class means evenly on [-1, 1], in its own class order
    spread = np.linspace(-1.0, 1.0, k) if k > 1 else np.zeros(1)
    amps = np.stack([spread[rng.permutation(k)] for _ in informative], axis=1)
    means = np.tile(baseline, (k, 1))
    for col, j in enumerate(informative):
        if bump_width == 0:
            bump = (t == j).astype(float)
        else:
            bump = np.exp(-0.5 * ((t - j) / bump_width) ** 2)
        means += class_sep * amps[:, col : col + 1] * bump

    labels = np.repeat(np.arange(k), n_per_class)
    n = labels.size
    X = means[labels] + _smooth_noise(rng, n, p, smooth_length, smooth_sd)
    if noise_sd > 0:
        X = X + noise_sd * rng.standard_normal((n, p))
    names = tuple(f"class{c}" for c in range(k))
    return SpectraDataset(X, labels, names, 400.0 + 2.0 * t)
