"""Synthetic blob datasets, MNIST IDX parsing and the ParityMNIST tasks."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049

BLOB_VARIANTS = ("Blobs", "NoConceptBlobs", "AmbiguousBlobs", "OverlappingBlobs")
PARITY_VARIANTS = ("Missing34", "NoMissing")


class MnistFormatError(ValueError):
    """Base class for malformed IDX input."""


class MagicNumberError(MnistFormatError):
    pass


class TruncatedFileError(MnistFormatError):
    pass


class CountMismatchError(MnistFormatError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    X: np.ndarray
    C: np.ndarray
    Y: np.ndarray
    name: str = ""

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.C.ndim != 2 or self.Y.ndim != 1:
            raise ValueError("X and C must be 2-D, Y must be 1-D")
        if self.C.shape[0] != n or self.Y.shape[0] != n:
            raise ValueError(
                f"row counts differ: X={n}, C={self.C.shape[0]}, Y={self.Y.shape[0]}"
            )
        if not np.isin(self.C, (0, 1)).all() or not np.isin(self.Y, (0, 1)).all():
            raise ValueError("concept and target labels must be 0/1")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_concepts(self) -> int:
        return self.C.shape[1]


@dataclass(frozen=True)
class Cluster:
    mean: tuple[float, float]
    concepts: tuple[int, ...]
    target: int


@dataclass(frozen=True)
class BlobSpec:
    clusters: tuple[Cluster, ...]
    std_dev: float = 0.45
    name: str = ""

    def __post_init__(self):
        if not self.clusters:
            raise ValueError("a blob spec needs at least one cluster")
        lengths = {len(c.concepts) for c in self.clusters}
        if len(lengths) != 1:
            raise ValueError("all clusters must carry the same number of concepts")

    @property
    def n_concepts(self) -> int:
        return len(self.clusters[0].concepts)


@dataclass(frozen=True)
class RawMnist:
    images: np.ndarray  # (n, rows * cols) uint8
    digits: np.ndarray  # (n,) uint8
    split: str = ""


_BLOBS_MEANS = ((-1.0, -2.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 2.0))
_CY_PATTERN = ((0, 0), (0, 1), (1, 0), (1, 1))


def blob_spec(variant: str, std_dev: float = 0.45) -> BlobSpec:
    """Four-cluster layout for one of the blob variants.

    The default spread keeps the two Blobs concept groups linearly separable
    for more than 99% of points.
    """
    if variant == "Blobs":
        rows = [(m, (c,), y) for m, (c, y) in zip(_BLOBS_MEANS, _CY_PATTERN)]
    elif variant == "NoConceptBlobs":
        rows = [(m, (0, 0), y) for m, (_, y) in zip(_BLOBS_MEANS, _CY_PATTERN)]
    elif variant == "AmbiguousBlobs":
        # The two clusters near x=1 overlap and both carry Y=1, so
        # concept uncertainty is what signals the target.
        rows = [
            ((-1.0, -2.0), (0,), 0),
            ((1.0, -0.25), (0,), 1),
            ((1.0, 0.25), (1,), 1),
            ((-1.0, 2.0), (1,), 0),
        ]
    elif variant == "OverlappingBlobs":
        # The two Y=0 clusters coincide, one with each concept value, so
        # their concept is a coin flip that only the uncertainty reveals.
        mid = _BLOBS_MEANS[0]
        rows = [
            (mid, (0,), 0),
            (_BLOBS_MEANS[1], (0,), 1),
            (mid, (1,), 0),
            (_BLOBS_MEANS[3], (1,), 1),
        ]
    else:
        raise ValueError(f"unknown blob variant {variant!r}; expected one of {BLOB_VARIANTS}")
    clusters = tuple(Cluster(tuple(m), tuple(c), y) for m, c, y in rows)
    return BlobSpec(clusters, std_dev=std_dev, name=variant)


def _draw(spec: BlobSpec, n_per_cluster: int, rng: np.random.Generator, name: str):
    X, C, Y = [], [], []
    for cluster in spec.clusters:
        X.append(rng.normal(cluster.mean, spec.std_dev, size=(n_per_cluster, 2)))
        C.append(np.tile(cluster.concepts, (n_per_cluster, 1)))
        Y.append(np.full(n_per_cluster, cluster.target))
    X, C, Y = np.vstack(X), np.vstack(C).astype(np.int64), np.concatenate(Y).astype(np.int64)
    order = rng.permutation(len(Y))
    return LabeledDataset(X[order], C[order], Y[order], name)


def gen_blobs(spec: BlobSpec, n_per_cluster: int = 250, seed=0):
    """Draw independent train and test splits from ``spec``.

    Each split gets ``n_per_cluster`` points per cluster, in shuffled order.
    Train and test use separate child streams of ``seed``.
    """
    if n_per_cluster < 1:
        raise ValueError(f"n_per_cluster must be >= 1, got {n_per_cluster}")
    if not spec.std_dev > 0:
        raise ValueError(f"std_dev must be positive, got {spec.std_dev}")
    train_ss, test_ss = np.random.SeedSequence(seed).spawn(2)
    train = _draw(spec, n_per_cluster, np.random.default_rng(train_ss), f"{spec.name}/train")
    test = _draw(spec, n_per_cluster, np.random.default_rng(test_ss), f"{spec.name}/test")
    return train, test


def _read_idx(path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"MNIST file not found: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def _parse_header(buf: bytes, path, magic: int, n_dims: int):
    header_len = 4 * (1 + n_dims)
    if len(buf) < 4:
        raise TruncatedFileError(f"{path}: file too short for an IDX header")
    # magic first, so a file of the other kind is reported as such
    (found,) = struct.unpack(">I", buf[:4])
    if found != magic:
        raise MagicNumberError(f"{path}: magic number {found}, expected {magic}")
    if len(buf) < header_len:
        raise TruncatedFileError(f"{path}: file too short for an IDX header")
    dims = struct.unpack(f">{n_dims}I", buf[4:header_len])
    payload = buf[header_len:]
    expected = int(np.prod(dims))
    if len(payload) < expected:
        raise TruncatedFileError(
            f"{path}: header declares {expected} bytes of data, found {len(payload)}"
        )
    return dims, np.frombuffer(payload, dtype=np.uint8, count=expected)


def load_mnist(images_path, labels_path, split: str = "") -> RawMnist:
    """Parse a pair of big-endian IDX files (images magic 2051, labels 2049)."""
    (n_img, rows, cols), pixels = _parse_header(
        _read_idx(images_path), images_path, IMAGES_MAGIC, 3
    )
    (n_lab,), digits = _parse_header(_read_idx(labels_path), labels_path, LABELS_MAGIC, 1)
    if n_img != n_lab:
        raise CountMismatchError(
            f"{images_path} holds {n_img} images but {labels_path} holds {n_lab} labels"
        )
    if digits.size and digits.max() > 9:
        raise MnistFormatError(f"{labels_path}: label values outside 0-9")
    return RawMnist(pixels.reshape(n_img, rows * cols), digits.copy(), split)


_MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def resolve_mnist_dir(mnist_dir=None) -> Path:
    """``mnist_dir`` if given, else ``$MNIST_DIR``."""
    mnist_dir = mnist_dir or os.environ.get("MNIST_DIR")
    if not mnist_dir:
        raise FileNotFoundError(
            "MNIST directory not given: pass --mnist-dir or set MNIST_DIR"
        )
    return Path(mnist_dir)


def _find(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"MNIST file not found: {directory / stem}")


def load_mnist_dir(mnist_dir=None):
    """Load the official train/test splits from a directory of IDX files."""
    directory = resolve_mnist_dir(mnist_dir)
    return tuple(
        load_mnist(_find(directory, img), _find(directory, lab), split=split)
        for split, (img, lab) in _MNIST_FILES.items()
    )


def _parity_split(raw: RawMnist, variant: str, name: str) -> LabeledDataset:
    digits = raw.digits.astype(np.int64)
    if variant == "Missing34":
        keep = ~np.isin(digits, (3, 4))
    else:
        keep = np.ones(len(digits), dtype=bool)
    digits = digits[keep]
    X = raw.images[keep].astype(np.float64) / 255.0
    C = np.stack([digits == 3, digits == 4], axis=1).astype(np.int64)
    Y = (digits % 2 == 0).astype(np.int64)
    return LabeledDataset(X, C, Y, name)


def make_parity_mnist(raw_train: RawMnist, raw_test: RawMnist, variant: str = "Missing34"):
    """Odd/even MNIST with concepts ``[digit == 3, digit == 4]``.

    ``Missing34`` drops every 3 and 4 from both splits; ``NoMissing`` keeps them.
    Y is 0 for odd digits and 1 for even ones.
    """
    if variant not in PARITY_VARIANTS:
        raise ValueError(f"unknown ParityMNIST variant {variant!r}")
    label = "ParityMNIST" if variant == "Missing34" else "ParityMNIST-NoMissing"
    return (
        _parity_split(raw_train, variant, f"{label}/train"),
        _parity_split(raw_test, variant, f"{label}/test"),
    )
