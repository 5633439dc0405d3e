"""Experiment runner: dataset x mode grids, summaries, tables, projection data."""

from __future__ import annotations

import csv
import functools
import logging
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .clm import ConceptLabeler, ConceptPredictorConfig, Mode
from .datasets import blob_spec, gen_blobs, load_mnist_dir, make_parity_mnist, resolve_mnist_dir
from .nn_core import BLOB_TRAIN, MNIST_TRAIN, TrainConfig
from .target import ThreeNearestNeighbors, accuracy

log = logging.getLogger(__name__)

# CLI token -> display name, in results-table order.
DATASETS = {
    "ambiguousblobs": "AmbiguousBlobs",
    "blobs": "Blobs",
    "noconceptblobs": "NoConceptBlobs",
    "overlappingblobs": "OverlappingBlobs",
    "paritymnist": "ParityMNIST",
    "paritymnist-nomissing": "ParityMNIST-NoMissing",
}
BLOB_DATASETS = ("ambiguousblobs", "blobs", "noconceptblobs", "overlappingblobs")
MNIST_DATASETS = ("paritymnist", "paritymnist-nomissing")
MODE_ORDER = (Mode.HARD_MCD, Mode.SOFT_MCD, Mode.HARD, Mode.SOFT)
DEFAULT_REPEATS = {**{d: 20 for d in BLOB_DATASETS}, **{d: 10 for d in MNIST_DATASETS}}

N_PER_CLUSTER = 250
MODEL_SEED_OFFSET = 10_000
CSV_COLUMNS = ("dataset", "algorithm", "mean_acc", "std_acc", "min_acc", "max_acc")


def dataset_id(name: str) -> str:
    token = name.strip().lower()
    if token in DATASETS:
        return token
    for key, display in DATASETS.items():
        if display.lower() == token:
            return key
    raise ValueError(f"unknown dataset {name!r}; expected one of {', '.join(DATASETS)}")


def default_config(dataset, mode=Mode.SOFT, **overrides) -> ConceptPredictorConfig:
    """Predictor config with the per-family training defaults.

    ``overrides`` may name any ConceptPredictorConfig or TrainConfig field;
    ``None`` values are ignored.
    """
    dataset = dataset_id(dataset)
    train = MNIST_TRAIN if dataset in MNIST_DATASETS else BLOB_TRAIN
    overrides = {k: v for k, v in overrides.items() if v is not None}
    train_fields = set(TrainConfig.__dataclass_fields__)
    train = replace(train, **{k: v for k, v in overrides.items() if k in train_fields})
    rest = {k: v for k, v in overrides.items() if k not in train_fields}
    return ConceptPredictorConfig(mode=Mode.parse(mode), train=train, **rest)


@functools.lru_cache(maxsize=2)
def _mnist(directory: str):
    return load_mnist_dir(directory)


def load_dataset(dataset, seed=0, mnist_dir=None):
    """``(train, test)`` LabeledDatasets. Only blob datasets depend on ``seed``."""
    dataset = dataset_id(dataset)
    if dataset in BLOB_DATASETS:
        return gen_blobs(blob_spec(DATASETS[dataset]), N_PER_CLUSTER, seed)
    raw_train, raw_test = _mnist(str(resolve_mnist_dir(mnist_dir).resolve()))
    variant = "Missing34" if dataset == "paritymnist" else "NoMissing"
    return make_parity_mnist(raw_train, raw_test, variant)


def run_repeat_modes(dataset, config: ConceptPredictorConfig, seed, modes=MODE_ORDER,
                     mnist_dir=None) -> dict:
    """One sequential-bottleneck run scored under several predictor modes.

    Training does not depend on the mode, so one trained CLM serves every
    mode in ``modes``; the accuracies equal separate single-mode runs.
    Data use ``seed``; the CLM and its MCD masks use ``seed + 10_000``.
    """
    train, test = load_dataset(dataset, seed, mnist_dir)
    model_seed = seed + MODEL_SEED_OFFSET
    config = replace(config, train=replace(config.train, seed=model_seed))
    clm = ConceptLabeler.from_config(config).fit(train.X, train.C)
    scores = {}
    for mode in modes:
        labeler = clm.with_mode(mode)
        # one mask sequence for both splits, so train and test rows of the
        # same input get the same MCD representation
        train_rep = labeler.transform(train.X, seed=model_seed)
        test_rep = labeler.transform(test.X, seed=model_seed)
        knn = ThreeNearestNeighbors().fit(train_rep, train.Y)
        scores[Mode.parse(mode)] = accuracy(knn.predict(test_rep), test.Y)
    return scores


def run_repeat(dataset, config: ConceptPredictorConfig, seed, mnist_dir=None) -> float:
    """Test accuracy of one CBM run under ``config.mode``."""
    return run_repeat_modes(dataset, config, seed, (config.mode,), mnist_dir)[config.mode]


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str
    mode: Mode = Mode.SOFT
    repeats: int = 20
    base_seed: int = 0
    overrides: dict = field(default_factory=dict)
    out: Path | None = None
    mnist_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "dataset", dataset_id(self.dataset))
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")


@dataclass(frozen=True)
class ExperimentResult:
    dataset: str
    mode: Mode
    accuracies: tuple

    @property
    def mean(self) -> float:
        return statistics.fmean(self.accuracies)

    @property
    def std(self) -> float:
        # sample std; a single repeat reports 0
        return statistics.stdev(self.accuracies) if len(self.accuracies) > 1 else 0.0

    @property
    def min(self) -> float:
        return min(self.accuracies)

    @property
    def max(self) -> float:
        return max(self.accuracies)

    @property
    def summary(self):
        return self.mean, self.std, self.min, self.max

    @property
    def row(self) -> dict:
        return {
            "dataset": DATASETS[self.dataset],
            "algorithm": self.mode.label,
            "mean_acc": self.mean,
            "std_acc": self.std,
            "min_acc": self.min,
            "max_acc": self.max,
        }


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    config = default_config(spec.dataset, spec.mode, **spec.overrides)
    accs = []
    for i in range(spec.repeats):
        accs.append(run_repeat(spec.dataset, config, spec.base_seed + i, spec.mnist_dir))
        log.info("%s %s repeat %d: %.4f", spec.dataset, spec.mode.label, i, accs[-1])
    return ExperimentResult(spec.dataset, spec.mode, tuple(accs))


def run_grid(datasets=tuple(DATASETS), base_seed=0, repeats=None, overrides=None,
             modes=MODE_ORDER, mnist_dir=None) -> list[ExperimentResult]:
    """Every dataset x mode summary. ``repeats`` maps dataset -> count (20 blob, 10 MNIST by default)."""
    repeats = {**DEFAULT_REPEATS, **(repeats or {})}
    results = []
    for dataset in map(dataset_id, datasets):
        config = default_config(dataset, Mode.SOFT, **(overrides or {}))
        per_mode = {Mode.parse(m): [] for m in modes}
        for i in range(repeats[dataset]):
            scores = run_repeat_modes(dataset, config, base_seed + i, modes, mnist_dir)
            for mode, acc in scores.items():
                per_mode[mode].append(acc)
            log.info("%s repeat %d: %s", dataset, i,
                     " ".join(f"{m.label}={a:.4f}" for m, a in scores.items()))
        results.extend(ExperimentResult(dataset, m, tuple(a)) for m, a in per_mode.items())
    return sort_results(results)


def sort_results(results):
    """Dataset-major in table order, then HardMCD, SoftMCD, Hard, Soft."""
    order = list(DATASETS)
    return sorted(results, key=lambda r: (order.index(r.dataset), MODE_ORDER.index(r.mode)))


def write_results(results, fmt="csv", path=None) -> str:
    """Render results as CSV or a Markdown table; write to ``path`` if given."""
    results = sort_results(results)
    if not results:
        raise ValueError("no results to write")
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for r in results:
            row = r.row
            lines.append(",".join(
                [row["dataset"], row["algorithm"]]
                + [f"{row[c]:.6f}" for c in CSV_COLUMNS[2:]]
            ))
    elif fmt in ("markdown", "md"):
        lines = [
            "| Dataset | Algorithm | Mean Acc. | Std. dev. Acc. | Min. Acc. | Max. Acc. |",
            "|---|---|---|---|---|---|",
        ]
        for r in results:
            row = r.row
            lines.append(
                f"| {row['dataset']} | {row['algorithm']} | "
                + " | ".join(f"{row[c]:.3f}" for c in CSV_COLUMNS[2:]) + " |"
            )
    else:
        raise ValueError(f"unknown format {fmt!r}; use csv or markdown")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    for row in rows:
        for c in CSV_COLUMNS[2:]:
            row[c] = float(row[c])
    return rows


def emit_projection(dataset="blobs", seed=0, out=None, epochs=None) -> str:
    """Linear-CLM projection data for a blob dataset.

    Trains ``sigmoid(w.x + b)`` on the concept labels and writes one CSV
    record per train and test point with the raw projection and its sigmoid.
    The weights and intercept go in ``#`` header lines.
    """
    dataset = dataset_id(dataset)
    if dataset not in BLOB_DATASETS:
        raise ValueError(f"projection data is only defined for blob datasets, got {dataset}")
    train, test = load_dataset(dataset, seed)
    config = default_config(dataset, Mode.SOFT, hidden_dim=0, dropout_p=0.0,
                            epochs=epochs, seed=seed + MODEL_SEED_OFFSET)
    clm = ConceptLabeler.from_config(config).fit(train.X, train.C)
    net = clm.net_
    L = train.n_concepts

    def cols(prefix):
        return [prefix] if L == 1 else [f"{prefix}{j}" for j in range(L)]

    lines = [
        f"# dataset={DATASETS[dataset]} seed={seed}",
        "# w=" + ";".join(",".join(repr(float(v)) for v in w) for w in net.W2),
        "# b=" + ",".join(repr(float(v)) for v in net.b2),
        ",".join(["split", "x1", "x2", *cols("C"), "Y", *cols("proj"), *cols("sigma")]),
    ]
    for split, data in (("train", train), ("test", test)):
        proj = data.X @ net.W2.T + net.b2
        sig = clm.predict_soft(data.X)
        for x, c, y, p, s in zip(data.X, data.C, data.Y, proj, sig):
            lines.append(",".join(
                [split, repr(float(x[0])), repr(float(x[1]))]
                + [str(int(v)) for v in c] + [str(int(y))]
                + [repr(float(v)) for v in p] + [repr(float(v)) for v in s]
            ))
    text = "\n".join(lines) + "\n"
    if out is not None:
        Path(out).write_text(text)
    return text


def read_projection(path):
    """Parse :func:`emit_projection` output into ``(w, b, rows)``."""
    w = b = None
    body = []
    with open(path) as f:
        for line in f:
            if line.startswith("# w="):
                w = np.array([[float(v) for v in r.split(",")] for r in line[4:].strip().split(";")])
            elif line.startswith("# b="):
                b = np.array([float(v) for v in line[4:].strip().split(",")])
            elif not line.startswith("#"):
                body.append(line)
    return w, b, list(csv.DictReader(body))
