"""Reproduction checks for the results table, one printed PASS/FAIL line each.

The blob and MNIST grids are slow (about 30 s per blob dataset, several
minutes per MNIST dataset). MNIST checks are skipped unless MNIST_DIR points
at the four IDX files.
"""

import functools
import os
import time
from pathlib import Path

import numpy as np
import pytest

from cbm_leakage import harness
from cbm_leakage.cli import main
from cbm_leakage.clm import ConceptLabeler, Mode
from cbm_leakage.nn_core import backprop
from cbm_leakage.target import ThreeNearestNeighbors

from test_nn_core import max_rel_error, numeric_grad, random_small_net

BLOB_REPEATS = 20
MNIST_REPEATS = 3

HM, SM, H, S = Mode.HARD_MCD, Mode.SOFT_MCD, Mode.HARD, Mode.SOFT


def report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
    assert ok, detail


@functools.cache
def grid(dataset):
    """Mean accuracy per mode and the CPU seconds the grid took."""
    repeats = MNIST_REPEATS if dataset in harness.MNIST_DATASETS else BLOB_REPEATS
    start = time.process_time()
    results = harness.run_grid([dataset], base_seed=0, repeats={dataset: repeats})
    seconds = time.process_time() - start
    return {r.mode: r.mean for r in results}, seconds


def fmt(means, *modes):
    return ", ".join(f"{m.label}={means[m]:.3f}" for m in modes)


def mnist_available():
    d = os.environ.get("MNIST_DIR")
    if not d:
        return False
    return any((Path(d) / f"train-images-idx3-ubyte{s}").exists() for s in ("", ".gz"))


needs_mnist = pytest.mark.skipif(not mnist_available(), reason="set MNIST_DIR to the MNIST IDX files")


@pytest.mark.slow
def test_1_blobs_leakage(capsys):
    m, sec = grid("blobs")
    ok = m[S] >= 0.75 and abs(m[H] - 0.5) <= 0.07 and abs(m[HM] - 0.5) <= 0.07 and sec <= 120
    report(capsys, 1, "Blobs leakage", ok, f"{fmt(m, S, H, HM)}, {sec:.0f}s CPU")


@pytest.mark.slow
def test_2_noconcept_blobs(capsys):
    m, sec = grid("noconceptblobs")
    ok = m[S] >= 0.90 and m[HM] <= 0.56 and m[H] <= 0.56 and sec <= 120
    report(capsys, 2, "NoConceptBlobs", ok, f"{fmt(m, S, H, HM)}, {sec:.0f}s CPU")


@pytest.mark.slow
def test_3_ambiguous_blobs(capsys):
    m, _ = grid("ambiguousblobs")
    gap = m[HM] - m[H]
    ok = gap >= 0.05 and m[SM] >= 0.95
    report(capsys, 3, "AmbiguousBlobs uncertainty gain", ok, f"{fmt(m, HM, H, SM)}, gap={gap:.3f}")


@pytest.mark.slow
def test_4_overlapping_blobs(capsys):
    m, _ = grid("overlappingblobs")
    gap = m[HM] - m[H]
    ok = m[HM] >= 0.80 and m[H] <= 0.62 and gap >= 0.25
    report(capsys, 4, "OverlappingBlobs uncertainty gain", ok, f"{fmt(m, HM, H)}, gap={gap:.3f}")


@pytest.mark.slow
@pytest.mark.mnist
@needs_mnist
def test_5_parity_mnist(capsys):
    m, sec = grid("paritymnist")
    _, sec2 = grid("paritymnist-nomissing")
    ok = (0.60 <= m[S] <= 0.75 and 0.47 <= m[H] <= 0.55 and 0.47 <= m[HM] <= 0.55
          and sec + sec2 <= 1800)
    report(capsys, 5, "ParityMNIST leakage and mitigation", ok,
           f"{fmt(m, S, H, HM)}, {sec + sec2:.0f}s CPU for both MNIST grids")


@pytest.mark.slow
@pytest.mark.mnist
@needs_mnist
def test_6_parity_mnist_nomissing(capsys):
    m, _ = grid("paritymnist-nomissing")
    in_band = all(0.55 <= m[mode] <= 0.70 for mode in (HM, SM, H, S))
    ok = in_band and abs(m[H] - m[HM]) <= 0.03
    report(capsys, 6, "ParityMNIST-NoMissing", ok, fmt(m, HM, SM, H, S))


@pytest.mark.slow
def test_7_soft_mcd_leaks(capsys):
    details, ok = [], True
    for dataset in ("blobs", "noconceptblobs"):
        m, _ = grid(dataset)
        ok &= m[SM] >= m[HM] + 0.20
        details.append(f"{dataset}: {fmt(m, SM, HM)}")
    report(capsys, 7, "Soft MCD still leaks", ok, "; ".join(details))


def test_8_gradient_suite(capsys):
    rng = np.random.default_rng(8)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        mlp, X, C, mask = random_small_net(rng, "elu")
        worst = max(worst, max_rel_error(backprop(mlp, X, C, mask), numeric_grad(mlp, X, C, mask)))
    seconds = time.perf_counter() - start
    ok = worst <= 1e-4 and seconds < 10
    report(capsys, 8, "analytic vs finite-difference gradients", ok,
           f"max relative error {worst:.2e} over 100 nets in {seconds:.2f}s")


def test_9_dropout_zero_equivalence(capsys):
    rng = np.random.default_rng(9)
    mismatches = 0
    for i in range(20):
        X = rng.normal(size=(30, 3))
        C = (rng.random((30, 2)) < 0.5).astype(float)
        model = ConceptLabeler(hidden_dim=16, dropout=0.0, epochs=i % 3, batch_size=8,
                               mcd_samples=int(rng.integers(1, 60)), random_state=i).fit(X, C)
        Q = rng.normal(size=(50, 3))
        mismatches += not np.array_equal(model.predict_mcd_hard(Q, i), model.predict_hard(Q))
        mismatches += not np.array_equal(model.predict_mcd_soft(Q, i), model.predict_soft(Q))
    report(capsys, 9, "dropout 0 makes MCD equal the plain modes", mismatches == 0,
           f"{mismatches} mismatches over 20 models")


def test_10_cli_determinism(capsys, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert main(["run", "--dataset", "blobs", "--mode", "hard-mcd", "--repeats", "5",
                     "--seed", "0", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    report(capsys, 10, "byte-identical CSV across runs", outs[0] == outs[1],
           f"{len(outs[0])} bytes, identical={outs[0] == outs[1]}")


def test_11_projection(capsys, tmp_path):
    out = tmp_path / "proj.csv"
    assert main(["plot-projection", "--dataset", "blobs", "--seed", "0", "--out", str(out)]) == 0
    _, _, rows = harness.read_projection(out)
    proj = np.array([float(r["proj"]) for r in rows])
    sigma = np.array([float(r["sigma"]) for r in rows])
    C = np.array([int(r["C"]) for r in rows])
    Y = np.array([int(r["Y"]) for r in rows])
    train = np.array([r["split"] == "train" for r in rows])
    sign_sep = np.mean((proj > 0) == (C == 1))
    knn = ThreeNearestNeighbors().fit(sigma[train, None], Y[train])
    probe = knn.score(sigma[~train, None], Y[~train])
    in_range = bool(np.all((sigma > 0) & (sigma < 1)))
    ok = sign_sep >= 0.99 and probe >= 0.75 and in_range
    report(capsys, 11, "projection plot data", ok,
           f"sign separability {sign_sep:.3f}, 1-D 3-NN target probe {probe:.3f}, "
           f"sigma in (0,1): {in_range}")
