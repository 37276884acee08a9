"""Ablation wiring and pair metrics (tiny scale; quality is acceptance's job)."""

import numpy as np
import pytest

from toothfill.evaluation import (
    VARIANTS,
    AblationVariant,
    InferConfig,
    MetricsRow,
    evaluate_pair,
    run_ablation,
)
from toothfill.geometry.mesh import TriangleMesh
from toothfill.geometry.primitives import icosphere
from toothfill.inference import StopRule
from toothfill.synthcorpus import build_corpus
from toothfill.training import TrainConfig


def test_variant_flag_table():
    flags = {v.name: (v.use_2d, v.use_adv, v.use_deform) for v in VARIANTS}
    assert flags["bNet"] == (False, False, False)
    assert flags["bNet-P"] == (True, False, False)
    assert flags["bNet-P-D"] == (True, True, False)
    assert flags["FullNet"] == (True, True, True)


def test_metrics_row_means():
    row = MetricsRow("x", cds=[1.0, 2.0], hds=[3.0, 5.0], asds=[0.5, 0.5])
    assert row.cd == 1.5 and row.hd == 4.0 and row.asd == 0.5


def test_evaluate_pair_identity(sphere2):
    cd, hd, asd = evaluate_pair(sphere2, sphere2, n_samples=4000, seed=1)
    assert cd < 5e-3 and hd < 5e-2
    assert asd < 1e-6


def test_evaluate_pair_offset_spheres():
    a = icosphere(3)
    b = TriangleMesh(a.vertices + np.array([0.2, 0.0, 0.0]), a.faces.copy())
    cd, hd, asd = evaluate_pair(a, b, n_samples=20000, seed=0)
    assert abs(hd - 0.2) < 0.01


def test_evaluate_pair_symmetry(sphere2, unit_box):
    small_box = TriangleMesh(unit_box.vertices * 0.5, unit_box.faces.copy())
    ab = evaluate_pair(sphere2, small_box, n_samples=5000, seed=3)
    # symmetric definitions: swapping inputs only swaps the sample seeds
    ba = evaluate_pair(small_box, sphere2, n_samples=5000, seed=3)
    assert abs(ab[0] - ba[0]) < 5e-3
    assert abs(ab[1] - ba[1]) < 5e-2


@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    return build_corpus(6, seed=1, out_dir=out, split=(4, 1, 1), subdivisions=2)


TINY_TRAIN = TrainConfig(epochs=40, hidden=32, code_dim=16, batch=512)
TINY_INFER = InferConfig(stop=StopRule(tau_d=0.1, patience=5, max_iters=25),
                         resolution=24, n_metric_samples=2000,
                         disc_epochs=60, partial_code_iters=25)


def test_run_ablation_wiring(tiny_corpus, tmp_path):
    table = run_ablation(tiny_corpus, TINY_TRAIN, TINY_INFER, seeds=(0,),
                         out_dir=tmp_path)
    assert [row.variant for row in table] == ["bNet", "bNet-P", "bNet-P-D", "FullNet"]
    for row in table:
        assert row.n_fail == 0
        assert len(row.cds) == 1  # one test shape
        assert np.isfinite(row.cd) and np.isfinite(row.hd) and np.isfinite(row.asd)
    csv_text = (tmp_path / "ablation.csv").read_text()
    assert csv_text.splitlines()[0] == "variant,cd,hd,asd,n_fail"
    assert len(csv_text.strip().splitlines()) == 5
    md = (tmp_path / "ablation.md").read_text()
    assert "| FullNet |" in md


def test_run_ablation_deterministic(tiny_corpus):
    a = run_ablation(tiny_corpus, TINY_TRAIN, TINY_INFER, seeds=(0,))
    b = run_ablation(tiny_corpus, TINY_TRAIN, TINY_INFER, seeds=(0,))
    for ra, rb in zip(a, b):
        assert ra.cds == rb.cds
        assert ra.hds == rb.hds
        assert ra.asds == rb.asds
