"""Directional studies on the synthetic world. Minutes each; run with `-m slow`."""
import pytest

from vitac_data.records import Modality
from vitac_eval.config import EvalConfig
from vitac_eval.retrieval import topk_precision
from vitac_eval.studies import (
    StudySetup,
    architecture_comparison,
    build_world_dataset,
    flat_vs_fold,
    touch_helps_vision,
    train_model,
)
from vitac_model.joint import Architecture

pytestmark = pytest.mark.slow

SEEDS = list(range(5))


def test_world_split_sizes():
    data = build_world_dataset(StudySetup(), seed=0)
    assert len(data.fabrics) == 50
    assert len(data.train_ids) == 40 and len(data.test_ids) == 10


def test_cross_modal_net_learns_touch_to_depth():
    setup = StudySetup(iterations=5000)
    data = build_world_dataset(setup, seed=0)
    model = train_model(setup, data, Architecture.CROSS_MODAL, seed=0)
    cell = topk_precision(model, data, Modality.TOUCH_FOLD, Modality.DEPTH, EvalConfig(repetitions=3))
    assert cell.top1 >= 0.5


def test_fold_presses_beat_flat_presses():
    frame = flat_vs_fold(StudySetup(), SEEDS)
    assert frame["touch_fold"].mean() >= frame["touch_flat"].mean()


def test_multi_input_at_least_single_input():
    frame = architecture_comparison(
        StudySetup(), SEEDS, archs=(Architecture.CROSS_MODAL, Architecture.MULTI_INPUT)
    )
    assert frame["multi_input"].mean() >= frame["cross_modal"].mean()


def test_touch_helps_vision():
    frame = touch_helps_vision(StudySetup(), SEEDS)
    gain = frame["seen_joint"] - frame["seen_snn"]
    assert (gain >= -0.02).all()
    assert gain.mean() > 0
