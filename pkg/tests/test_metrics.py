import pytest

import numpy as np

from strider.metrics import (
    CostModel,
    CostReport,
    RunTrace,
    average_precision,
    flops_ledger,
    frame_rate,
    mean_average_precision,
    top1_accuracy,
)
from strider.recognizer import Recognizer


def _oracle_ap(scores, positives):
    """Precision at every positive of the descending ranking, ties in input order."""
    ranking = sorted(range(len(scores)), key=lambda i: -scores[i])
    hits, precisions = 0, []
    for k, i in enumerate(ranking, start=1):
        if positives[i]:
            hits += 1
            precisions.append(hits / k)
    return float(np.mean(precisions))


def _oracle_map(scores, labels, n_classes):
    aps = []
    for c in range(n_classes):
        pos = [lab == c for lab in labels]
        if any(pos):
            aps.append(_oracle_ap([row[c] for row in scores], pos))
    return float(np.mean(aps))


class TestTop1:
    def test_value(self):
        preds = np.array([[0.1, 0.9], [0.8, 0.2], [0.3, 0.7]])
        assert top1_accuracy(preds, [1, 0, 0]) == pytest.approx(2 / 3)

    def test_tie_goes_to_lowest_class(self):
        assert top1_accuracy(np.array([[0.5, 0.5]]), [0]) == 1.0
        assert top1_accuracy(np.array([[0.5, 0.5]]), [1]) == 0.0

    def test_shape_errors(self):
        with pytest.raises(ValueError):
            top1_accuracy(np.ones(3), [0, 0, 0])
        with pytest.raises(ValueError):
            top1_accuracy(np.ones((2, 2)), [0])


class TestAveragePrecision:
    def test_example(self):
        assert average_precision([0.9, 0.8, 0.1], [True, False, True]) == pytest.approx(5 / 6)

    def test_perfect(self):
        assert average_precision([0.9, 0.8, 0.1], [True, True, False]) == 1.0

    def test_tie_order_stable(self):
        # The positive second among equal scores ranks second.
        assert average_precision([0.5, 0.5], [False, True]) == 0.5
        assert average_precision([0.5, 0.5], [True, False]) == 1.0

    def test_needs_positive(self):
        with pytest.raises(ValueError):
            average_precision([0.1, 0.2], [False, False])


class TestMeanAveragePrecision:
    @pytest.mark.filterwarnings("ignore::UserWarning")
    @pytest.mark.parametrize("seed", range(40))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 11))
        n_classes = int(rng.integers(1, 4))
        # Coarse scores make ties common.
        scores = rng.integers(0, 4, size=(n, n_classes)) / 4
        labels = rng.integers(0, n_classes, size=n)
        expected = _oracle_map(scores.tolist(), labels.tolist(), n_classes)
        assert mean_average_precision(scores, labels, n_classes) == expected

    def test_skips_classes_without_positives(self):
        scores = np.array([[0.9, 0.1, 0.0], [0.2, 0.8, 0.0]])
        with pytest.warns(UserWarning):
            got = mean_average_precision(scores, [0, 1], 3)
        assert got == 1.0

    def test_no_videos(self):
        with pytest.raises(ValueError):
            mean_average_precision(np.ones((0, 2)), [])


class TestFrameRate:
    def test_example(self):
        assert round(frame_rate(8.52), 3) == 0.071

    def test_basis(self):
        assert frame_rate(30, basis=60) == 0.5
        with pytest.raises(ValueError):
            frame_rate(1, basis=0)


class TestCostReport:
    @pytest.fixture(scope="class")
    def report(self):
        return CostReport(
            top1=0.5,
            mAP=0.625,
            frame_rate=0.071,
            frames_mean=8.52,
            flops_spatial=3.868e10,
            flops_temporal=1.2e7,
            flops_policy=3.3e5,
            flops_integration=4.1e8,
            flops_classifier=2e5,
        )

    def test_total_is_sum(self, report):
        parts = [
            report.flops_spatial,
            report.flops_temporal,
            report.flops_policy,
            report.flops_integration,
            report.flops_classifier,
        ]
        assert report.flops_total == sum(parts)

    def test_text(self, report, tmp_path):
        report.write(tmp_path / "report.txt", header=["mode=argmax"])
        text = (tmp_path / "report.txt").read_text()
        assert text.startswith("# mode=argmax\n")
        assert "frames_mean=8.52\n" in text
        back = CostReport.read(tmp_path / "report.txt")
        assert back.top1 == 0.5
        assert back.flops_total == pytest.approx(report.flops_total, rel=1e-5)

    def test_missing_key(self):
        with pytest.raises(ValueError):
            CostReport.from_text("top1=0.5\n")

    def test_fractions(self):
        with pytest.raises(ValueError):
            CostReport(1.5, 0.5, 0.1, 1, 0, 0, 0, 0, 0)

    @pytest.mark.parametrize("rate", [-0.1, 1.25])
    def test_frame_rate_is_a_fraction(self, rate):
        with pytest.raises(ValueError, match="frame_rate"):
            CostReport(0.5, 0.5, rate, 150, 0, 0, 0, 0, 0)

    def test_charge_several_frames(self):
        trace = RunTrace()
        trace.charge_frame(2.0, 3)
        assert trace.frames == 3
        assert trace.spatial_flops == 6.0


class TestLedger:
    def _trace(self, videos, frames, policy_calls=0):
        trace = RunTrace()
        trace.charge_video(videos)
        for _ in range(frames):
            trace.charge_frame(2.0)
        trace.charge_temporal(frames)
        trace.charge_policy(policy_calls)
        trace.charge_integration(videos)
        return trace

    def test_per_video_means(self):
        model = CostModel(2.0, 3.0, 5.0, 7.0, 11.0)
        ledger = flops_ledger(self._trace(2, 6, 4), model)
        assert ledger["flops_spatial"] == 6.0
        assert ledger["flops_temporal"] == 9.0
        assert ledger["flops_policy"] == 10.0
        assert ledger["flops_integration"] == 7.0
        assert ledger["flops_classifier"] == 11.0
        assert ledger["flops_total"] == 43.0

    def test_linear_in_frames(self):
        model = CostModel(2.0, 3.0, 5.0, 7.0, 11.0)
        a = flops_ledger(self._trace(1, 4), model)
        b = flops_ledger(self._trace(1, 8), model)
        assert b["flops_spatial"] == 2 * a["flops_spatial"]
        assert b["flops_temporal"] == 2 * a["flops_temporal"]

    def test_empty_trace(self):
        with pytest.raises(ValueError):
            flops_ledger(RunTrace(), CostModel(1, 1, 1, 1, 1))

    def test_calibrated_total(self):
        """Default model at 8.52 mean frames per video models about 38.7 GFLOPs."""
        model = Recognizer(policy_width=64, policy_layers=2).model
        cost = model.cost_model()
        trace = RunTrace()
        trace.charge_video(100)
        for _ in range(852):
            trace.charge_frame(cost.spatial_per_frame)
        trace.charge_temporal(852)
        trace.charge_policy(852)
        trace.charge_integration(100)
        ledger = flops_ledger(trace, cost)
        assert ledger["flops_total"] / 1e9 == pytest.approx(38.7, rel=0.02)
        assert ledger["flops_spatial"] > 0.95 * ledger["flops_total"]
        assert "calibrated" in cost.spatial_note
