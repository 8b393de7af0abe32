"""Training loop wiring: iterations, metrics, determinism, resume."""

import csv

import numpy as np
import pytest

from reidlab import NumericalFailureError, default_config, run_training
from reidlab.dictionary import BACKGROUND, UNLABELED
from reidlab.training import METRICS_CSV_COLUMNS, TrainState, train_iteration


def tiny_config(tmp_path, seed=11, **overrides):
    defaults = dict(
        total_iterations=40,
        num_train_identities=12,
        num_test_identities=8,
        eval_every=20,
        gallery_size=8,
    )
    defaults.update(overrides)
    return default_config(seed=seed, output_dir=str(tmp_path), **defaults)


class TestTrainIteration:
    def test_cold_start_empty_dictionary(self, tmp_path):
        state = TrainState(tiny_config(tmp_path))
        row = train_iteration(state)
        assert row.iteration == 0
        assert row.subgroup_count >= 2
        assert row.olp_loss == 0.0  # no negatives yet
        assert row.dict_size > 0

    def test_dictionary_insertion_counts(self, tmp_path):
        state = TrainState(tiny_config(tmp_path))
        seen = 0
        for _ in range(5):
            before = state.dictionary.next_counter
            train_iteration(state)
            inserted = state.dictionary.next_counter - before
            labels = state.dictionary.labels()[-(inserted):]
            id_count = sum(1 for l in labels if l >= 1)
            unlabeled = sum(1 for l in labels if l == UNLABELED)
            backgrounds = sum(1 for l in labels if l == BACKGROUND)
            assert backgrounds == 10  # 5 storage-flagged per image
            assert inserted == id_count + unlabeled + 10
            seen += inserted
        assert state.dictionary.next_counter == seen

    def test_total_loss_is_exact_sum(self, tmp_path):
        state = TrainState(tiny_config(tmp_path))
        for _ in range(10):
            row = train_iteration(state)
            assert row.total_loss == row.olp_loss + row.hep_loss

    def test_full_softmax_mode_uses_whole_class_set(self, tmp_path):
        state = TrainState(tiny_config(tmp_path, loss_mode="olp_softmax"))
        for _ in range(5):
            row = train_iteration(state)
            assert row.pool_size == 13  # C + 1

    def test_pairing_only_mode_skips_head(self, tmp_path):
        state = TrainState(tiny_config(tmp_path, loss_mode="olp_only"))
        for _ in range(5):
            row = train_iteration(state)
            assert row.hep_loss == 0.0 and row.pool_size == 0
        np.testing.assert_array_equal(state.head.weight, 0.0)

    def test_learning_rate_schedule_in_rows(self, tmp_path):
        cfg = tiny_config(tmp_path, total_iterations=12)
        state = TrainState(cfg)
        rates = [train_iteration(state).lr for _ in range(12)]
        assert rates[:10] == [0.001] * 10  # drop at floor(5/6 * 12) = 10
        assert rates[10:] == [0.0001] * 2

    def test_non_finite_loss_aborts(self, tmp_path):
        state = TrainState(tiny_config(tmp_path))
        state.net.weights[0][...] = np.nan
        with pytest.raises(NumericalFailureError):
            train_iteration(state)


class TestRunTraining:
    def test_artifacts_written(self, tmp_path):
        cfg = tiny_config(tmp_path)
        result = run_training(cfg)
        metrics = tmp_path / "metrics.csv"
        with open(metrics, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == METRICS_CSV_COLUMNS
        assert len(rows) == 1 + cfg.total_iterations
        assert (tmp_path / "eval.csv").exists()
        assert (tmp_path / "checkpoint.bin").exists()
        assert result.eval_points[0][0] == 0
        assert result.eval_points[-1][0] == cfg.total_iterations

    def test_metrics_csv_sum_column_parses_exactly(self, tmp_path):
        run_training(tiny_config(tmp_path))
        with open(tmp_path / "metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            assert float(row["total_loss"]) == float(row["olp_loss"]) + float(row["hep_loss"])

    def test_bitwise_deterministic_reruns(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        run_training(tiny_config(a_dir, seed=21))
        run_training(tiny_config(b_dir, seed=21))
        for name in ("metrics.csv", "eval.csv", "checkpoint.bin"):
            assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes(), name

    def test_different_seeds_differ(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        run_training(tiny_config(a_dir, seed=21))
        run_training(tiny_config(b_dir, seed=22))
        assert (a_dir / "metrics.csv").read_bytes() != (b_dir / "metrics.csv").read_bytes()

    def test_resume_continues_iteration_numbering(self, tmp_path):
        cfg = tiny_config(tmp_path, total_iterations=30)
        first = default_config(seed=11, output_dir=str(tmp_path),
                               total_iterations=15, num_train_identities=12,
                               num_test_identities=8, eval_every=0, gallery_size=8)
        result = run_training(first)
        resumed = run_training(cfg, resume_from=result.checkpoint_path)
        with open(tmp_path / "metrics.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["iteration"]) for r in rows] == list(range(30))
        assert resumed.state.iteration == 30

    def test_final_eval_improves_over_initial(self, tmp_path):
        cfg = tiny_config(tmp_path, total_iterations=800, seed=5,
                          num_train_identities=40, num_test_identities=30,
                          eval_every=0, gallery_size=30)
        result = run_training(cfg)
        first = result.eval_points[0][1]
        last = result.eval_points[-1][1]
        assert last.cmc[1] > first.cmc[1]
        assert last.mAP > first.mAP
