import json

import numpy as np
import pytest

import handover as h
from handover.dataset import (DatasetError, GeneratorConfig, HandoverDataset,
                              HandoverPair, Trajectory, has_pause,
                              max_heading_change_deg)


def test_receiver_pose_validation():
    h.ReceiverPose(1.0, -2.0)
    with pytest.raises(DatasetError):
        h.ReceiverPose(float("nan"), 0.0)
    with pytest.raises(DatasetError):
        h.ReceiverPose(101.0, 0.0)


def test_giver_pose_floor():
    h.GiverPose(0.0, 0.0, 0.0)
    with pytest.raises(DatasetError):
        h.GiverPose(0.0, 0.0, -0.01)


def test_trajectory_invariants():
    t = np.arange(10) / 30.0
    poses = np.zeros((10, 2))
    traj = Trajectory(t, poses, 30.0)
    assert len(traj) == 10 and traj.dim == 2
    with pytest.raises(DatasetError):
        Trajectory(t[:1], poses[:1], 30.0)
    with pytest.raises(DatasetError):
        Trajectory(t[::-1], poses, 30.0)
    with pytest.raises(DatasetError):
        Trajectory(t * 2.0, poses, 30.0)  # wrong spacing for the declared rate


def test_pair_alignment_checked():
    t = np.arange(5) / 30.0
    r = Trajectory(t, np.zeros((5, 2)), 30.0)
    g_short = Trajectory(t[:4], np.zeros((4, 3)), 30.0)
    with pytest.raises(DatasetError):
        HandoverPair("x", "ID", r, g_short)


class TestGenerator:
    def test_counts_and_labels(self):
        ds = h.generate_synthetic(GeneratorConfig(n_id=9, n_ood=3), seed=1)
        assert ds.n == 12
        assert sum(1 for p in ds.pairs if p.label == "ID") == 9
        assert sum(1 for p in ds.pairs if p.label == "OOD") == 3

    def test_full_scale_config_shape(self):
        # the headline configuration: 900 ID + 100 OOD at 30 Hz
        cfg = GeneratorConfig(n_id=900, n_ood=100, sample_rate_hz=30.0)
        assert cfg.n_id + cfg.n_ood == 1000

    def test_zero_counts_rejected(self):
        with pytest.raises(DatasetError):
            h.generate_synthetic(GeneratorConfig(n_id=0, n_ood=0), seed=1)
        with pytest.raises(DatasetError):
            h.generate_synthetic(GeneratorConfig(n_id=-1, n_ood=2), seed=1)

    def test_bad_rate_rejected(self):
        with pytest.raises(DatasetError):
            h.generate_synthetic(GeneratorConfig(n_id=1, n_ood=0, sample_rate_hz=0.0),
                                 seed=1)

    def test_determinism_bit_identical(self, tmp_path):
        cfg = GeneratorConfig(n_id=5, n_ood=2)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        h.save(h.generate_synthetic(cfg, seed=42), a)
        h.save(h.generate_synthetic(cfg, seed=42), b)
        assert a.read_bytes() == b.read_bytes()
        h.save(h.generate_synthetic(cfg, seed=43), b)
        assert a.read_bytes() != b.read_bytes()

    def test_id_paths_reach_giver(self, small_dataset):
        giver_loc = np.asarray(GeneratorConfig().giver_location)
        for p in small_dataset.pairs:
            if p.label == "ID":
                end = p.receiver.poses[-1]
                assert np.linalg.norm(end - giver_loc) < 0.5

    def test_ood_paths_pause_or_wander(self, small_dataset):
        for p in small_dataset.pairs:
            if p.label == "OOD":
                assert has_pause(p.receiver) or \
                    max_heading_change_deg(p.receiver) > 60.0

    def test_pairs_share_time_grid(self, small_dataset):
        for p in small_dataset.pairs:
            assert len(p.receiver) == len(p.giver)
            np.testing.assert_array_equal(p.receiver.times, p.giver.times)

    def test_giver_reach_within_range(self, small_dataset):
        giver_loc = np.asarray(GeneratorConfig().giver_location)
        for p in small_dataset.pairs:
            if p.label != "ID":
                continue
            reach = np.linalg.norm(p.giver.poses[-1][:2] - giver_loc)
            assert 0.3 < reach < 0.8


class TestPersistence:
    def test_round_trip_exact(self, small_dataset, tmp_path):
        path = tmp_path / "d.jsonl"
        h.save(small_dataset, path)
        assert h.load(path) == small_dataset

    def test_empty_dataset_header_only(self, tmp_path):
        path = tmp_path / "e.jsonl"
        h.save(HandoverDataset(()), path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        assert h.load(path).n == 0

    def test_line_schema(self, small_dataset, tmp_path):
        path = tmp_path / "d.jsonl"
        h.save(small_dataset, path)
        rec = json.loads(path.read_text().splitlines()[1])
        assert set(rec) == {"id", "label", "rate_hz", "receiver", "giver"}
        assert len(rec["receiver"][0]) == 3 and len(rec["giver"][0]) == 4

    def test_malformed_line_reports_lineno(self, small_dataset, tmp_path):
        path = tmp_path / "d.jsonl"
        h.save(small_dataset, path)
        lines = path.read_text().splitlines()
        lines[3] = lines[3][:-5]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError, match=":4"):
            h.load(path)

    def test_non_monotonic_timestamps_named(self, small_dataset, tmp_path):
        path = tmp_path / "d.jsonl"
        h.save(small_dataset, path)
        lines = path.read_text().splitlines()
        rec = json.loads(lines[2])
        rec["receiver"][1][0] = rec["receiver"][0][0]  # duplicate timestamp
        lines[2] = json.dumps(rec)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetError, match=rec["id"]):
            h.load(path)


class TestStratifiedKfold:
    def test_fold_structure_900_100(self):
        ds = h.generate_synthetic(GeneratorConfig(n_id=90, n_ood=10), seed=3)
        folds = h.stratified_kfold(ds, k=10, seed=5)
        assert len(folds) == 10
        for train, test in folds:
            labels = [ds.by_id(i).label for i in test]
            assert labels.count("ID") == 9 and labels.count("OOD") == 1
            assert len(train) + len(test) == ds.n

    def test_exact_partition(self, small_dataset):
        folds = h.stratified_kfold(small_dataset, k=4, seed=0)
        seen = [i for _, test in folds for i in test]
        assert sorted(seen) == sorted(p.id for p in small_dataset.pairs)

    def test_all_one_label(self):
        ds = h.generate_synthetic(GeneratorConfig(n_id=10, n_ood=0), seed=3)
        folds = h.stratified_kfold(ds, k=10, seed=5)
        assert all(len(test) == 1 for _, test in folds)

    def test_preconditions(self, small_dataset):
        with pytest.raises(DatasetError):
            h.stratified_kfold(small_dataset, k=1, seed=0)
        ds = h.generate_synthetic(GeneratorConfig(n_id=10, n_ood=0), seed=3)
        with pytest.raises(DatasetError):
            h.stratified_kfold(ds, k=11, seed=0)

    def test_deterministic(self, small_dataset):
        f1 = h.stratified_kfold(small_dataset, k=4, seed=9)
        f2 = h.stratified_kfold(small_dataset, k=4, seed=9)
        assert f1 == f2
