import pytest

import numpy as np

from strider.data import (
    DatasetSplit,
    FeatureFileError,
    UnitSpec,
    VideoSample,
    VideoSource,
    batch_iter,
    class_counts,
    generate_synthetic,
    latent_oracle,
    load_feature_dir,
    load_feature_file,
    write_feature_dir,
    write_feature_file,
)
from strider.data.io import _HEADER


@pytest.fixture(scope="module")
def split():
    return generate_synthetic(
        n_frames=40, feature_dim=16, n_classes=5, n_train=30, n_test=10, seed=7
    )


class TestSynthetic:
    def test_sizes(self, split):
        assert len(split.train) == 30
        assert len(split.test) == 10
        assert all(s.features.shape == (40, 16) for s in split.train + split.test)

    def test_balanced_labels(self, split):
        assert np.array_equal(class_counts(split.train, 5), [6] * 5)
        assert np.array_equal(class_counts(split.test, 5), [2] * 5)

    def test_label_is_motif_sum(self, split):
        for s in split.train:
            assert sum(u.motif_id for u in s.units) % 5 == s.label

    def test_units_tile_video(self, split):
        for s in split.test:
            spans = [u.span for u in s.units]
            assert spans[0][0] == 0
            assert spans[-1][1] == s.n_frames
            assert all(a[1] == b[0] for a, b in zip(spans[:-1], spans[1:]))
            assert all(len(u.salient_frames) == 2 for u in s.units)

    def test_latent_oracle_exact(self, split):
        for s in split.train + split.test:
            assert latent_oracle(s, split.motif_directions) == s.label

    def test_deterministic(self):
        kw = dict(n_frames=20, feature_dim=8, n_classes=3, n_train=6, n_test=3, seed=2)
        a, b = generate_synthetic(**kw), generate_synthetic(**kw)
        for sa, sb in zip(a.train + a.test, b.train + b.test):
            assert np.array_equal(sa.features, sb.features)
            assert sa.label == sb.label

    def test_seed_changes_data(self):
        kw = dict(n_frames=20, feature_dim=8, n_classes=3, n_train=6, n_test=3)
        a, b = generate_synthetic(seed=0, **kw), generate_synthetic(seed=1, **kw)
        assert not np.array_equal(a.train[0].features, b.train[0].features)

    def test_ids_disjoint(self, split):
        assert not {s.video_id for s in split.train} & {s.video_id for s in split.test}

    @pytest.mark.parametrize(
        "kw",
        [
            dict(n_frames=5, n_units=3),
            dict(feature_dim=4, n_classes=5),
            dict(salient_per_unit=0),
            dict(noise_std=-1.0),
        ],
    )
    def test_infeasible(self, kw):
        args = dict(n_frames=40, feature_dim=16, n_classes=5, n_train=10, n_test=5)
        args.update(kw)
        with pytest.raises(ValueError):
            generate_synthetic(**args)

    def test_no_halo(self):
        split = generate_synthetic(
            n_frames=30,
            feature_dim=8,
            n_classes=3,
            n_train=3,
            n_test=3,
            halo_frames=0,
            distractor_frac=0.0,
            noise_std=0.0,
        )
        s = split.train[0]
        salient = {f for u in s.units for f in u.salient_frames}
        proj = np.abs(s.features @ split.motif_directions.T).max(axis=1)
        others = [t for t in range(s.n_frames) if t not in salient]
        assert np.allclose(proj[others], 0.0, atol=1e-10)


class TestTypes:
    def test_unit_spec_validates(self):
        with pytest.raises(ValueError):
            UnitSpec((3, 3), 0, (3,))
        with pytest.raises(ValueError):
            UnitSpec((0, 5), 0, (6,))
        with pytest.raises(ValueError):
            UnitSpec((0, 5), 0, (3, 1))

    def test_sample_rejects_nan(self):
        with pytest.raises(ValueError):
            VideoSample(np.array([[np.nan]]), 0)

    def test_sample_label_range(self):
        with pytest.raises(ValueError):
            VideoSample(np.ones((2, 2)), 3, num_classes=3)

    def test_split_needs_all_classes_in_train(self):
        a = VideoSample(np.ones((2, 2)), 0, video_id="a")
        b = VideoSample(np.ones((2, 2)), 1, video_id="b")
        with pytest.raises(ValueError):
            DatasetSplit([a], [b], 2)

    def test_split_disjoint(self):
        a = VideoSample(np.ones((2, 2)), 0, video_id="a")
        with pytest.raises(ValueError):
            DatasetSplit([a], [a], 1)


class TestFeatureFiles:
    def test_file_round_trip(self, tmp_path, split):
        s = split.train[0]
        write_feature_file(tmp_path / "v.vimf", s, 5)
        back = load_feature_file(tmp_path / "v.vimf")
        assert back.video_id == "v"
        assert back.label == s.label
        assert back.num_classes == 5
        assert np.allclose(back.features, s.features, atol=1e-5)

    def test_header_size(self, tmp_path, split):
        write_feature_file(tmp_path / "v.vimf", split.train[0], 5)
        assert (tmp_path / "v.vimf").stat().st_size == _HEADER.size + 4 * 40 * 16

    @pytest.mark.parametrize(
        "header",
        [
            (b"VIMX", 1, 2, 2, 0, 2),
            (b"VIMF", 2, 2, 2, 0, 2),
            (b"VIMF", 1, 0, 2, 0, 2),
            (b"VIMF", 1, 2, 2, 3, 2),
        ],
    )
    def test_bad_header(self, tmp_path, header):
        path = tmp_path / "bad.vimf"
        path.write_bytes(_HEADER.pack(*header) + np.zeros(4, dtype="<f4").tobytes())
        with pytest.raises(FeatureFileError):
            load_feature_file(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "short.vimf"
        path.write_bytes(_HEADER.pack(b"VIMF", 1, 2, 2, 0, 2) + np.zeros(3, dtype="<f4").tobytes())
        with pytest.raises(FeatureFileError):
            load_feature_file(path)

    def test_trailing(self, tmp_path):
        path = tmp_path / "long.vimf"
        path.write_bytes(_HEADER.pack(b"VIMF", 1, 2, 2, 0, 2) + np.zeros(5, dtype="<f4").tobytes())
        with pytest.raises(FeatureFileError):
            load_feature_file(path)

    def test_directory(self, tmp_path, split):
        assert write_feature_dir(tmp_path, split) == 40
        back = load_feature_dir(tmp_path)
        assert len(back.train) == 30
        assert len(back.test) == 10
        assert back.num_classes == 5
        assert back.train[0].video_id == "train/00000"
        assert [s.label for s in back.test] == [s.label for s in split.test]

    def test_empty_directory(self, tmp_path):
        (tmp_path / "train").mkdir()
        (tmp_path / "test").mkdir()
        with pytest.raises(FeatureFileError):
            load_feature_dir(tmp_path)


class TestBatching:
    def test_covers_every_sample(self, split):
        batches = list(batch_iter(split.train, 8, seed=1))
        assert [len(b) for b in batches] == [8, 8, 8, 6]
        ids = [s.video_id for b in batches for s in b]
        assert sorted(ids) == sorted(s.video_id for s in split.train)

    def test_epochs_differ(self, split):
        a = [s.video_id for b in batch_iter(split.train, 30, seed=1, epoch=0) for s in b]
        b = [s.video_id for b in batch_iter(split.train, 30, seed=1, epoch=1) for s in b]
        assert a != b

    def test_no_shuffle(self, split):
        batch = next(batch_iter(split.train, 3, shuffle=False))
        assert batch == split.train[:3]


class TestVideoSource:
    def test_split_cached(self):
        src = VideoSource(n_frames=20, feature_dim=8, n_classes=3, n_train=6, n_test=3)
        assert src.split is src.split

    def test_update_regenerates(self):
        src = VideoSource(n_frames=20, feature_dim=8, n_classes=3, n_train=6, n_test=3)
        first = src.split
        src.update(data_seed=5)
        assert src.split is not first

    def test_validate(self):
        with pytest.raises(ValueError):
            VideoSource(feature_dim=4, n_classes=5)
        with pytest.raises(ValueError):
            VideoSource(n_classes=1)

    def test_feature_dir(self, tmp_path, split):
        write_feature_dir(tmp_path, split)
        src = VideoSource(feature_dir=str(tmp_path), feature_dim=16, n_classes=5)
        assert len(src.split.train) == 30

    def test_feature_dir_mismatch(self, tmp_path, split):
        write_feature_dir(tmp_path, split)
        src = VideoSource(feature_dir=str(tmp_path), feature_dim=32, n_classes=5)
        with pytest.raises(ValueError):
            src.split
