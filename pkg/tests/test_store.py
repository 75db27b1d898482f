"""Ingestion: validation, the binary format, and the synthetic generator."""

import struct
import zlib

import numpy as np
import pytest

from crosshash import (
    ConfigError,
    LabelError,
    StoreFormatError,
    SynthConfig,
    ZeroNormError,
    generate_synthetic,
    load_feature_store,
    make_store,
    split_store,
    write_feature_store,
)
from crosshash.store import MAGIC, NORM_TOL


def build_raw_file(path, views, text, labels=None):
    """Independent writer: assembles DEMOFS1 bytes without the package's
    serializer, so loader checks are exercised against a second route."""
    views = np.asarray(views, dtype="<f4")
    text = np.asarray(text, dtype="<f4")
    n, m, d_v = views.shape
    d_t = text.shape[1]
    l_dim = 0 if labels is None else labels.shape[1]
    payload = views.tobytes() + text.tobytes()
    if labels is not None:
        payload += np.asarray(labels, dtype=np.uint8).tobytes()
    blob = MAGIC + struct.pack("<5Q", n, m, d_v, d_t, l_dim) + payload
    blob += struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    path.write_bytes(blob)


def normalized(rng, shape):
    x = rng.normal(size=shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


class TestRoundTrip:
    def test_bit_exact(self, tiny_store, tmp_path):
        path = tmp_path / "store.bin"
        write_feature_store(tiny_store, path)
        loaded = load_feature_store(path)
        assert np.array_equal(loaded.image_views, tiny_store.image_views)
        assert loaded.image_views.dtype == np.float32
        assert np.array_equal(loaded.text_embeddings, tiny_store.text_embeddings)
        assert np.array_equal(loaded.labels, tiny_store.labels)
        assert np.array_equal(loaded.ids, tiny_store.ids)

    def test_flipped_payload_byte_fails_checksum(self, tiny_store, tmp_path):
        path = tmp_path / "store.bin"
        write_feature_store(tiny_store, path)
        blob = bytearray(path.read_bytes())
        blob[8 + 40 + 3] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(StoreFormatError, match="checksum"):
            load_feature_store(path)

    def test_unlabeled_store_round_trips_with_flag_unset(self, rng, tmp_path):
        store = make_store(rng.normal(size=(4, 2, 8)), rng.normal(size=(4, 5)))
        path = tmp_path / "plain.bin"
        write_feature_store(store, path)
        loaded = load_feature_store(path)
        assert loaded.labels is None
        assert np.array_equal(loaded.image_views, store.image_views)

    def test_written_store_immutable(self, tiny_store):
        with pytest.raises(ValueError):
            tiny_store.image_views[0, 0, 0] = 9.0


class TestLoaderDiagnostics:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTDEMO1" + b"\x00" * 64)
        with pytest.raises(StoreFormatError, match="magic"):
            load_feature_store(path)

    def test_truncated_payload(self, tiny_store, tmp_path):
        path = tmp_path / "store.bin"
        write_feature_store(tiny_store, path)
        blob = bytearray(path.read_bytes())
        # Claim one extra sample in the header; the payload is now short.
        n = struct.unpack_from("<Q", blob, 8)[0]
        struct.pack_into("<Q", blob, 8, n + 1)
        path.write_bytes(bytes(blob))
        with pytest.raises(StoreFormatError, match="truncated"):
            load_feature_store(path)

    def test_zero_vector_named(self, rng, tmp_path):
        views = normalized(rng, (4, 2, 8)).astype(np.float32)
        views[2, 1] = 0.0
        path = tmp_path / "zero.bin"
        build_raw_file(path, views, normalized(rng, (4, 5)).astype(np.float32))
        with pytest.raises(ZeroNormError, match="5"):
            load_feature_store(path)

    def test_all_zero_label_row(self, rng, tmp_path):
        labels = np.eye(4, dtype=np.uint8)
        labels[1] = 0
        path = tmp_path / "labels.bin"
        build_raw_file(
            path,
            normalized(rng, (4, 2, 8)).astype(np.float32),
            normalized(rng, (4, 5)).astype(np.float32),
            labels,
        )
        with pytest.raises(LabelError, match="row 1"):
            load_feature_store(path)

    def test_loader_accepts_independent_writer(self, rng, tmp_path):
        views = normalized(rng, (4, 2, 8)).astype(np.float32)
        text = normalized(rng, (4, 5)).astype(np.float32)
        path = tmp_path / "raw.bin"
        build_raw_file(path, views, text, np.eye(4, dtype=np.uint8))
        loaded = load_feature_store(path)
        assert loaded.image_views.shape == (4, 2, 8)
        assert np.array_equal(loaded.image_views, views)


class TestNormalization:
    def test_unnormalized_input_is_normalized(self, rng):
        store = make_store(rng.normal(size=(3, 2, 6)) * 7.0, rng.normal(size=(3, 4)) * 3.0)
        norms = np.linalg.norm(store.image_views.astype(np.float64), axis=2)
        assert np.all(np.abs(norms - 1.0) < NORM_TOL)
        norms_t = np.linalg.norm(store.text_embeddings.astype(np.float64), axis=1)
        assert np.all(np.abs(norms_t - 1.0) < NORM_TOL)

    def test_already_normalized_rows_pass_through_bit_exact(self, rng):
        views = normalized(rng, (3, 2, 6)).astype(np.float32)
        text = normalized(rng, (3, 4)).astype(np.float32)
        store = make_store(views.copy(), text.copy())
        assert np.array_equal(store.image_views, views)
        assert np.array_equal(store.text_embeddings, text)

    def test_zero_norm_rejected(self, rng):
        views = normalized(rng, (3, 1, 6))
        views[1, 0] = 0.0
        with pytest.raises(ZeroNormError):
            make_store(views, normalized(rng, (3, 4)))

    def test_shape_contracts(self, rng):
        with pytest.raises(ConfigError):
            make_store(normalized(rng, (1, 2, 6)), normalized(rng, (1, 4)))
        with pytest.raises(ConfigError):
            make_store(normalized(rng, (3, 2, 6)), normalized(rng, (4, 4)))


class TestSynthetic:
    def test_deterministic_bytes(self, tmp_path):
        cfg = SynthConfig(clusters=4, samples=40, views=3, image_dim=8, text_dim=6, seed=9)
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        write_feature_store(generate_synthetic(cfg), a)
        write_feature_store(generate_synthetic(cfg), b)
        assert a.read_bytes() == b.read_bytes()

    def test_noise_free_limit_collapses_same_cluster_views(self):
        cfg = SynthConfig(
            clusters=2, samples=4, views=1, image_dim=8, text_dim=4,
            view_noise=1e-12, seed=3,
        )
        store = generate_synthetic(cfg)
        # samples 0 and 2 share cluster 0; their normalized views coincide
        np.testing.assert_allclose(
            store.image_views[0, 0], store.image_views[2, 0], atol=1e-6
        )

    def test_cluster_geometry(self):
        # within-cluster mean cosine exceeds between-cluster mean cosine,
        # measured directly on the generated store
        cfg = SynthConfig(clusters=8, samples=2000, views=5, image_dim=64, seed=2)
        store = generate_synthetic(cfg)
        flat = store.image_views.astype(np.float64).reshape(2000 * 5, 64)
        sims = flat @ flat.T
        cluster = np.repeat(np.arange(2000) % 8, 5)
        same = cluster[:, None] == cluster[None, :]
        np.fill_diagonal(same, False)
        off_diag = ~np.eye(len(flat), dtype=bool)
        within = sims[same & off_diag].mean()
        between = sims[~same & off_diag].mean()
        assert within > between

    def test_labels_one_hot(self, tiny_store):
        assert tiny_store.labels.shape == (24, 3)
        assert np.all(tiny_store.labels.sum(axis=1) == 1)
        assert np.array_equal(tiny_store.labels.argmax(axis=1), np.arange(24) % 3)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            generate_synthetic(SynthConfig(clusters=1))
        with pytest.raises(ConfigError):
            generate_synthetic(SynthConfig(view_noise=0.0))


class TestSplit:
    def test_split_preserves_content(self, tiny_store):
        db, query = split_store(tiny_store, 6)
        assert db.num_samples == 18 and query.num_samples == 6
        assert np.array_equal(query.image_views, tiny_store.image_views[18:])
        assert np.array_equal(db.ids, np.arange(18))
        assert np.array_equal(query.ids, np.arange(18, 24))

    def test_split_bounds(self, tiny_store):
        with pytest.raises(ConfigError):
            split_store(tiny_store, 1)
        with pytest.raises(ConfigError):
            split_store(tiny_store, 23)


class TestCsvForm:
    def test_tiny_handwritten_csv(self, tmp_path):
        path = tmp_path / "tiny.csv"
        path.write_text(
            "demofs_csv,2,1,2,2,2\n"
            "image,0,0,1,0\n"
            "image,1,0,0,3\n"
            "text,0,2,0\n"
            "text,1,0,5\n"
            "label,0,1,0\n"
            "label,1,0,1\n"
        )
        store = load_feature_store(path)
        np.testing.assert_allclose(store.image_views[0, 0], [1.0, 0.0], atol=1e-7)
        np.testing.assert_allclose(store.image_views[1, 0], [0.0, 1.0], atol=1e-7)
        np.testing.assert_allclose(store.text_embeddings[0], [1.0, 0.0], atol=1e-7)
        assert np.array_equal(store.labels, np.eye(2, dtype=np.uint8))

    def test_csv_missing_rows(self, tmp_path):
        path = tmp_path / "broken.csv"
        path.write_text("demofs_csv,2,1,2,2,0\nimage,0,0,1,0\ntext,0,2,0\ntext,1,0,5\n")
        with pytest.raises(StoreFormatError, match="missing image"):
            load_feature_store(path)

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("not_a_store,1,2\n")
        with pytest.raises(StoreFormatError, match="header"):
            load_feature_store(path)
