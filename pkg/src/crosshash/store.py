"""Feature dataset ingestion: loading, validation, serialization, synthesis.

A :class:`FeatureStore` holds per-sample multi-view image feature vectors,
text embeddings, and optional multi-hot labels. Every stored vector is
L2-normalized to unit norm, so downstream cosine operations reduce to dot
products. Labels are consumed only by evaluation and the synthetic
generator, never by training.

On-disk format ``DEMOFS1`` (all little-endian):

===========  ========================================================
magic        8 bytes ``DEMOFS1\\0``
header       5 x u64: N, M, d_v, d_t, L  (L = 0 means no labels)
payload      image views  as float32, shape (N, M, d_v), row-major;
             text embeddings as float32, shape (N, d_t);
             labels as bytes 0/1, shape (N, L), only when L > 0
trailer      u32 CRC32 of the payload
===========  ========================================================

A plain CSV form is accepted for tiny hand-written inputs; see
:func:`load_feature_store`.
"""

import io
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractViolationError, LabelError, StoreFormatError, ZeroNormError
from .fileio import U32, U64, check_crc, check_magic, crc_of, read_exact, write_atomic

MAGIC = b"DEMOFS1\x00"

# |  ||v|| - 1  | must stay below this for a stored vector.
NORM_TOL = 1e-6


@dataclass
class FeatureStore:
    """Immutable container of per-sample features.

    Attributes:
        image_views: float32 array of shape (N, M, d_v), unit rows.
        text_embeddings: float32 array of shape (N, d_t), unit rows.
        labels: optional uint8 array of shape (N, L) with 0/1 entries.
        ids: int64 array of N sample identifiers.
    """

    image_views: np.ndarray
    text_embeddings: np.ndarray
    labels: np.ndarray | None
    ids: np.ndarray

    @property
    def num_samples(self) -> int:
        return self.image_views.shape[0]

    @property
    def num_views(self) -> int:
        return self.image_views.shape[1]

    @property
    def image_dim(self) -> int:
        return self.image_views.shape[2]

    @property
    def text_dim(self) -> int:
        return self.text_embeddings.shape[1]

    @property
    def label_dim(self) -> int:
        return 0 if self.labels is None else self.labels.shape[1]


@dataclass
class SynthConfig:
    """Configuration of the synthetic clustered dataset generator."""

    clusters: int = 8
    samples: int = 1800
    views: int = 5
    image_dim: int = 64
    text_dim: int = 64
    center_spread: float = 1.0
    view_noise: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        if self.clusters < 2:
            raise ConfigError("SynthConfig.clusters must be >= 2", module="ingestion")
        if self.samples < 2:
            raise ConfigError("SynthConfig.samples must be >= 2", module="ingestion")
        if self.views < 1:
            raise ConfigError("SynthConfig.views must be >= 1", module="ingestion")
        if self.image_dim < 1 or self.text_dim < 1:
            raise ConfigError("SynthConfig dims must be >= 1", module="ingestion")
        if not self.view_noise > 0:
            raise ConfigError("SynthConfig.view_noise must be > 0", module="ingestion")
        if self.center_spread <= 0:
            raise ConfigError("SynthConfig.center_spread must be > 0", module="ingestion")


def _normalize_rows(flat: np.ndarray, kind: str) -> np.ndarray:
    """Unit-normalize rows of a float32 matrix.

    Rows already within NORM_TOL of unit norm pass through bit-exactly;
    zero-norm rows raise with the offending index.
    """
    work = flat.astype(np.float64)
    norms = np.linalg.norm(work, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormError(f"zero-norm {kind} vector at flat index {int(zero[0])}")
    scale = np.where(np.abs(norms - 1.0) > NORM_TOL, norms, 1.0)
    return (work / scale[:, None]).astype(np.float32)


def _validate_labels(labels: np.ndarray) -> None:
    if labels.ndim != 2:
        raise LabelError("labels must be a 2-d multi-hot matrix")
    bad = ~np.isin(labels, (0, 1))
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise LabelError(f"label entry at {tuple(int(v) for v in idx)} is not 0/1")
    empty = np.flatnonzero(labels.sum(axis=1) == 0)
    if empty.size:
        raise LabelError(f"label row {int(empty[0])} is all zeros")


def _freeze(store: FeatureStore) -> FeatureStore:
    store.image_views.flags.writeable = False
    store.text_embeddings.flags.writeable = False
    if store.labels is not None:
        store.labels.flags.writeable = False
    store.ids.flags.writeable = False
    return store


def make_store(image_views, text_embeddings, labels=None, ids=None) -> FeatureStore:
    """Validate and normalize raw arrays into a FeatureStore.

    Raises the ingestion error family on contract violations.
    """
    image_views = np.ascontiguousarray(image_views, dtype=np.float32)
    text_embeddings = np.ascontiguousarray(text_embeddings, dtype=np.float32)
    if image_views.ndim != 3:
        raise ConfigError("image_views must have shape (N, M, d_v)", module="ingestion")
    if text_embeddings.ndim != 2:
        raise ConfigError("text_embeddings must have shape (N, d_t)", module="ingestion")
    n, m, d_v = image_views.shape
    if text_embeddings.shape[0] != n:
        raise ConfigError(
            f"text rows ({text_embeddings.shape[0]}) != image samples ({n})",
            module="ingestion",
        )
    if n < 2 or m < 1 or d_v < 1 or text_embeddings.shape[1] < 1:
        raise ConfigError(
            "store requires N >= 2, M >= 1, d_v >= 1, d_t >= 1", module="ingestion"
        )

    views = _normalize_rows(image_views.reshape(n * m, d_v), "image view")
    views = views.reshape(n, m, d_v)
    text = _normalize_rows(text_embeddings, "text")

    if labels is not None:
        labels = np.ascontiguousarray(labels, dtype=np.uint8)
        if labels.shape[0] != n:
            raise LabelError(f"label rows ({labels.shape[0]}) != samples ({n})")
        _validate_labels(labels)

    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    else:
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        if ids.shape != (n,):
            raise ConfigError("ids must have shape (N,)", module="ingestion")

    return _freeze(FeatureStore(views, text, labels, ids))


def write_feature_store(store: FeatureStore, path) -> None:
    """Serialize *store* to the DEMOFS1 binary format (atomically)."""
    _check_normalized(store)
    n, m, d_v = store.image_views.shape
    d_t = store.text_dim
    l_dim = store.label_dim

    payload = io.BytesIO()
    payload.write(np.ascontiguousarray(store.image_views, dtype="<f4").tobytes())
    payload.write(np.ascontiguousarray(store.text_embeddings, dtype="<f4").tobytes())
    if l_dim:
        payload.write(np.ascontiguousarray(store.labels, dtype=np.uint8).tobytes())
    body = payload.getvalue()

    out = io.BytesIO()
    out.write(MAGIC)
    for field in (n, m, d_v, d_t, l_dim):
        out.write(U64.pack(field))
    out.write(body)
    out.write(U32.pack(crc_of(body)))
    write_atomic(path, out.getvalue())


def _check_normalized(store: FeatureStore) -> None:
    views = store.image_views.reshape(-1, store.image_dim).astype(np.float64)
    for name, mat in (("image view", views), ("text", store.text_embeddings.astype(np.float64))):
        norms = np.linalg.norm(mat, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
        if bad.size:
            raise ContractViolationError(
                f"{name} vector {int(bad[0])} is not unit-normalized "
                f"(norm {norms[bad[0]]:.8f})",
                module="ingestion",
                hint="build stores through make_store/load_feature_store",
            )
    if store.labels is not None:
        _validate_labels(store.labels)


def load_feature_store(path) -> FeatureStore:
    """Load a DEMOFS1 file (or the CSV form when *path* ends in .csv)."""
    if os.fspath(path).endswith(".csv"):
        return _load_csv(path)
    with open(path, "rb") as fh:
        check_magic(fh, MAGIC, path)
        header = read_exact(fh, 5 * 8, "header")
        n, m, d_v, d_t, l_dim = (U64.unpack_from(header, i * 8)[0] for i in range(5))
        if n < 2 or m < 1 or d_v < 1 or d_t < 1:
            raise StoreFormatError(
                f"invalid header dimensions N={n} M={m} d_v={d_v} d_t={d_t}"
            )
        expect = (n * m * d_v + n * d_t) * 4 + n * l_dim
        body = read_exact(fh, expect, "payload")
        stored_crc = U32.unpack(read_exact(fh, 4, "checksum"))[0]
        check_crc(body, stored_crc, path)

    offset = n * m * d_v * 4
    views = np.frombuffer(body, dtype="<f4", count=n * m * d_v).reshape(n, m, d_v)
    text = np.frombuffer(body, dtype="<f4", count=n * d_t, offset=offset).reshape(n, d_t)
    labels = None
    if l_dim:
        labels = np.frombuffer(
            body, dtype=np.uint8, count=n * l_dim, offset=offset + n * d_t * 4
        ).reshape(n, l_dim)
    return make_store(views.copy(), text.copy(), None if labels is None else labels.copy())


def _load_csv(path) -> FeatureStore:
    """Parse the hand-writable CSV form.

    First line: ``demofs_csv,N,M,d_v,d_t,L``. Then one line per record:
    ``image,<sample>,<view>,v1,...`` / ``text,<sample>,t1,...`` /
    ``label,<sample>,l1,...``. Vectors are unit-normalized on load.
    """
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        parts = first.split(",")
        if parts[0] != "demofs_csv" or len(parts) != 6:
            raise StoreFormatError(f"bad CSV header line in {path!r}: {first!r}")
        try:
            n, m, d_v, d_t, l_dim = (int(p) for p in parts[1:])
        except ValueError as exc:
            raise StoreFormatError(f"non-integer CSV header field in {path!r}") from exc

        views = np.full((n, m, d_v), np.nan, dtype=np.float64)
        text = np.full((n, d_t), np.nan, dtype=np.float64)
        labels = np.zeros((n, l_dim), dtype=np.uint8) if l_dim else None
        seen_label = np.zeros(n, dtype=bool)

        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            kind = fields[0]
            try:
                if kind == "image":
                    i, v = int(fields[1]), int(fields[2])
                    views[i, v] = [float(x) for x in fields[3:]]
                elif kind == "text":
                    i = int(fields[1])
                    text[i] = [float(x) for x in fields[2:]]
                elif kind == "label":
                    if labels is None:
                        raise StoreFormatError(
                            f"label row on line {line_no} but header says L=0"
                        )
                    i = int(fields[1])
                    labels[i] = [int(x) for x in fields[2:]]
                    seen_label[i] = True
                else:
                    raise StoreFormatError(f"unknown CSV record {kind!r} on line {line_no}")
            except (ValueError, IndexError) as exc:
                raise StoreFormatError(
                    f"malformed CSV record on line {line_no} of {path!r}"
                ) from exc

    if np.isnan(views).any():
        raise StoreFormatError("CSV is missing image view rows")
    if np.isnan(text).any():
        raise StoreFormatError("CSV is missing text rows")
    if labels is not None and not seen_label.all():
        raise StoreFormatError("CSV is missing label rows")
    return make_store(views, text, labels)


def generate_synthetic(cfg: SynthConfig) -> FeatureStore:
    """Sample a clustered multi-modal dataset.

    Each sample i is assigned cluster ``i % clusters``. Its image views are
    the cluster's image-space center plus per-view Gaussian noise, then
    normalized; its text embedding is drawn the same way around an
    independent center for the same cluster in text space, so the two
    modalities share semantics without sharing geometry. Labels are the
    one-hot cluster assignment. Output is a deterministic function of the
    config, including its seed.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    centers_v = rng.normal(0.0, cfg.center_spread, size=(cfg.clusters, cfg.image_dim))
    centers_t = rng.normal(0.0, cfg.center_spread, size=(cfg.clusters, cfg.text_dim))
    assign = np.arange(cfg.samples, dtype=np.int64) % cfg.clusters

    views = centers_v[assign][:, None, :] + rng.normal(
        0.0, cfg.view_noise, size=(cfg.samples, cfg.views, cfg.image_dim)
    )
    text = centers_t[assign] + rng.normal(
        0.0, cfg.view_noise, size=(cfg.samples, cfg.text_dim)
    )
    labels = np.zeros((cfg.samples, cfg.clusters), dtype=np.uint8)
    labels[np.arange(cfg.samples), assign] = 1
    return make_store(views, text, labels)


def split_store(store: FeatureStore, num_query: int) -> tuple[FeatureStore, FeatureStore]:
    """Split off the last *num_query* samples as a query set.

    Returns (database_store, query_store); ids are preserved.
    """
    n = store.num_samples
    if not 2 <= num_query <= n - 2:
        raise ConfigError(
            f"num_query must be in [2, {n - 2}], got {num_query}", module="ingestion"
        )
    cut = n - num_query
    def piece(lo, hi):
        return make_store(
            store.image_views[lo:hi].copy(),
            store.text_embeddings[lo:hi].copy(),
            None if store.labels is None else store.labels[lo:hi].copy(),
            store.ids[lo:hi].copy(),
        )
    return piece(0, cut), piece(cut, n)
