"""Binary codes, bit packing, and Hamming-distance ranking.

Relaxed codes are sign-thresholded (strictly positive -> bit 1, zero and
negative -> bit 0) and packed little-endian into 64-bit words, so the
distance between two codes is the popcount of the XOR of their words.
Ranking a query against a database is a linear scan over the packed words;
ties in distance are broken by ascending sample id, which makes every
ranking total and deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StoreFormatError
from .fileio import U32, U64, check_crc, check_magic, crc_of, read_exact, write_atomic

MAGIC = b"DEMOBC1\x00"

_MODALITY_BYTES = {"image": b"v", "text": b"t"}
_MODALITY_NAMES = {b"v": "image", b"t": "text"}


@dataclass
class BinaryCodebook:
    """N packed binary codes of a single modality.

    ``codes`` has shape (N, ceil(bits/64)) with dtype uint64; unused high
    bits of the last word are zero.
    """

    codes: np.ndarray
    bits: int
    modality: str
    ids: np.ndarray

    @property
    def num_samples(self) -> int:
        return self.codes.shape[0]

    @property
    def words(self) -> int:
        return self.codes.shape[1]


@dataclass
class RankedList:
    """Database ids ordered by ascending Hamming distance (ties: ascending id)."""

    ids: np.ndarray
    distances: np.ndarray


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (N, K) 0/1 matrix into (N, ceil(K/64)) uint64 words.

    Bit k of a code lives at bit ``k % 64`` of word ``k // 64``.
    """
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    n, k = bits.shape
    words = (k + 63) // 64
    packed8 = np.packbits(bits, axis=1, bitorder="little")
    padded = np.zeros((n, words * 8), dtype=np.uint8)
    padded[:, : packed8.shape[1]] = packed8
    return padded.view("<u8")


def unpack_bits(codes: np.ndarray, bits: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns a (N, bits) uint8 matrix."""
    raw = np.ascontiguousarray(codes, dtype="<u8").view(np.uint8)
    return np.unpackbits(raw, axis=1, bitorder="little")[:, :bits]


def binarize(relaxed: np.ndarray, modality: str = "image", ids=None) -> BinaryCodebook:
    """Sign-threshold relaxed codes: value > 0 -> bit 1, else bit 0."""
    relaxed = np.atleast_2d(np.asarray(relaxed))
    n, k = relaxed.shape
    if modality not in _MODALITY_BYTES:
        raise ConfigError(f"unknown modality {modality!r}", module="retrieval-engine")
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    else:
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        if ids.shape != (n,):
            raise ConfigError("ids must have one entry per code", module="retrieval-engine")
    return BinaryCodebook(pack_bits(relaxed > 0), k, modality, ids)


def hamming(a: np.ndarray, b: np.ndarray) -> int:
    """Number of differing bits between two packed codes (popcount of XOR)."""
    a = np.atleast_1d(np.asarray(a, dtype=np.uint64))
    b = np.atleast_1d(np.asarray(b, dtype=np.uint64))
    if a.shape != b.shape:
        raise ConfigError(
            f"packed codes have different word counts: {a.shape} vs {b.shape}",
            module="retrieval-engine",
        )
    return int(np.bitwise_count(a ^ b).sum())


def _distances_block(queries: np.ndarray, db_words: list, out: np.ndarray) -> None:
    """Hamming distances of a query block against the whole database.

    ``db_words`` is the per-word-column view of the database; ``out``
    receives (block, N) distances and must be able to hold the code
    length (uint8 suffices up to 255 bits).
    """
    xor_buf = np.empty(out.shape, dtype=np.uint64)
    if out.dtype == np.uint8:
        pc_buf = np.empty(out.shape, dtype=np.uint8)
        for w, column in enumerate(db_words):
            np.bitwise_xor(queries[:, w, None], column[None, :], out=xor_buf)
            if w == 0:
                np.bitwise_count(xor_buf, out=out)
            else:
                np.bitwise_count(xor_buf, out=pc_buf)
                out += pc_buf
    else:
        pc_buf = np.empty(out.shape, dtype=np.uint8)
        for w, column in enumerate(db_words):
            np.bitwise_xor(queries[:, w, None], column[None, :], out=xor_buf)
            np.bitwise_count(xor_buf, out=pc_buf)
            if w == 0:
                out[:] = pc_buf
            else:
                out += pc_buf


def rank_all(
    query_codes: np.ndarray, db: BinaryCodebook, block: int = 64
) -> tuple[np.ndarray, np.ndarray]:
    """Rank every query against the database.

    Returns (rows, distances): ``rows[q]`` holds database row indices
    ordered by ascending distance with ties broken by ascending sample id;
    ``distances[q]`` holds the distances aligned to database rows (not to
    the ranked order), so ``distances[q][rows[q]]`` is the ranked view.
    """
    if db.num_samples == 0:
        raise ConfigError("database codebook is empty", module="retrieval-engine")
    query_codes = np.atleast_2d(np.asarray(query_codes, dtype=np.uint64))
    if query_codes.shape[1] != db.words:
        raise ConfigError(
            f"query codes have {query_codes.shape[1]} words, database has {db.words}",
            module="retrieval-engine",
        )
    n_q = query_codes.shape[0]
    n_db = db.num_samples

    # Pre-sort rows by id so a stable sort on distance breaks ties by id;
    # the common identity-id layout needs no reshuffling at all.
    identity_ids = np.array_equal(db.ids, np.arange(n_db, dtype=np.int64))
    if identity_ids:
        sorted_codes = db.codes
        id_order32 = None
    else:
        id_order = np.argsort(db.ids, kind="stable")
        sorted_codes = np.ascontiguousarray(db.codes[id_order])
        id_order32 = id_order.astype(np.int32)
    db_words = [np.ascontiguousarray(sorted_codes[:, w]) for w in range(db.words)]

    dist_dtype = np.uint8 if db.bits <= 255 else np.uint16
    rows = np.empty((n_q, n_db), dtype=np.int32)
    dists = np.empty((n_q, n_db), dtype=dist_dtype)
    for start in range(0, n_q, block):
        stop = min(start + block, n_q)
        view = dists[start:stop]
        _distances_block(query_codes[start:stop], db_words, view)
        order = np.argsort(view, axis=1, kind="stable")
        if identity_ids:
            rows[start:stop] = order
        else:
            rows[start:stop] = id_order32[order]
    if not identity_ids:
        # report distances aligned to the caller's row layout
        inverse = np.empty(n_db, dtype=np.int64)
        inverse[id_order32] = np.arange(n_db)
        dists = dists[:, inverse]
    return rows, dists


def rank_database(query: np.ndarray, db: BinaryCodebook, top_k: int | None = None) -> RankedList:
    """Full Hamming ranking of one query code against a codebook."""
    rows, dists = rank_all(np.atleast_2d(np.asarray(query, dtype=np.uint64)), db)
    ids = db.ids[rows[0]]
    distances = dists[0][rows[0]].astype(np.int64)
    if top_k is not None:
        ids = ids[:top_k]
        distances = distances[:top_k]
    return RankedList(ids, distances)


def save_codebook(path, book: BinaryCodebook) -> None:
    """Serialize a codebook (DEMOBC1). Ids must be the identity 0..N-1."""
    if not np.array_equal(book.ids, np.arange(book.num_samples, dtype=np.int64)):
        raise ConfigError(
            "only codebooks with identity ids can be serialized",
            module="retrieval-engine",
        )
    body = np.ascontiguousarray(book.codes, dtype="<u8").tobytes()
    head = MAGIC + U64.pack(book.bits) + U64.pack(book.num_samples)
    head += _MODALITY_BYTES[book.modality]
    write_atomic(path, head + body + U32.pack(crc_of(body)))


def load_codebook(path) -> BinaryCodebook:
    with open(path, "rb") as fh:
        check_magic(fh, MAGIC, path)
        header = read_exact(fh, 17, "header")
        bits = U64.unpack_from(header, 0)[0]
        n = U64.unpack_from(header, 8)[0]
        modality_byte = header[16:17]
        if modality_byte not in _MODALITY_NAMES:
            raise StoreFormatError(f"unknown modality byte {modality_byte!r} in {path!r}")
        words = (bits + 63) // 64
        body = read_exact(fh, n * words * 8, "payload")
        stored = U32.unpack(read_exact(fh, 4, "checksum"))[0]
        check_crc(body, stored, path)
    codes = np.frombuffer(body, dtype="<u8").reshape(n, words).copy()
    return BinaryCodebook(
        codes, int(bits), _MODALITY_NAMES[modality_byte], np.arange(n, dtype=np.int64)
    )
