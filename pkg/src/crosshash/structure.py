"""Similarity-structure mining from energy distances between view sets.

Each sample carries M feature vectors (augmented views) treated as draws
from its latent semantic distribution. The divergence between two samples
is the two-sample energy statistic ``2A - B - C`` over pairwise cosine
distances of their view sets. Pairs whose divergence falls below a
threshold ``tau`` are declared positive (structure entry 1); the remaining
entries blend image and text cosine similarities with coefficient
``alpha``.

Cosine conventions: the pointwise metric is split into a similarity form
``cos_sim`` (a dot product of exactly re-normalized vectors, in [-1, 1])
and a distance form ``cos_dist = 1 - cos_sim``. The energy statistic uses
the distance form; everything that is compared against a similarity target
uses the similarity form.

For unit vectors the energy statistic collapses to the squared distance of
the view means: expanding the three double sums with ``rho = 1 - <u, v>``
cancels the constants, leaving ``<u_bar,u_bar> + <v_bar,v_bar> -
2<u_bar,v_bar>``. The matrix path below computes exactly that expansion;
its agreement with the naive double-sum is enforced by the test suite.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    ContractViolationError,
    DegenerateInputError,
    StoreFormatError,
)
from .fileio import F64, U32, U64, check_crc, check_magic, crc_of, read_exact, write_atomic
from .store import FeatureStore

MAGIC = b"DEMOSM1\x00"

# cos_sim rejects inputs whose norm strays further than this from 1.
UNIT_TOL = 1e-4

_DEFAULT_BLOCK = 1024


@dataclass
class DivergenceMatrix:
    """Pairwise energy statistics; symmetric, zero diagonal, >= -1e-9."""

    values: np.ndarray


@dataclass
class SimilarityStructure:
    """Instance similarity matrix S with its construction parameters."""

    s: np.ndarray
    tau: float
    alpha: float


def _unit_rows(mat: np.ndarray, kind: str) -> np.ndarray:
    """Exactly re-normalize rows in double precision; zero rows are errors."""
    mat = np.asarray(mat, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateInputError(
            f"zero-norm {kind} at index {int(zero[0])}", module="structure-mining"
        )
    return mat / norms[:, None]


def cos_sim(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two unit vectors (their dot product).

    Inputs must be unit-norm within 1e-4; both are re-normalized exactly
    before the dot product so the result always lies in [-1, 1].
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    for name, vec in (("u", u), ("v", v)):
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > UNIT_TOL:
            raise ContractViolationError(
                f"cos_sim argument {name} has norm {norm:.6f}, expected 1 within {UNIT_TOL}"
            )
    value = float(np.dot(u / np.linalg.norm(u), v / np.linalg.norm(v)))
    return min(1.0, max(-1.0, value))


def cos_dist(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine distance, ``1 - cos_sim``; the pointwise metric of the energy statistic."""
    return 1.0 - cos_sim(u, v)


def energy_statistic(u_set: np.ndarray, v_set: np.ndarray) -> float:
    """Two-sample energy statistic ``2A - B - C`` over cosine distances.

    ``A`` averages the cross distances, ``B`` and ``C`` the within-set
    distances (including self-pairs), each over all ordered pairs. The
    sets may have different cardinalities. Identical sets give exactly 0.
    """
    u_set = np.atleast_2d(np.asarray(u_set, dtype=np.float64))
    v_set = np.atleast_2d(np.asarray(v_set, dtype=np.float64))
    if u_set.shape[0] == 0 or v_set.shape[0] == 0:
        raise ContractViolationError("energy_statistic requires nonempty view sets")
    u_hat = _unit_rows(u_set, "view vector")
    v_hat = _unit_rows(v_set, "view vector")
    if np.array_equal(u_hat, v_hat):
        return 0.0
    # Means of the full Gram matrices; the constants of rho = 1 - <.,.>
    # cancel in 2A - B - C, so only the dot-product means remain.
    cross = float(np.mean(u_hat @ v_hat.T))
    within_u = float(np.mean(u_hat @ u_hat.T))
    within_v = float(np.mean(v_hat @ v_hat.T))
    return within_u + within_v - 2.0 * cross


def _gram_block(mat: np.ndarray, start: int, stop: int) -> np.ndarray:
    """Rows [start, stop) of ``mat @ mat.T``.

    Each row is produced by a fixed-shape (1, d) @ (d, N) product, so the
    values are independent of how callers block the rows.
    """
    out = np.empty((stop - start, mat.shape[0]), dtype=np.float64)
    for i in range(start, stop):
        out[i - start] = mat[i : i + 1] @ mat.T
    return out


def divergence_matrix(store: FeatureStore, row_block: int = _DEFAULT_BLOCK) -> DivergenceMatrix:
    """Energy statistic between the view sets of every sample pair.

    Uses the view-mean expansion of the statistic; ``row_block`` bounds
    the working-set size (streaming over row blocks yields bitwise the
    same values as one shot).
    """
    n, m, d = store.image_views.shape
    views = _unit_rows(store.image_views.reshape(n * m, d), "image view")
    means = views.reshape(n, m, d).mean(axis=1)
    sq = np.einsum("nd,nd->n", means, means)

    values = np.empty((n, n), dtype=np.float64)
    for start in range(0, n, row_block):
        stop = min(start + row_block, n)
        gram = _gram_block(means, start, stop)
        values[start:stop] = sq[start:stop, None] + sq[None, :] - 2.0 * gram
    values = (values + values.T) / 2.0
    np.fill_diagonal(values, 0.0)
    return DivergenceMatrix(values)


def modality_similarities(
    store: FeatureStore, row_block: int = _DEFAULT_BLOCK
) -> tuple[np.ndarray, np.ndarray]:
    """Image and text cosine similarity matrices (S_v, S_t).

    The image similarity compares the re-normalized sums of each sample's
    stored view vectors; the text similarity compares text embeddings.
    Both are symmetric with exact unit diagonals.
    """
    sums = store.image_views.astype(np.float64).sum(axis=1)
    norms = np.linalg.norm(sums, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateInputError(
            f"view sum of sample {int(zero[0])} has zero norm",
            module="structure-mining",
        )
    s_v = _gram_similarity(sums / norms[:, None], row_block)
    s_t = _gram_similarity(_unit_rows(store.text_embeddings, "text"), row_block)
    return s_v, s_t


def _gram_similarity(unit: np.ndarray, row_block: int) -> np.ndarray:
    n = unit.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for start in range(0, n, row_block):
        stop = min(start + row_block, n)
        out[start:stop] = _gram_block(unit, start, stop)
    out = (out + out.T) / 2.0
    np.clip(out, -1.0, 1.0, out=out)
    np.fill_diagonal(out, 1.0)
    return out


def build_structure(
    div: DivergenceMatrix,
    s_v: np.ndarray,
    s_t: np.ndarray,
    tau: float = 1.25,
    alpha: float = 0.5,
) -> SimilarityStructure:
    """Assemble the instance similarity structure.

    Pairs with divergence below ``tau`` get similarity 1 (the identical-
    distribution hypothesis is accepted); all other pairs blend the
    modality similarities: ``alpha * S_v + (1 - alpha) * S_t``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}", module="structure-mining")
    if not tau > 0:
        raise ConfigError(f"tau must be positive, got {tau}", module="structure-mining")
    values = div.values
    if values.shape != s_v.shape or values.shape != s_t.shape:
        raise ConfigError(
            f"matrix shapes differ: {values.shape}, {s_v.shape}, {s_t.shape}",
            module="structure-mining",
        )
    blended = alpha * s_v + (1.0 - alpha) * s_t
    s = np.where(values < tau, 1.0, blended)
    return SimilarityStructure(s, float(tau), float(alpha))


def mine_structure(
    store: FeatureStore,
    tau: float = 1.25,
    alpha: float = 0.5,
    views_used: int | None = None,
    row_block: int = _DEFAULT_BLOCK,
) -> tuple[DivergenceMatrix, SimilarityStructure]:
    """Run the full mining pipeline on a store.

    ``views_used`` restricts every sample to its first k views (the
    single-view ablation passes 1); None uses all views.
    """
    if views_used is not None:
        if not 1 <= views_used <= store.num_views:
            raise ConfigError(
                f"views_used must be in [1, {store.num_views}], got {views_used}",
                module="structure-mining",
            )
        store = FeatureStore(
            store.image_views[:, :views_used],
            store.text_embeddings,
            store.labels,
            store.ids,
        )
    div = divergence_matrix(store, row_block)
    s_v, s_t = modality_similarities(store, row_block)
    return div, build_structure(div, s_v, s_t, tau, alpha)


def save_structure(path, div: DivergenceMatrix | None, structure: SimilarityStructure | None) -> None:
    """Dump divergence and/or structure matrices (float64 payload + CRC32)."""
    if div is None and structure is None:
        raise ConfigError("nothing to save", module="structure-mining")
    n = div.values.shape[0] if div is not None else structure.s.shape[0]
    tau = structure.tau if structure is not None else 0.0
    alpha = structure.alpha if structure is not None else 0.0

    chunks = []
    if div is not None:
        chunks.append(np.ascontiguousarray(div.values, dtype="<f8").tobytes())
    if structure is not None:
        chunks.append(np.ascontiguousarray(structure.s, dtype="<f8").tobytes())
    body = b"".join(chunks)

    header = b"".join(
        (
            U64.pack(n),
            U64.pack(1 if div is not None else 0),
            U64.pack(1 if structure is not None else 0),
            F64.pack(tau),
            F64.pack(alpha),
        )
    )
    write_atomic(path, MAGIC + header + body + U32.pack(crc_of(body)))


def load_structure(path) -> tuple[DivergenceMatrix | None, SimilarityStructure | None]:
    with open(path, "rb") as fh:
        check_magic(fh, MAGIC, path)
        header = read_exact(fh, 3 * 8 + 2 * 8, "header")
        n = U64.unpack_from(header, 0)[0]
        has_div = U64.unpack_from(header, 8)[0]
        has_s = U64.unpack_from(header, 16)[0]
        tau = F64.unpack_from(header, 24)[0]
        alpha = F64.unpack_from(header, 32)[0]
        count = (int(has_div) + int(has_s)) * n * n * 8
        body = read_exact(fh, count, "payload")
        stored = U32.unpack(read_exact(fh, 4, "checksum"))[0]
        check_crc(body, stored, path)
    offset = 0
    div = None
    if has_div:
        div = DivergenceMatrix(
            np.frombuffer(body, dtype="<f8", count=n * n).reshape(n, n).copy()
        )
        offset = n * n * 8
    structure = None
    if has_s:
        s = np.frombuffer(body, dtype="<f8", count=n * n, offset=offset).reshape(n, n)
        structure = SimilarityStructure(s.copy(), tau, alpha)
    if not has_div and not has_s:
        raise StoreFormatError(f"structure file {path!r} holds no matrices")
    return div, structure
