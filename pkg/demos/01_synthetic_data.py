"""Generating and serializing multi-view feature datasets.

A feature store holds, per sample: M image view vectors, one text
embedding, and an optional multi-hot label row. The synthetic generator
plants C clusters with independent centers in the image and text spaces,
so the two modalities agree on semantics while disagreeing on geometry.
"""

import os
import tempfile

import numpy as np

from crosshash import SynthConfig, generate_synthetic, load_feature_store, write_feature_store

# --- generate a small clustered dataset ---------------------------------
cfg = SynthConfig(
    clusters=4, samples=200, views=3, image_dim=32, text_dim=24,
    center_spread=1.0, view_noise=0.1, seed=42,
)
store = generate_synthetic(cfg)
print(f"image views: {store.image_views.shape} ({store.image_views.dtype})")
print(f"text embeddings: {store.text_embeddings.shape}")
print(f"labels: {store.labels.shape} (one-hot cluster assignments)")

# every stored vector is unit-normalized
norms = np.linalg.norm(store.image_views.reshape(-1, 32).astype(np.float64), axis=1)
print(f"view norm range: [{norms.min():.9f}, {norms.max():.9f}]")

# same-cluster samples look alike, cross-cluster samples do not
flat = store.image_views.mean(axis=1)
flat = flat / np.linalg.norm(flat, axis=1, keepdims=True)
sims = flat @ flat.T
cluster = np.arange(200) % 4
same = cluster[:, None] == cluster[None, :]
off_diag = ~np.eye(200, dtype=bool)
print(f"mean cosine within clusters:  {sims[same & off_diag].mean():.4f}")
print(f"mean cosine across clusters: {sims[~same & off_diag].mean():.4f}")

# --- round-trip through the binary format --------------------------------
with tempfile.TemporaryDirectory() as tmp:
    path = os.path.join(tmp, "demo_store.bin")
    write_feature_store(store, path)
    loaded = load_feature_store(path)
    print(f"\nwrote {os.path.getsize(path)} bytes; "
          f"round-trip bit-exact: {np.array_equal(loaded.image_views, store.image_views)}")
