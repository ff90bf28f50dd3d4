"""Small two-class patch generator for exercising the training pipeline.

Class 1 patches carry brighter, more tightly packed nuclei than class 0, so
both the image branch (intensity) and the graph branch (texture + geometry)
see real signal.  Everything is driven by one seeded generator, making
datasets reproducible byte for byte.
"""

from __future__ import annotations

import numpy as np

from cellfuse.cellgraph import NucleusRecord, PatchBundle


def _make_nucleus(rng, hw: int, brightness: float, spread: float):
    size = int(rng.integers(2, 4))
    r0 = int(rng.integers(0, hw - size))
    c0 = int(rng.integers(0, hw - size))
    pixels = [(r0 + i, c0 + j) for i in range(size) for j in range(size)]
    cx = c0 + (size - 1) / 2.0 + float(rng.uniform(-spread, spread))
    cy = r0 + (size - 1) / 2.0 + float(rng.uniform(-spread, spread))
    return np.array(pixels, dtype=np.int64), (cx, cy), brightness


def make_bundle(rng, patch_id: str, patient_id: str, label: int, hw: int = 24) -> PatchBundle:
    image = rng.uniform(90.0, 110.0, (hw, hw))
    n_nuclei = int(rng.integers(5, 9))
    base = 185.0 if label == 1 else 140.0
    spread = 0.5 if label == 1 else 2.0
    nuclei = []
    for _ in range(n_nuclei):
        pixels, centroid, bright = _make_nucleus(
            rng, hw, base + float(rng.uniform(-8.0, 8.0)), spread
        )
        noise = rng.uniform(-6.0, 6.0, len(pixels))
        image[pixels[:, 0], pixels[:, 1]] = np.clip(bright + noise, 0.0, 255.0)
        nuclei.append(NucleusRecord(centroid, pixels))
    image = np.clip(np.round(image), 0.0, 255.0)
    return PatchBundle(patch_id, patient_id, label, image, nuclei)


def make_dataset(
    n_patches: int,
    seed: int,
    hw: int = 24,
    patches_per_patient: int = 4,
) -> list:
    """Balanced labeled patch bundles grouped into patients."""
    rng = np.random.default_rng(seed)
    bundles = []
    for k in range(n_patches):
        patient = k // patches_per_patient
        label = patient % 2
        bundles.append(
            make_bundle(rng, f"patch{k:04d}", f"patient{patient:03d}", label, hw)
        )
    return bundles
