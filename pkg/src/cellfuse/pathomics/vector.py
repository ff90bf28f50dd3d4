"""The 94-entry node feature vector: ordering contract and assembly.

Families appear in the order location (2), first-order (18), GLCM (23),
GLDM (14), GLRLM (16), GLSZM (16), NGTDM (5); within a family the order is
the tuple published by each family module.  ``FEATURE_NAMES`` freezes the
full ordering and is versioned by ``FEATURE_SCHEMA_VERSION``; any change to
either is a breaking format change for serialized graphs.
"""

from __future__ import annotations

import numpy as np

from cellfuse.pathomics.firstorder import FIRST_ORDER_NAMES, first_order_features
from cellfuse.pathomics.glcm import GLCM_NAMES, glcm_features
from cellfuse.pathomics.gldm import GLDM_NAMES, gldm_features
from cellfuse.pathomics.glrlm import GLRLM_NAMES, glrlm_features
from cellfuse.pathomics.glszm import GLSZM_NAMES, glszm_features
from cellfuse.pathomics.ngtdm import NGTDM_NAMES, ngtdm_features
from cellfuse.pathomics.region import (
    LOCATION_NAMES,
    N_BINS_DEFAULT,
    NucleusRegion,
    location_features,
    quantize,
)

FEATURE_SCHEMA_VERSION = 1

FEATURE_NAMES: tuple[str, ...] = (
    LOCATION_NAMES
    + FIRST_ORDER_NAMES
    + GLCM_NAMES
    + GLDM_NAMES
    + GLRLM_NAMES
    + GLSZM_NAMES
    + NGTDM_NAMES
)

N_FEATURES = len(FEATURE_NAMES)
assert N_FEATURES == 94

LOCATION_SLICE = slice(0, 2)


def extract_node_features(
    region: NucleusRegion, n_bins: int = N_BINS_DEFAULT
) -> np.ndarray:
    """All 94 features of one region, in ``FEATURE_NAMES`` order."""
    q = quantize(region, n_bins)
    vec = np.concatenate(
        [
            location_features(region),
            first_order_features(region),
            glcm_features(q),
            gldm_features(q),
            glrlm_features(q),
            glszm_features(q),
            ngtdm_features(q),
        ]
    )
    if not np.all(np.isfinite(vec)):
        bad = [FEATURE_NAMES[i] for i in np.flatnonzero(~np.isfinite(vec))]
        raise AssertionError(f"non-finite features computed: {bad}")
    return vec
