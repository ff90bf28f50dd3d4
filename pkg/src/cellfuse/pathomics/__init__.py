"""Hand-crafted nucleus features: location, first-order, and five texture
families, assembled into the 94-entry node feature vector."""

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
    QuantizedRegion,
    location_features,
    quantize,
)
from cellfuse.pathomics.vector import (
    FEATURE_NAMES,
    FEATURE_SCHEMA_VERSION,
    LOCATION_SLICE,
    N_FEATURES,
    extract_node_features,
)

__all__ = [
    "NucleusRegion",
    "QuantizedRegion",
    "quantize",
    "location_features",
    "first_order_features",
    "glcm_features",
    "gldm_features",
    "glrlm_features",
    "glszm_features",
    "ngtdm_features",
    "extract_node_features",
    "FEATURE_NAMES",
    "FEATURE_SCHEMA_VERSION",
    "N_FEATURES",
    "N_BINS_DEFAULT",
    "LOCATION_SLICE",
    "LOCATION_NAMES",
    "FIRST_ORDER_NAMES",
    "GLCM_NAMES",
    "GLDM_NAMES",
    "GLRLM_NAMES",
    "GLSZM_NAMES",
    "NGTDM_NAMES",
]
