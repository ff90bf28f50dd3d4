"""Nucleus regions and gray-level quantization.

A region is the raw material for one graph node: the mask pixel coordinates
of a segmented nucleus plus the gray value (0..255) at each pixel.  Texture
families operate on a quantized level grid over the region's bounding box,
where 0 marks pixels outside the mask and in-mask pixels carry levels
1..n_bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_BINS_DEFAULT = 32


@dataclass(frozen=True)
class NucleusRegion:
    """Mask pixels (row, col) and one gray intensity per pixel."""

    pixels: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.int64)
        intensities = np.asarray(self.intensities, dtype=np.float64)
        if pixels.ndim != 2 or pixels.shape[1] != 2 or pixels.shape[0] == 0:
            raise ValueError("pixels must be a non-empty (N, 2) array")
        if intensities.shape != (pixels.shape[0],):
            raise ValueError("need exactly one intensity per pixel")
        if len({(int(r), int(c)) for r, c in pixels}) != pixels.shape[0]:
            raise ValueError("pixel coordinates must be unique")
        if intensities.min() < 0 or intensities.max() > 255:
            raise ValueError("intensities must lie in [0, 255]")
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "intensities", intensities)

    @property
    def n_pixels(self) -> int:
        return self.pixels.shape[0]

    def centroid(self) -> np.ndarray:
        """Unweighted mean of the pixel coordinates."""
        return self.pixels.mean(axis=0)

    def translate(self, dr: int, dc: int) -> "NucleusRegion":
        return NucleusRegion(self.pixels + np.array([dr, dc]), self.intensities)


@dataclass(frozen=True)
class QuantizedRegion:
    """Level grid over the bounding box: 0 outside, 1..n_levels inside."""

    levels: np.ndarray
    n_levels: int
    n_pixels: int


def quantize(region: NucleusRegion, n_bins: int = N_BINS_DEFAULT) -> QuantizedRegion:
    """Equal-width quantization of the region's intensities into n_bins levels.

    Bins divide [min, max] uniformly; the maximum maps into the top bin and a
    constant region maps entirely to level 1.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    v = region.intensities
    lo, hi = v.min(), v.max()
    if hi == lo:
        lev = np.ones(region.n_pixels, dtype=np.int64)
    else:
        lev = np.minimum(
            ((v - lo) / (hi - lo) * n_bins).astype(np.int64) + 1, n_bins
        )
    pix = region.pixels
    r0, c0 = pix[:, 0].min(), pix[:, 1].min()
    h = pix[:, 0].max() - r0 + 1
    w = pix[:, 1].max() - c0 + 1
    grid = np.zeros((h, w), dtype=np.int64)
    grid[pix[:, 0] - r0, pix[:, 1] - c0] = lev
    return QuantizedRegion(levels=grid, n_levels=n_bins, n_pixels=region.n_pixels)


def location_features(region: NucleusRegion) -> np.ndarray:
    """Center of mass (mean row, mean col), the node's 2 location values."""
    return region.centroid()


LOCATION_NAMES = ("location.center_of_mass_x", "location.center_of_mass_y")
