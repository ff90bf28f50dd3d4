"""Cell graphs over nucleus centroids, plus the on-disk text formats.

A patch bundle carries the raw material (gray image, nuclei masks); a cell
graph is the derived object: one 94-feature node per nucleus and an edge
between every pair of centroids within the critical distance d_c, weighted
d_c/d.  Both objects have a line-oriented UTF-8 text format with strict
parsers: any malformed or extra line fails with its 1-based line number.

Node order is the bundle's nucleus order, so graphs are reproducible from
their inputs.  Nuclei whose centroids coincide exactly are merged (mask
union) with a logged warning; downstream code can therefore assume pairwise
distinct centroids and never divides by a zero distance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from cellfuse import kernels
from cellfuse.pathomics import N_FEATURES, N_BINS_DEFAULT, extract_node_features
from cellfuse.pathomics.region import NucleusRegion

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised on malformed bundle/graph text; message names the bad line."""


def _fail(lineno: int, msg: str):
    raise GraphFormatError(f"line {lineno}: {msg}")


def _fmt(x: float) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(x))


def _ident_ok(s: str) -> bool:
    return bool(s) and not any(ch.isspace() for ch in s)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class NucleusRecord:
    """One segmented nucleus: centroid in (x, y) pixels plus its mask."""

    centroid: tuple
    pixels: np.ndarray  # (P, 2) int64 rows/cols

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.int64)
        if px.ndim != 2 or px.shape[1] != 2 or px.shape[0] == 0:
            raise ValueError("nucleus mask must be a non-empty (P, 2) array")
        object.__setattr__(self, "pixels", px)
        object.__setattr__(
            self, "centroid", (float(self.centroid[0]), float(self.centroid[1]))
        )


@dataclass(frozen=True)
class PatchBundle:
    patch_id: str
    patient_id: str
    label: int
    image: np.ndarray  # (H, W) float64, values 0..255
    nuclei: list = field(default_factory=list)

    def __post_init__(self):
        if not _ident_ok(self.patch_id) or not _ident_ok(self.patient_id):
            raise ValueError("patch_id and patient_id must be non-empty, no whitespace")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        img = np.asarray(self.image, dtype=np.float64)
        if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
            raise ValueError("image must be a non-empty 2-D grid")
        if img.min() < 0 or img.max() > 255:
            raise ValueError("gray values must lie in [0, 255]")
        object.__setattr__(self, "image", img)
        h, w = img.shape
        for k, nuc in enumerate(self.nuclei):
            px = nuc.pixels
            if px.min() < 0 or px[:, 0].max() >= h or px[:, 1].max() >= w:
                raise ValueError(f"nucleus {k} has mask pixels outside the image")

    @property
    def shape(self):
        return self.image.shape


@dataclass(frozen=True)
class CellGraph:
    patch_id: str
    patient_id: str
    label: int
    d_c: float
    x: np.ndarray          # (N, 94) node features
    centroids: np.ndarray  # (N, 2) in (x, y) pixels
    edges_i: np.ndarray    # (M,) int64, i < j
    edges_j: np.ndarray    # (M,) int64
    weights: np.ndarray    # (M,) float64, all >= 1

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != N_FEATURES:
            raise ValueError(f"node features must be (N, {N_FEATURES})")
        if x.shape[0] < 1:
            raise ValueError("a cell graph needs at least one node")
        object.__setattr__(self, "x", x)
        object.__setattr__(
            self, "centroids", np.asarray(self.centroids, dtype=np.float64)
        )
        object.__setattr__(self, "edges_i", np.asarray(self.edges_i, dtype=np.int64))
        object.__setattr__(self, "edges_j", np.asarray(self.edges_j, dtype=np.int64))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))

    @property
    def n_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def n_edges(self) -> int:
        return self.weights.shape[0]

    def dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        a[self.edges_i, self.edges_j] = self.weights
        a[self.edges_j, self.edges_i] = self.weights
        return a


def graphs_equal(a: CellGraph, b: CellGraph) -> bool:
    """Bit-exact equality of every stored field."""
    return (
        a.patch_id == b.patch_id
        and a.patient_id == b.patient_id
        and a.label == b.label
        and a.d_c == b.d_c
        and np.array_equal(a.x, b.x)
        and np.array_equal(a.centroids, b.centroids)
        and np.array_equal(a.edges_i, b.edges_i)
        and np.array_equal(a.edges_j, b.edges_j)
        and np.array_equal(a.weights, b.weights)
    )


# ---------------------------------------------------------------------------
# graph construction


def edge_weight(c_i, c_j, d_c: float) -> float:
    """d_c/d for centroids within the critical distance, else 0.

    Same arithmetic as the batched kernel (sqrt of the summed squares), so a
    pairwise loop over this function reproduces edge_list bit for bit.
    """
    if d_c <= 0:
        raise ValueError("d_c must be positive")
    dx = float(c_i[0]) - float(c_j[0])
    dy = float(c_i[1]) - float(c_j[1])
    d = float(np.sqrt(dx * dx + dy * dy))
    if d == 0.0:
        raise ValueError("coincident centroids have no defined weight; merge them")
    return d_c / d if d <= d_c else 0.0


def _merge_coincident(bundle: PatchBundle):
    """Group nuclei sharing an exact centroid, unioning their masks."""
    by_centroid = {}
    order = []
    for nuc in bundle.nuclei:
        key = nuc.centroid
        if key not in by_centroid:
            by_centroid[key] = [nuc.pixels]
            order.append(key)
        else:
            by_centroid[key].append(nuc.pixels)
    merged = []
    n_merged = 0
    for key in order:
        parts = by_centroid[key]
        if len(parts) == 1:
            merged.append(NucleusRecord(key, parts[0]))
        else:
            n_merged += len(parts) - 1
            union = np.unique(np.concatenate(parts, axis=0), axis=0)
            merged.append(NucleusRecord(key, union))
    if n_merged:
        logger.warning(
            "patch %s: merged %d nuclei with coincident centroids",
            bundle.patch_id,
            n_merged,
        )
    return merged


def build_graph(
    bundle: PatchBundle, d_c: float, n_bins: int = N_BINS_DEFAULT
) -> CellGraph:
    if d_c <= 0:
        raise ValueError("d_c must be positive")
    if not bundle.nuclei:
        raise ValueError(f"patch {bundle.patch_id}: cannot build a graph with no nuclei")
    nuclei = _merge_coincident(bundle)
    feats = np.empty((len(nuclei), N_FEATURES))
    for k, nuc in enumerate(nuclei):
        rows, cols = nuc.pixels[:, 0], nuc.pixels[:, 1]
        region = NucleusRegion(nuc.pixels, bundle.image[rows, cols])
        feats[k] = extract_node_features(region, n_bins)
    centroids = np.array([nuc.centroid for nuc in nuclei], dtype=np.float64)
    ei, ej, w = kernels.edge_list(centroids, float(d_c))
    return CellGraph(
        patch_id=bundle.patch_id,
        patient_id=bundle.patient_id,
        label=bundle.label,
        d_c=float(d_c),
        x=feats,
        centroids=centroids,
        edges_i=ei,
        edges_j=ej,
        weights=w,
    )


# ---------------------------------------------------------------------------
# text formats


class _Lines:
    """Cursor over the lines of a file, tracking 1-based line numbers."""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    @property
    def lineno(self) -> int:
        return self.pos  # number of the line just consumed

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            _fail(len(self.lines) + 1, f"unexpected end of file, expected {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def done(self):
        if self.pos < len(self.lines):
            _fail(self.pos + 1, "trailing garbage after the last expected line")


def _toks(cur: _Lines, what: str, n: int):
    toks = cur.next(what).split()
    if len(toks) != n:
        _fail(cur.lineno, f"expected {n} fields for {what}, got {len(toks)}")
    return toks


def _parse_int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        _fail(lineno, f"{what} must be an integer, got {tok!r}")


def _parse_float(tok: str, lineno: int, what: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        _fail(lineno, f"{what} must be a number, got {tok!r}")
    if not np.isfinite(v):
        _fail(lineno, f"{what} must be finite, got {tok!r}")
    return v


def serialize_bundle(bundle: PatchBundle) -> str:
    h, w = bundle.shape
    out = [
        f"PATCH v1 {bundle.patch_id} {bundle.patient_id} {bundle.label} {h} {w}"
    ]
    for row in bundle.image.astype(np.int64):
        out.append(" ".join(str(v) for v in row))
    out.append(f"NUCLEI {len(bundle.nuclei)}")
    for nuc in bundle.nuclei:
        cx, cy = nuc.centroid
        out.append(f"{_fmt(cx)} {_fmt(cy)} {nuc.pixels.shape[0]}")
        for r, c in nuc.pixels:
            out.append(f"{r} {c}")
    return "\n".join(out) + "\n"


def parse_bundle(text: str) -> PatchBundle:
    cur = _Lines(text)
    toks = _toks(cur, "PATCH header", 7)
    if toks[0] != "PATCH" or toks[1] != "v1":
        _fail(cur.lineno, f"bad magic, expected 'PATCH v1', got {toks[0]!r} {toks[1]!r}")
    patch_id, patient_id = toks[2], toks[3]
    label = _parse_int(toks[4], cur.lineno, "label")
    if label not in (0, 1):
        _fail(cur.lineno, f"label must be 0 or 1, got {label}")
    h = _parse_int(toks[5], cur.lineno, "height")
    w = _parse_int(toks[6], cur.lineno, "width")
    if h < 1 or w < 1:
        _fail(cur.lineno, f"grid must be at least 1x1, got {h}x{w}")
    image = np.empty((h, w), dtype=np.float64)
    for r in range(h):
        row = _toks(cur, f"image row {r}", w)
        for c, tok in enumerate(row):
            v = _parse_int(tok, cur.lineno, "gray value")
            if not 0 <= v <= 255:
                _fail(cur.lineno, f"gray value out of range [0, 255]: {v}")
            image[r, c] = v
    toks = _toks(cur, "NUCLEI line", 2)
    if toks[0] != "NUCLEI":
        _fail(cur.lineno, f"expected 'NUCLEI <K>', got {toks[0]!r}")
    k = _parse_int(toks[1], cur.lineno, "nucleus count")
    if k < 0:
        _fail(cur.lineno, f"nucleus count must be >= 0, got {k}")
    nuclei = []
    for _ in range(k):
        toks = _toks(cur, "nucleus record", 3)
        cx = _parse_float(toks[0], cur.lineno, "centroid x")
        cy = _parse_float(toks[1], cur.lineno, "centroid y")
        p = _parse_int(toks[2], cur.lineno, "mask pixel count")
        if p < 1:
            _fail(cur.lineno, f"mask pixel count must be >= 1, got {p}")
        pixels = np.empty((p, 2), dtype=np.int64)
        for q in range(p):
            pt = _toks(cur, "mask pixel", 2)
            r = _parse_int(pt[0], cur.lineno, "mask row")
            c = _parse_int(pt[1], cur.lineno, "mask col")
            if not (0 <= r < h and 0 <= c < w):
                _fail(cur.lineno, f"mask pixel ({r}, {c}) outside {h}x{w} grid")
            pixels[q] = (r, c)
        nuclei.append(NucleusRecord((cx, cy), pixels))
    cur.done()
    return PatchBundle(patch_id, patient_id, label, image, nuclei)


def serialize_graph(g: CellGraph) -> str:
    out = [
        f"CELLGRAPH v1 {g.patch_id} {g.patient_id} {g.label} {_fmt(g.d_c)}",
        f"NODES {g.n_nodes} FEATURES {N_FEATURES}",
    ]
    for k in range(g.n_nodes):
        parts = [str(k), _fmt(g.centroids[k, 0]), _fmt(g.centroids[k, 1])]
        parts.extend(_fmt(v) for v in g.x[k])
        out.append(" ".join(parts))
    out.append(f"EDGES {g.n_edges}")
    for i, j, w in zip(g.edges_i, g.edges_j, g.weights):
        out.append(f"{i} {j} {_fmt(w)}")
    return "\n".join(out) + "\n"


def parse_graph(text: str) -> CellGraph:
    cur = _Lines(text)
    toks = _toks(cur, "CELLGRAPH header", 6)
    if toks[0] != "CELLGRAPH" or toks[1] != "v1":
        _fail(
            cur.lineno,
            f"bad magic, expected 'CELLGRAPH v1', got {toks[0]!r} {toks[1]!r}",
        )
    patch_id, patient_id = toks[2], toks[3]
    label = _parse_int(toks[4], cur.lineno, "label")
    if label not in (0, 1):
        _fail(cur.lineno, f"label must be 0 or 1, got {label}")
    d_c = _parse_float(toks[5], cur.lineno, "critical distance")
    if d_c <= 0:
        _fail(cur.lineno, f"critical distance must be positive, got {d_c}")

    toks = _toks(cur, "NODES line", 4)
    if toks[0] != "NODES" or toks[2] != "FEATURES":
        _fail(cur.lineno, "expected 'NODES <N> FEATURES <F>'")
    n = _parse_int(toks[1], cur.lineno, "node count")
    f = _parse_int(toks[3], cur.lineno, "feature count")
    if n < 1:
        _fail(cur.lineno, f"node count must be >= 1, got {n}")
    if f != N_FEATURES:
        _fail(cur.lineno, f"feature count must be {N_FEATURES}, got {f}")
    x = np.empty((n, N_FEATURES))
    centroids = np.empty((n, 2))
    for k in range(n):
        toks = _toks(cur, f"node {k}", 3 + N_FEATURES)
        node_id = _parse_int(toks[0], cur.lineno, "node id")
        if node_id != k:
            _fail(cur.lineno, f"node ids must be 0..N-1 in order; expected {k}, got {node_id}")
        centroids[k, 0] = _parse_float(toks[1], cur.lineno, "centroid x")
        centroids[k, 1] = _parse_float(toks[2], cur.lineno, "centroid y")
        for q in range(N_FEATURES):
            x[k, q] = _parse_float(toks[3 + q], cur.lineno, f"feature {q + 1}")

    toks = _toks(cur, "EDGES line", 2)
    if toks[0] != "EDGES":
        _fail(cur.lineno, f"expected 'EDGES <M>', got {toks[0]!r}")
    m = _parse_int(toks[1], cur.lineno, "edge count")
    if m < 0:
        _fail(cur.lineno, f"edge count must be >= 0, got {m}")
    ei = np.empty(m, dtype=np.int64)
    ej = np.empty(m, dtype=np.int64)
    ws = np.empty(m, dtype=np.float64)
    seen = set()
    for q in range(m):
        toks = _toks(cur, f"edge {q}", 3)
        i = _parse_int(toks[0], cur.lineno, "edge endpoint i")
        j = _parse_int(toks[1], cur.lineno, "edge endpoint j")
        w = _parse_float(toks[2], cur.lineno, "edge weight")
        if not (0 <= i < n and 0 <= j < n):
            _fail(cur.lineno, f"edge endpoint out of range for {n} nodes: ({i}, {j})")
        if i >= j:
            _fail(cur.lineno, f"edges must satisfy i < j, got ({i}, {j})")
        if (i, j) in seen:
            _fail(cur.lineno, f"duplicate edge ({i}, {j})")
        if w < 1.0:
            _fail(cur.lineno, f"edge weight must be >= 1, got {w}")
        seen.add((i, j))
        ei[q], ej[q], ws[q] = i, j, w
    cur.done()
    return CellGraph(patch_id, patient_id, label, d_c, x, centroids, ei, ej, ws)
