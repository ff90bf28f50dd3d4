"""Histology patch classification from fused image and cell-graph embeddings.

The package is built around a small float64 autodiff core (`cellfuse.tensor`),
hand-rolled radiomic node features (`cellfuse.pathomics`), cell-graph
construction and text formats (`cellfuse.cellgraph`), toy CNN and GNN branches
(`cellfuse.cnn`, `cellfuse.gnn`), embedding fusion by MLP or transformer
(`cellfuse.fusion`), a training/evaluation pipeline (`cellfuse.pipeline`), and
a synthetic two-modality benchmark (`cellfuse.synth`).  Compute-heavy inner
loops have interchangeable numba and pure-numpy backends (`cellfuse.kernels`),
selected with the ``CELLFUSE_NUMBA`` environment variable.
"""

__version__ = "0.1.0"
