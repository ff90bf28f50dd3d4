"""Run configuration files: line-oriented ``key = value`` text.

A config file drives the ``train`` command end to end, so a run can be
reproduced from the file alone.  Syntax:

  * one ``key = value`` pair per line;
  * blank lines and lines starting with ``#`` are ignored;
  * keys are case-sensitive and may appear at most once;
  * unknown keys are rejected, naming the key and its line number.

Every key has a documented default except ``d_c``, the critical distance for
graph construction, which must always be supplied explicitly (as the
``build-graphs --dc`` flag, or as ``d_c = ...`` where a config drives graph
building).  Command-line flags override values read from the file.

Keys, defaults, and meanings:

  paths
    manifest       (no default; required by train)  dataset manifest file
    out_dir        runs        output directory for checkpoints and metrics

  reproducibility
    seed           0           master seed for init, shuffling, augmentation

  graph construction
    d_c            (no default)  critical distance in pixels; > 0
    n_bins         32          gray-level bins for texture features

  optimization
    lr_max         5e-4        cosine schedule peak learning rate
    lr_min         5e-6        cosine schedule floor learning rate
    t_max          10          cosine schedule period in epochs
    weight_decay   1e-5        decoupled weight decay
    batch_size     32          mini-batch size
    max_epochs     100         hard epoch cap
    patience       8           early-stop patience on validation loss

  model
    mode           mlp         fusion scheme: mlp | transformer
    cnn_kind       residual    image backbone: plain | residual | dense
    gnn_kind       gin         graph backbone: gcn | gin
    cnn_width      8           image stem channel count
    d_image        64          image embedding width
    gnn_hidden     128         graph conv hidden width
    d_graph        16          graph embedding width
    ratio          0.5         top-k pool keep fraction in (0, 1], or "none"
    n_blocks       1           fusion block count
    alignment      minimization  branch alignment: minimization | maximization | predefined
    predefined_dim 192         alignment width when alignment = predefined
    mlp_embed      128         MLP fusion embedding width
    heads          4           attention heads (transformer fusion)
    dropout        0.1         dropout probability in [0, 1)
    activation     relu        MLP fusion activation: relu | leaky_relu

  preprocessing
    feature_norm   standardize   node-feature scaling: standardize | none
"""

from __future__ import annotations

from dataclasses import dataclass, fields

__all__ = ["ConfigError", "RunConfig", "parse_config", "read_config"]


class ConfigError(ValueError):
    """A config file could not be parsed or validated."""


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}") from None


def _parse_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}") from None


def _parse_ratio(raw: str):
    if raw.lower() == "none":
        return None
    value = _parse_float(raw)
    if not 0.0 < value <= 1.0:
        raise ValueError(f"ratio must lie in (0, 1] or be 'none', got {raw!r}")
    return value


def _enum(*allowed: str):
    def parse(raw: str) -> str:
        if raw not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}; got {raw!r}")
        return raw

    return parse


def _positive_int(raw: str) -> int:
    value = _parse_int(raw)
    if value < 1:
        raise ValueError(f"expected a positive integer, got {raw!r}")
    return value


def _nonneg_float(raw: str) -> float:
    value = _parse_float(raw)
    if value < 0:
        raise ValueError(f"expected a non-negative number, got {raw!r}")
    return value


def _positive_float(raw: str) -> float:
    value = _parse_float(raw)
    if value <= 0:
        raise ValueError(f"expected a positive number, got {raw!r}")
    return value


def _dropout(raw: str) -> float:
    value = _parse_float(raw)
    if not 0.0 <= value < 1.0:
        raise ValueError(f"dropout must lie in [0, 1), got {raw!r}")
    return value


_NO_DEFAULT = object()

# key -> (parser, default); _NO_DEFAULT marks keys that stay None unless set
_SCHEMA = {
    "manifest": (str, _NO_DEFAULT),
    "out_dir": (str, "runs"),
    "seed": (_parse_int, 0),
    "d_c": (_positive_float, _NO_DEFAULT),
    "n_bins": (_positive_int, 32),
    "lr_max": (_nonneg_float, 5e-4),
    "lr_min": (_nonneg_float, 5e-6),
    "t_max": (_positive_int, 10),
    "weight_decay": (_nonneg_float, 1e-5),
    "batch_size": (_positive_int, 32),
    "max_epochs": (_positive_int, 100),
    "patience": (_positive_int, 8),
    "mode": (_enum("mlp", "transformer"), "mlp"),
    "cnn_kind": (_enum("plain", "residual", "dense"), "residual"),
    "gnn_kind": (_enum("gcn", "gin"), "gin"),
    "cnn_width": (_positive_int, 8),
    "d_image": (_positive_int, 64),
    "gnn_hidden": (_positive_int, 128),
    "d_graph": (_positive_int, 16),
    "ratio": (_parse_ratio, 0.5),
    "n_blocks": (_positive_int, 1),
    "alignment": (_enum("minimization", "maximization", "predefined"), "minimization"),
    "predefined_dim": (_positive_int, 192),
    "mlp_embed": (_positive_int, 128),
    "heads": (_positive_int, 4),
    "dropout": (_dropout, 0.1),
    "activation": (_enum("relu", "leaky_relu"), "relu"),
    "feature_norm": (_enum("standardize", "none"), "standardize"),
}


@dataclass(frozen=True)
class RunConfig:
    """All settings of one run; see the module docstring for semantics."""

    manifest: str | None = None
    out_dir: str = "runs"
    seed: int = 0
    d_c: float | None = None
    n_bins: int = 32
    lr_max: float = 5e-4
    lr_min: float = 5e-6
    t_max: int = 10
    weight_decay: float = 1e-5
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 8
    mode: str = "mlp"
    cnn_kind: str = "residual"
    gnn_kind: str = "gin"
    cnn_width: int = 8
    d_image: int = 64
    gnn_hidden: int = 128
    d_graph: int = 16
    ratio: float | None = 0.5
    n_blocks: int = 1
    alignment: str = "minimization"
    predefined_dim: int = 192
    mlp_embed: int = 128
    heads: int = 4
    dropout: float = 0.1
    activation: str = "relu"
    feature_norm: str = "standardize"

    def model_kwargs(self) -> dict:
        """Keyword arguments for pipeline.build_model."""
        return {
            "mode": self.mode,
            "cnn_kind": self.cnn_kind,
            "gnn_kind": self.gnn_kind,
            "cnn_width": self.cnn_width,
            "d_image": self.d_image,
            "gnn_hidden": self.gnn_hidden,
            "d_graph": self.d_graph,
            "ratio": self.ratio,
            "n_blocks": self.n_blocks,
            "alignment": self.alignment,
            "predefined_dim": self.predefined_dim,
            "mlp_embed": self.mlp_embed,
            "heads": self.heads,
            "dropout": self.dropout,
            "activation": self.activation,
        }


assert set(_SCHEMA) == {f.name for f in fields(RunConfig)}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse config text; reject unknown keys, bad values, and duplicates."""
    values: dict = {}
    seen_line: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(
                f"{source}: line {lineno}: expected 'key = value', got {line!r}"
            )
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        if key in seen_line:
            raise ConfigError(
                f"{source}: line {lineno}: duplicate key {key!r}"
                f" (first set on line {seen_line[key]})"
            )
        seen_line[key] = lineno
        parser, _ = _SCHEMA[key]
        try:
            values[key] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"{source}: line {lineno}: key {key!r}: {exc}") from None
    if values.get("lr_min", 5e-6) > values.get("lr_max", 5e-4):
        key = "lr_min" if "lr_min" in values else "lr_max"
        raise ConfigError(
            f"{source}: line {seen_line[key]}: lr_min must not exceed lr_max"
        )
    defaults = {
        key: (None if default is _NO_DEFAULT else default)
        for key, (_, default) in _SCHEMA.items()
    }
    defaults.update(values)
    return RunConfig(**defaults)


def read_config(path) -> RunConfig:
    """Read and parse a config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))
