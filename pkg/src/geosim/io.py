"""File formats: IDX tensors, CSV matrices, edge lists, labels, run configs."""

from __future__ import annotations

import gzip
import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graphs import DataMatrix
from .train import EpochLog, TaskSpec

__all__ = [
    "FormatError",
    "ConfigError",
    "load_idx",
    "load_csv_matrix",
    "save_embedding",
    "load_embedding",
    "load_edge_list",
    "load_labels",
    "parse_config",
    "RunConfig",
    "resolve_config",
    "config_hash",
    "write_run_header",
    "write_training_log",
    "write_metrics",
]

IDX_MAGIC_LABELS = 0x00000801
IDX_MAGIC_IMAGES = 0x00000803


class FormatError(ValueError):
    """A file's bytes do not follow its declared format."""

    def __init__(self, path, message, line=None, offset=None):
        where = str(path)
        if line is not None:
            where += f", line {line}"
        if offset is not None:
            where += f", byte offset {offset}"
        super().__init__(f"{where}: {message}")


class ConfigError(ValueError):
    """A run configuration is malformed or out of range."""


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":  # transparent gzip, the common shipping form of IDX
        raw = gzip.decompress(raw)
    return raw


def load_idx(path):
    """Parse a big-endian IDX file.

    Image files (magic 0x00000803) return a DataMatrix of flattened rows
    scaled into [0, 1]; label files (magic 0x00000801) return an int64 array.
    """
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise FormatError(path, "file too short for an IDX magic number", offset=0)
    (magic,) = struct.unpack(">I", raw[:4])
    if magic == IDX_MAGIC_IMAGES:
        if len(raw) < 16:
            raise FormatError(path, "truncated IDX image header", offset=len(raw))
        n, rows, cols = struct.unpack(">III", raw[4:16])
        expected = n * rows * cols
        got = len(raw) - 16
        if got != expected:
            raise FormatError(
                path,
                f"IDX payload holds {got} bytes, header promises {expected} ({n}x{rows}x{cols})",
                offset=16,
            )
        pixels = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(n, rows * cols)
        return DataMatrix(values=pixels.astype(np.float64) / 255.0)
    if magic == IDX_MAGIC_LABELS:
        if len(raw) < 8:
            raise FormatError(path, "truncated IDX label header", offset=len(raw))
        (n,) = struct.unpack(">I", raw[4:8])
        got = len(raw) - 8
        if got != n:
            raise FormatError(
                path, f"IDX payload holds {got} labels, header promises {n}", offset=8
            )
        return np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)
    raise FormatError(path, f"unknown IDX magic 0x{magic:08x}", offset=0)


def load_csv_matrix(path, delimiter: str = ",") -> DataMatrix:
    """Dense numeric CSV to DataMatrix.

    Blank lines are skipped; a single leading non-numeric line is treated as
    a header. Ragged or non-numeric data rows raise with their line number.
    """
    rows = []
    width = None
    header_allowed = True
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            cells = [c.strip() for c in text.split(delimiter)]
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if header_allowed:
                    header_allowed = False
                    continue
                raise FormatError(path, "non-numeric cell", line=lineno) from None
            header_allowed = False
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise FormatError(
                    path, f"row has {len(values)} cells, expected {width}", line=lineno
                )
            rows.append(values)
    if not rows:
        raise FormatError(path, "no numeric rows")
    return DataMatrix(values=np.asarray(rows, dtype=np.float64))


def save_embedding(z: np.ndarray, path, labels=None) -> None:
    """CSV with header id,z0,...,z{d-1}[,label]; %.17g preserves float64 exactly."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"expected a 2-D embedding, got shape {z.shape}")
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape[0] != z.shape[0]:
            raise ValueError("labels length does not match the embedding")
    cols = ["id"] + [f"z{j}" for j in range(z.shape[1])] + (["label"] if labels is not None else [])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for i, row in enumerate(z):
            cells = [str(i)] + ["%.17g" % v for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            fh.write(",".join(cells) + "\n")


def load_embedding(path):
    """Read a save_embedding file back as (points, labels or None)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "id":
        raise FormatError(path, "expected an embedding header starting with 'id'", line=1)
    has_labels = header[-1] == "label"
    mat = load_csv_matrix(path).values
    z = mat[:, 1 : mat.shape[1] - 1] if has_labels else mat[:, 1:]
    labels = mat[:, -1].astype(np.int64) if has_labels else None
    return z, labels


def load_edge_list(path) -> np.ndarray:
    """Whitespace-separated "i j" pairs; '#' starts a comment; returns (m, 2) int64."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.split()
            if len(tokens) != 2:
                raise FormatError(path, f"expected 2 node ids, got {len(tokens)}", line=lineno)
            try:
                i, j = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise FormatError(path, "node ids must be integers", line=lineno) from None
            if i < 0 or j < 0:
                raise FormatError(path, f"negative node id ({i}, {j})", line=lineno)
            pairs.append((i, j))
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def load_labels(path, n: int | None = None) -> np.ndarray:
    """Node labels, either an IDX label file or two-column "node_id label" text.

    With n given, checks ids cover exactly 0..n-1 (each id once).
    """
    raw = Path(path).read_bytes()
    is_idx = raw[:2] == b"\x1f\x8b" or (
        len(raw) >= 4 and struct.unpack(">I", raw[:4])[0] == IDX_MAGIC_LABELS
    )
    if is_idx:
        labels = load_idx(path)
        if not isinstance(labels, np.ndarray) or labels.ndim != 1:
            raise FormatError(path, "IDX file does not hold labels")
        if n is not None and labels.shape[0] != n:
            raise FormatError(path, f"{labels.shape[0]} labels for {n} points")
        return labels
    got: dict[int, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.split()
            if len(tokens) != 2:
                raise FormatError(path, f"expected 'node_id label', got {len(tokens)} tokens", line=lineno)
            try:
                i, y = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise FormatError(path, "node id and label must be integers", line=lineno) from None
            if i in got:
                raise FormatError(path, f"duplicate label for node {i}", line=lineno)
            got[i] = y
    if not got:
        raise FormatError(path, "no labels found")
    size = n if n is not None else max(got) + 1
    missing = [i for i in range(size) if i not in got]
    if missing or len(got) != size:
        extra = sorted(set(got) - set(range(size)))
        detail = f"missing ids {missing[:5]}" if missing else f"unexpected ids {extra[:5]}"
        raise FormatError(path, f"labels must cover ids 0..{size - 1} exactly ({detail})")
    return np.asarray([got[i] for i in range(size)], dtype=np.int64)


# ---------------------------------------------------------------------------
# Run configuration: flat "key = value" files plus CLI overrides.

_TASK_CHOICES = ("dr", "ge", "kd")

# key -> (python type, allowed values or validation hint)
_CONFIG_SCHEMA = {
    "task": (str, _TASK_CHOICES),
    "data": (str, None),
    "labels": (str, None),
    "edges": (str, None),
    "student": (str, None),
    "teacher": (str, None),
    "out": (str, None),
    "preset": (str, ("mnist", "fmnist", "cora", "citeseer", "pubmed")),
    "seed": (int, "nonneg"),
    "epochs": (int, "pos"),
    "batch_size": (int, "ge2"),
    "base_lr": (float, "pos"),
    "loss": (str, ("mse", "kl", "bce", "gkl")),
    "gamma": (float, "nonneg"),
    "nu_x": (float, "pos"),
    "nu_z": (float, "pos"),
    "sigma_x": (float, "pos_or_auto"),
    "sigma_z": (float, "pos"),
    "mu_z": (float, "finite"),
    "fusion": (str, ("static", "dynamic")),
    "mask_fraction": (float, "unit_interval_open"),
    "output_dim": (int, "pos"),
    "model": (str, ("free_coordinates", "encoder")),
    "hidden_widths": (str, "int_list"),
    "tap_layer": (int, "pos"),
    "k": (int, "pos"),
    "metric": (str, ("euclidean", "cosine")),
    "calibration": (str, ("statistic", "binary_search")),
    "target_neighbors": (int, "pos"),
    "latent_distance": (str, ("euclidean", "one_minus_cosine")),
    "alpha2": (float, "nonneg"),
    "alpha2_final": (float, "nonneg_or_none"),
    "eval_k": (int, "pos"),
    "vote_k": (int, "pos"),
    "eval_fraction": (float, "unit_interval_open"),
    "deterministic": (bool, None),
}


def parse_config(text_or_path, from_path: bool = True) -> dict[str, str]:
    """Flat "key = value" lines; '#' comments and blank lines are ignored."""
    if from_path:
        path = text_or_path
        text = Path(path).read_text(encoding="utf-8")
    else:
        path = "<config>"
        text = text_or_path
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}, line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in body.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{path}, line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"{path}, line {lineno}: duplicate key '{key}'")
        out[key] = value
    return out


def _convert(key: str, value: str):
    if key not in _CONFIG_SCHEMA:
        raise ConfigError(f"unknown config key '{key}'")
    typ, rule = _CONFIG_SCHEMA[key]
    if typ is bool:
        if value not in ("true", "false"):
            raise ConfigError(f"config key '{key}' must be true or false, got '{value}'")
        return value == "true"
    if typ is int:
        try:
            v = int(value)
        except ValueError:
            raise ConfigError(f"config key '{key}' must be an integer, got '{value}'") from None
    elif typ is float:
        if rule == "pos_or_auto" and value == "auto":
            return None
        if rule == "nonneg_or_none" and value == "none":
            return None
        try:
            v = float(value)
        except ValueError:
            raise ConfigError(f"config key '{key}' must be a number, got '{value}'") from None
    else:
        v = value
        if rule == "int_list":
            try:
                widths = tuple(int(tok) for tok in value.split(",") if tok.strip())
            except ValueError:
                raise ConfigError(f"config key '{key}' must be comma-separated integers") from None
            if not widths or min(widths) < 1:
                raise ConfigError(f"config key '{key}' needs positive widths, got '{value}'")
            return widths
        if isinstance(rule, tuple) and v not in rule:
            raise ConfigError(f"config key '{key}' must be one of {rule}, got '{value}'")
        return v
    if rule == "pos" or rule == "pos_or_auto":
        ok = np.isfinite(v) and v > 0
    elif rule == "nonneg" or rule == "nonneg_or_none":
        ok = np.isfinite(v) and v >= 0
    elif rule == "ge2":
        ok = v >= 2
    elif rule == "unit_interval_open":
        ok = np.isfinite(v) and 0.0 <= v < 1.0
    elif rule == "finite":
        ok = np.isfinite(v)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"config key '{key}' out of range ({rule}): {value}")
    return v


@dataclass
class RunConfig:
    """A fully resolved run: task, file paths, hyperparameters, eval knobs."""

    task: str
    spec: TaskSpec
    paths: dict = field(default_factory=dict)
    eval_k: int = 10
    vote_k: int = 5
    eval_fraction: float = 0.5
    deterministic: bool = True
    preset: str | None = None
    resolved: dict = field(default_factory=dict)


_REQUIRED_PATHS = {"dr": ("data",), "ge": ("data", "edges"), "kd": ("student", "teacher")}

_SPEC_KEYS = {
    "seed": "seed",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "base_lr": "base_lr",
    "loss": "loss",
    "gamma": "gamma",
    "nu_x": "nu_x",
    "nu_z": "nu_z",
    "sigma_x": "sigma_x",
    "sigma_z": "sigma_z",
    "mu_z": "mu_z",
    "fusion": "fusion",
    "mask_fraction": "pair_mask_fraction",
    "output_dim": "output_dim",
    "model": "model_mode",
    "hidden_widths": "hidden_widths",
    "tap_layer": "tap_layer",
    "k": "knn_k",
    "metric": "knn_metric",
    "calibration": "calibration",
    "target_neighbors": "target_neighbors",
    "latent_distance": "latent_distance",
    "alpha2": "alpha2",
    "alpha2_final": "alpha2_final",
}


def resolve_config(task: str, raw: dict[str, str], overrides: dict | None = None) -> RunConfig:
    """Validate raw key=value strings, apply presets and overrides, build a spec.

    Precedence: task defaults < preset < config file < explicit overrides.
    """
    from .tasks import DR_SIGMA_X_PRESETS, GE_PRESETS, dr_defaults, ge_defaults, kd_defaults

    if task not in _TASK_CHOICES:
        raise ConfigError(f"unknown task '{task}'")
    values = {}
    for key, value in raw.items():
        values[key] = _convert(key, value)
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in _CONFIG_SCHEMA:
                raise ConfigError(f"unknown config key '{key}'")
            values[key] = _convert(key, value) if isinstance(value, str) else value
    if "task" in values and values["task"] != task:
        raise ConfigError(f"config file says task={values['task']}, command says {task}")

    preset = values.pop("preset", None)
    spec_kwargs = {}
    if preset is not None:
        if task == "dr":
            if preset not in DR_SIGMA_X_PRESETS:
                raise ConfigError(f"preset '{preset}' is not a dr preset")
            spec_kwargs["sigma_x"] = DR_SIGMA_X_PRESETS[preset]
        elif task == "ge":
            if preset not in GE_PRESETS:
                raise ConfigError(f"preset '{preset}' is not a ge preset")
            spec_kwargs.update(GE_PRESETS[preset])
        else:
            raise ConfigError(f"preset '{preset}' does not apply to task kd")

    paths = {}
    for key in ("data", "labels", "edges", "student", "teacher", "out"):
        if key in values:
            paths[key] = values.pop(key)
    for key in _REQUIRED_PATHS[task]:
        if key not in paths:
            raise ConfigError(f"task {task} needs config key '{key}'")

    eval_k = values.pop("eval_k", 10)
    vote_k = values.pop("vote_k", 5)
    eval_fraction = values.pop("eval_fraction", 0.5)
    deterministic = values.pop("deterministic", True)
    values.pop("task", None)
    for key, value in values.items():
        spec_kwargs[_SPEC_KEYS[key]] = value

    defaults = {"dr": dr_defaults, "ge": ge_defaults, "kd": kd_defaults}[task]
    try:
        spec = defaults(**spec_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    resolved = {"task": task, "preset": preset if preset is not None else "none"}
    resolved.update(paths)
    for cfg_key, spec_key in _SPEC_KEYS.items():
        value = getattr(spec, spec_key)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        if value is None:
            # spell absent values the way the schema accepts them back
            value = "auto" if _CONFIG_SCHEMA[cfg_key][1] == "pos_or_auto" else "none"
        resolved[cfg_key] = str(value)
    resolved.update(
        eval_k=str(eval_k),
        vote_k=str(vote_k),
        eval_fraction=str(eval_fraction),
        deterministic="true" if deterministic else "false",
    )
    return RunConfig(
        task=task,
        spec=spec,
        paths=paths,
        eval_k=eval_k,
        vote_k=vote_k,
        eval_fraction=eval_fraction,
        deterministic=deterministic,
        preset=preset,
        resolved={k: str(v) for k, v in resolved.items()},
    )


def config_hash(resolved: dict[str, str]) -> str:
    """sha256 over the canonical sorted key=value serialization."""
    canon = "\n".join(f"{k} = {resolved[k]}" for k in sorted(resolved))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_run_header(path, config: RunConfig, version: str) -> None:
    """Reproducibility header: version, config hash, then every resolved setting.

    The resolved block includes the seed, so the whole file parses back
    through parse_config without duplicate keys.
    """
    lines = [f"version = {version}", f"config_hash = {config_hash(config.resolved)}", ""]
    lines += [f"{k} = {config.resolved[k]}" for k in sorted(config.resolved)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_training_log(path, logs: list[EpochLog]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,loss,beta,effective_lr\n")
        for row in logs:
            fh.write(f"{row.epoch},{row.loss:.10g},{row.beta:.10g},{row.effective_lr:.10g}\n")


def write_metrics(path, rows: list[tuple[str, int | None, float]]) -> None:
    """metric,k,value CSV; k is empty for metrics without a neighborhood size."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("metric,k,value\n")
        for name, k, value in rows:
            fh.write(f"{name},{'' if k is None else k},{value:.10g}\n")
