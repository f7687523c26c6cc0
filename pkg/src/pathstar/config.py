"""Flat `key = value` run configuration, overrides, and run manifests.

One dotted key per experiment knob, defaults matching the reference
hyperparameters (lr=5e-4, batch=1024, heads=2, dim=64, ff=256, layers=8).
Command-line overrides use the same `key=value` syntax and win over file
values; `resolve` returns the merged, typed mapping and `spec_from_config`
turns it into an ExperimentSpec.  Manifests record the resolved config next
to every artifact a run produces, keyed by content hash.
"""

from __future__ import annotations

import json
from dataclasses import fields
from hashlib import sha256
from pathlib import Path

from .training import ExperimentSpec


class ConfigError(ValueError):
    pass


# dotted key -> ExperimentSpec field
KEY_TO_FIELD = {
    "run.name": "name",
    "task.d": "d",
    "task.m": "m",
    "task.vocab": "vocab",
    "task.graph": "graph_kind",
    "task.tree_path_mix": "tree_path_mix",
    "data.shuffle": "shuffle",
    "data.layout": "layout",
    "data.query": "query_mode",
    "sp.variant": "scratchpad",
    "sp.p_mask": "sp_p_mask",
    "sp.p_keep": "sp_p_keep",
    "mask.kind": "mask_kind",
    "mask.rate": "mask_rate",
    "mask.p_mask": "mask_p_mask",
    "mask.p_keep": "mask_p_keep",
    "mask.noise": "mask_noise",
    "mask.scheme": "mask_scheme",
    "aux.kind": "aux_kind",
    "aux.weight": "aux_weight",
    "aux.hinge": "aux_hinge",
    "aux.ls_temperature": "ls_temperature",
    "model.layers": "layers",
    "model.heads": "heads",
    "model.dim": "dim",
    "model.ff": "ff_dim",
    "model.init_std": "init_std",
    "model.dtype": "dtype",
    "train.lr": "lr",
    "train.beta1": "beta1",
    "train.beta2": "beta2",
    "train.adam_eps": "adam_eps",
    "train.batch": "batch_size",
    "train.samples": "total_samples",
    "train.offline": "offline",
    "train.corpus": "corpus_size",
    "train.epochs": "epochs",
    "train.data_seed": "data_seed",
    "train.eval_every": "eval_every",
    "train.eval_samples": "eval_samples",
    "train.eval_chunk": "eval_chunk",
    "train.seeds": "seeds",
    "train.early_stop_acc": "early_stop_acc",
    "train.prefetch": "prefetch",
}
_FIELD_TO_KEY = {v: k for k, v in KEY_TO_FIELD.items()}
_SPEC_DEFAULTS = {f.name: f.default for f in fields(ExperimentSpec)}
DEFAULTS = {k: _SPEC_DEFAULTS[f] for k, f in KEY_TO_FIELD.items()}

_RANGE_KEYS = {"task.d", "task.m"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    default = DEFAULTS[key]
    if key in _RANGE_KEYS:
        if ".." in raw:
            lo, _, hi = raw.partition("..")
            return (int(lo), int(hi))
        return int(raw)
    if key == "train.seeds":
        return tuple(int(s) for s in raw.split(",") if s.strip())
    if isinstance(default, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_config(text: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment, blanks are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = _parse_value(key, raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from exc
    return out


def parse_overrides(pairs) -> dict:
    """Parse command-line `key=value` override tokens."""
    out = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        key = key.strip()
        if not sep or key not in DEFAULTS:
            raise ConfigError(f"bad override {pair!r}; use a known key=value")
        try:
            out[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"override {key}: {exc}") from exc
    return out


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults <- config file <- command line, in increasing precedence."""
    cfg = dict(DEFAULTS)
    cfg.update(file_values or {})
    cfg.update(overrides or {})
    return cfg


def load_config(path) -> dict:
    return parse_config(Path(path).read_text())


def spec_from_config(cfg: dict) -> ExperimentSpec:
    spec = ExperimentSpec()
    for key, value in cfg.items():
        setattr(spec, KEY_TO_FIELD[key], value)
    spec.validate()
    return spec


def config_from_spec(spec: ExperimentSpec) -> dict:
    return {_FIELD_TO_KEY[f.name]: getattr(spec, f.name) for f in fields(ExperimentSpec)}


def render_config(cfg: dict) -> str:
    """Inverse of parse_config, stable key order."""
    lines = []
    for key in DEFAULTS:
        if key not in cfg:
            continue
        value = cfg[key]
        if key in _RANGE_KEYS and isinstance(value, tuple):
            value = f"{value[0]}..{value[1]}"
        elif key == "train.seeds":
            value = ",".join(str(s) for s in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def file_sha256(path) -> str:
    h = sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, cfg: dict, seeds, artifacts=(), name="manifest.json") -> Path:
    """Drop a manifest beside the run outputs.

    Deliberately timestamp-free so identical inputs give identical bytes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.items()},
        "seeds": list(seeds),
        "artifacts": {
            Path(p).name: file_sha256(p) for p in artifacts if Path(p).exists()
        },
    }
    path = out_dir / name
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def read_manifest(out_dir) -> dict | None:
    path = Path(out_dir) / "manifest.json"
    if not path.exists():
        return None
    return json.loads(path.read_text())
