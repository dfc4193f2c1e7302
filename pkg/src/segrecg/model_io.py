"""Factor files: one CSV per mode, a weights CSV and a ``manifest.json`` tying them together."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .tensor_core import CPDModel

MANIFEST = "manifest.json"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _write_matrix(path: Path, mat: np.ndarray):
    mat = np.atleast_2d(mat)
    lines = [",".join(format(float(v), ".17g") for v in row) for row in mat]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_matrix(path: Path) -> np.ndarray:
    rows = [ln.split(",") for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    return np.array([[float(v) for v in row] for row in rows])


def save_model(out_dir, model: CPDModel, *, seed=None, config: dict | None = None,
               extra: dict | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"weights": "weights.csv",
             "factors": [f"factor_mode{k + 1}.csv" for k in range(model.ndim)]}
    _write_matrix(out / files["weights"], model.weights[:, None])
    for name, f in zip(files["factors"], model.factors):
        _write_matrix(out / name, f)
    manifest = {
        "shape": list(model.shape),
        "rank": model.rank,
        "seed": seed,
        "config": config or {},
        "config_hash": config_hash(config or {}),
        "files": files,
    }
    if extra:
        manifest.update(extra)
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                encoding="utf-8")
    return manifest


def load_model(path):
    """Load ``(model, manifest)`` from a manifest file or the directory holding it."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    manifest = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent
    weights = _read_matrix(base / manifest["files"]["weights"]).reshape(-1)
    factors = [_read_matrix(base / name) for name in manifest["files"]["factors"]]
    # round-tripped columns are unit norm only to ~1e-16; renormalize exactly
    model = CPDModel.from_factors(factors, weights)
    if list(model.shape) != manifest["shape"] or model.rank != manifest["rank"]:
        raise ValueError("factor files disagree with the manifest")
    return model, manifest
