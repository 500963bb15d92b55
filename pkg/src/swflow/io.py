"""Snapshot files and run manifests.

A field snapshot is a raw little-endian float64 file of (re, im) pairs in
row-major site order with the tensor index varying fastest, plus a JSON
sidecar describing the layout.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .diffgeo import GaugePhase
from .flow import FlowState
from .grid import Field, TorusGrid

__all__ = [
    "FORMAT_VERSION",
    "write_field",
    "read_field",
    "write_state",
    "read_state",
    "write_manifest",
    "read_manifest",
]

FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


def _site_major(f: Field) -> np.ndarray:
    n = f.grid.n
    lead = f.data.ndim - n
    moved = np.moveaxis(f.data, tuple(range(lead, f.data.ndim)), tuple(range(n)))
    return np.ascontiguousarray(moved)


def write_field(f: Field, path: str | Path, time: float = 0.0, k: int | None = None,
                S0: float | None = None) -> tuple[Path, Path]:
    """Write ``path`` (binary) and ``path`` with a ``.json`` suffix (sidecar)."""
    path = Path(path)
    flat = _site_major(f)
    pairs = np.stack([flat.real, flat.imag], axis=-1).astype(_DTYPE)
    path.write_bytes(pairs.tobytes(order="C"))
    meta = {
        "format_version": FORMAT_VERSION,
        "n": f.grid.n,
        "sizes": list(f.grid.sizes),
        "lengths": list(f.grid.lengths),
        "rank": f.rank,
        "spinor_rank": f.spinor_rank,
        "form_degree": f.form_degree,
        "purely_imaginary": f.purely_imaginary,
        "time": time,
        "k": k,
        "S0": S0,
    }
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return path, side


def read_field(path: str | Path) -> tuple[Field, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    grid = TorusGrid(meta["n"], tuple(meta["sizes"]), tuple(meta["lengths"]))
    n, rank, r = grid.n, meta["rank"], meta["spinor_rank"]
    tensor_shape = (n,) * rank + (r,)
    raw = np.frombuffer(path.read_bytes(), dtype=_DTYPE)
    expected = 2 * int(np.prod(tensor_shape)) * grid.num_sites
    if raw.size != expected:
        raise ValueError(f"{path}: expected {expected} float64 values, found {raw.size}")
    pairs = raw.reshape(grid.sizes + tensor_shape + (2,))
    flat = pairs[..., 0] + 1j * pairs[..., 1]
    data = np.moveaxis(flat, tuple(range(n)), tuple(range(flat.ndim - n, flat.ndim)))
    f = Field(grid, np.ascontiguousarray(data), rank, r, meta["form_degree"],
              meta.get("purely_imaginary", False))
    return f, meta


def write_state(state: FlowState, directory: str | Path, stem: str, k: int | None = None,
                S0: float | None = None) -> dict:
    """Write ``phi``, ``a`` and (if present) ``theta`` snapshots; return their index entry."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entry = {"t": state.t, "files": {}}
    parts = {"phi": state.phi, "a": state.a}
    if state.theta is not None:
        parts["theta"] = state.theta.theta
    for name, f in parts.items():
        p, _ = write_field(f, directory / f"{stem}_{name}.bin", state.t, k, S0)
        entry["files"][name] = p.name
    return entry


def read_state(directory: str | Path, entry: dict) -> FlowState:
    directory = Path(directory)
    files = entry["files"]
    phi, meta = read_field(directory / files["phi"])
    a, _ = read_field(directory / files["a"])
    theta = None
    if "theta" in files:
        theta = GaugePhase(read_field(directory / files["theta"])[0])
    return FlowState(phi, a, float(meta["time"]), theta)


def write_manifest(path: str | Path, manifest: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return json.loads(path.read_text(encoding="utf-8"))
