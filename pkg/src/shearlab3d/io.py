"""Configuration, hashing and on-disk formats.

Volumes are stored as little-endian float64 raw arrays in x-fastest order
next to a JSON sidecar; every JSON, CSV and SVG written here carries the
config hash and package version.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import OutputError, PreconditionError
from .transform import Volume

DEFAULTS: dict = {
    "system": {"alpha": "2", "c1": 0.25, "c2": 0.125, "K": 15, "Lfilt": 10, "J_phi": 24,
               "j_min": 0, "j_max": "auto", "grid_n": 64, "thr": 1e-3},
    "profile": {"delta": 8.5, "gamma": 4.0, "q": 16.0, "q_prime": 2.0, "r": 2.0, "s": 2.0},
    "policy": {"j_max_sum": 14, "lattice_radius": 4, "n_xi1": 64, "n_cross": 64,
               "tail_tol": 1e-6, "max_radius": 12},
    "phantom": {"kind": "ball", "radius": 0.25, "center": [0.5, 0.5, 0.5], "alpha": 2.0,
                "beta": 2.0, "nu": 1.0, "mu": 1.0, "L_patches": 4, "smooth_terms": 0},
    "experiment": {"N_lo": 100, "N_hi": 30000, "N_count": 15, "baselines": ["wavelet", "fourier"],
                   "wavelet_K": 10, "cg_tol": 1e-8, "decay_slope": [0.0, 0.0], "decay_j": 5,
                   "decay_n": 128, "decay_scales": [3, 4, 5], "count_decades": 2.0,
                   "count_per_decade": 4, "count_skip": 0.5, "hypercube_m": [2, 4, 8],
                   "hypercube_mode": "holder_bump", "hypercube_amp": 0.4, "hypercube_n": 64},
    "seed": 0,
}

# keys that never change results and therefore stay out of the hash
_NOT_HASHED = ("threads", "output_dir")


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base and k not in _NOT_HASHED:
            raise PreconditionError(f"unknown config key {where!r}")
        if isinstance(v, dict):
            if not isinstance(base.get(k), dict):
                raise PreconditionError(f"config key {where!r} is not a section")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Read a TOML config and expand it against DEFAULTS."""
    user: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomli.load(fh)
        except OSError as exc:
            raise OutputError(f"cannot read config {path}: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise OutputError(f"config {path} is not valid TOML: {exc}") from exc
    cfg = _merge(DEFAULTS, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form of the effective config (16 hex digits)."""
    clean = {k: v for k, v in cfg.items() if k not in _NOT_HASHED}
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def ensure_dir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
        probe = p / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {p} is not writable: {exc}") from exc
    return p


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class Writer:
    """Writes result files stamped with the config hash and version."""

    def __init__(self, out_dir, chash: str, version: str):
        self.dir = ensure_dir(out_dir)
        self.chash = chash
        self.version = version
        self.written: list[str] = []

    def _write(self, name: str, data: bytes):
        path = self.dir / name
        try:
            path.write_bytes(data)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc
        self.written.append(name)
        return path

    def json(self, name: str, payload: dict):
        doc = {"config_hash": self.chash, "version": self.version} | _clean(payload)
        return self._write(name, (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode())

    def csv(self, name: str, header: list, rows):
        lines = [f"# config_hash={self.chash} version={self.version}", ",".join(header)]
        for r in rows:
            lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in r))
        return self._write(name, ("\n".join(lines) + "\n").encode())

    def text(self, name: str, body: str):
        head = f"config_hash: {self.chash}\nversion: {self.version}\n\n"
        return self._write(name, (head + body).encode())

    def config(self, cfg: dict, name: str = "effective_config.toml"):
        clean = {k: v for k, v in cfg.items() if k not in _NOT_HASHED}
        body = f"# config_hash = \"{self.chash}\"\n# version = \"{self.version}\"\n" + tomli_w.dumps(clean)
        return self._write(name, body.encode())

    def svg(self, name: str, fig):
        from .plotting import save_svg
        path = self.dir / name
        try:
            save_svg(fig, path, self.chash, self.version)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc
        self.written.append(name)
        return path

    def volume(self, stem: str, vol: Volume, seed: int = 0, provenance: dict | None = None):
        raw = np.ascontiguousarray(vol.data.transpose(2, 1, 0)).astype("<f8").tobytes()
        self._write(stem + ".raw", raw)
        side = {"n": vol.n, "dtype": "float64", "byteorder": "little", "order": "x-fastest",
                "domain": [[0.0, 1.0]] * 3, "seed": seed, "provenance": provenance or vol.meta}
        return self.json(stem + ".json", side)


def read_volume(stem) -> Volume:
    """Load a raw + JSON sidecar pair written by Writer.volume."""
    stem = str(stem)
    try:
        with open(stem + ".json") as fh:
            side = json.load(fh)
        raw = np.fromfile(stem + ".raw", dtype="<f8")
    except OSError as exc:
        raise OutputError(f"cannot read volume {stem}: {exc}") from exc
    n = int(side["n"])
    if raw.size != n ** 3:
        raise OutputError(f"volume {stem} has {raw.size} values, expected {n ** 3}")
    return Volume(raw.reshape(n, n, n).transpose(2, 1, 0).copy(), side.get("provenance", {}))


def export_coefficients(writer: Writer, stem: str, coef) -> None:
    """One raw array per non-empty band plus a manifest."""
    sysm = coef.system
    entries = []
    for i, b in enumerate(sysm.bands):
        if b.empty:
            continue
        name = f"{stem}_band{i:05d}.raw"
        writer._write(name, np.ascontiguousarray(coef.band(b)).astype("<f8").tobytes())
        entries.append({"file": name, "pair": b.pair, "j": b.j, "k": list(b.k), "shape": list(b.shape)})
    writer.json(stem + "_manifest.json", {"system": sysm.summary(), "bands": entries})


def env_threads(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get("SHEARLAB3D_THREADS", default)))
    except ValueError:
        return default
