"""Persistence: datasets, sample stores, checkpoints, manifests and CSV tables.

Arrays are written as individual ``.npy`` files (``.npz`` archives embed
timestamps, which would break byte-identical reruns).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import pickle
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

CHUNK_PREFIX = "chunk_"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def ensure_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {path}: {e.strerror}") from None
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path} is not writable")
    return path


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def save_arrays(directory, arrays: dict) -> None:
    d = ensure_dir(directory)
    for name, arr in arrays.items():
        np.save(d / f"{name}.npy", np.asarray(arr), allow_pickle=False)


def load_arrays(directory) -> dict:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"no array directory {d}")
    return {p.stem: np.load(p, allow_pickle=False) for p in sorted(d.glob("*.npy"))}


def save_series(directory, name: str, mats: list) -> None:
    """A list of 2-D arrays (one per time) as ``name_<t>.npy``."""
    save_arrays(directory, {f"{name}_{t:03d}": m for t, m in enumerate(mats)})


def load_series(arrays: dict, name: str) -> list:
    keys = sorted(k for k in arrays if k.startswith(name + "_") and k[len(name) + 1:].isdigit())
    return [arrays[k] for k in keys]


@dataclass
class RunManifest:
    config: dict
    seed: int
    inputs: dict = field(default_factory=dict)    # file name -> sha256
    version: str = __version__
    command: str = ""

    def write(self, directory, wall_clock: float | None = None) -> None:
        d = Path(directory)
        text = json.dumps({"command": self.command, "config": self.config, "seed": self.seed,
                           "inputs": self.inputs, "version": self.version}, indent=2, sort_keys=True)
        _atomic_write_bytes(d / "manifest.json", (text + "\n").encode())
        if wall_clock is not None:
            # kept apart so the manifest itself is reproducible
            (d / "timing.json").write_text(json.dumps({"wall_clock_seconds": wall_clock}) + "\n")

    @classmethod
    def read(cls, directory) -> "RunManifest":
        p = Path(directory) / "manifest.json"
        if not p.exists():
            raise FileNotFoundError(f"no manifest in {directory}")
        d = json.loads(p.read_text())
        return cls(d["config"], d["seed"], d.get("inputs", {}), d.get("version", ""), d.get("command", ""))


def hash_inputs(directory, names=None) -> dict:
    d = Path(directory)
    files = sorted(p for p in d.rglob("*") if p.is_file() and p.name not in ("manifest.json", "timing.json"))
    return {str(p.relative_to(d)): sha256_file(p) for p in files if names is None or p.name in names}


class SampleStore:
    """Append-only store of posterior samples in pickled chunks under ``<run>/samples``."""

    def __init__(self, run_dir):
        self.dir = ensure_dir(Path(run_dir) / "samples")

    def chunks(self) -> list:
        return sorted(self.dir.glob(f"{CHUNK_PREFIX}*.pkl"))

    def write_chunk(self, index: int, samples: list) -> None:
        _atomic_write_bytes(self.dir / f"{CHUNK_PREFIX}{index:05d}.pkl", pickle.dumps(samples, protocol=4))

    def truncate(self, n_chunks: int) -> None:
        """Drop chunks written after the last checkpoint."""
        for p in self.chunks()[n_chunks:]:
            p.unlink()

    def __iter__(self):
        for p in self.chunks():
            with open(p, "rb") as f:
                yield from pickle.load(f)

    def __len__(self):
        return sum(1 for _ in self)


def write_checkpoint(run_dir, payload: dict) -> None:
    _atomic_write_bytes(Path(run_dir) / "checkpoint.pkl", pickle.dumps(payload, protocol=4))


def read_checkpoint(run_dir) -> dict | None:
    p = Path(run_dir) / "checkpoint.pkl"
    if not p.exists():
        return None
    with open(p, "rb") as f:
        return pickle.load(f)


def write_csv(path, header: list, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path) -> tuple:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v
