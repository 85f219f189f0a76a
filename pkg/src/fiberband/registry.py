"""On-disk cache of band tables.

Each entry is a pair of files named after the cache key digest:

* ``<digest>.json`` -- manifest with the model, k-grid, policy, solver
  settings, array shape, solver version and the SHA-256 of the payload;
* ``<digest>.bin`` -- ``k_nodes``, ``values``, ``velocity`` and ``error``
  as consecutive little-endian float64 blocks.

Files are written to a temporary name in the same directory and moved into
place with :func:`os.replace`, so concurrent writers of the same entry never
expose a partial file.  Entries whose payload hash does not match are
reported with a warning and treated as misses.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from fiberband import SOLVER_VERSION
from fiberband.bands import BandTable, SolverSettings
from fiberband.mesh import TruncationPolicy
from fiberband.models import FiberModel

log = logging.getLogger(__name__)

ENV_VAR = "FIBERBAND_CACHE"
DEFAULT_DIR = ".fiberband-cache"


def cache_dir(path: Optional[os.PathLike | str] = None) -> Path:
    """Cache directory: argument, else ``$FIBERBAND_CACHE``, else ``./.fiberband-cache``."""
    if path is None:
        path = os.environ.get(ENV_VAR) or DEFAULT_DIR
    return Path(path)


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class CacheKey:
    """Deterministic identity of a band scan."""

    model_hash: str
    kgrid_hash: str
    j_max: int
    policy_hash: str
    solver_version: str = SOLVER_VERSION

    @classmethod
    def for_scan(
        cls,
        model: FiberModel,
        k_nodes: Sequence[float],
        j_max: int,
        policy: TruncationPolicy,
        settings: SolverSettings,
    ) -> "CacheKey":
        k = np.ascontiguousarray(k_nodes, dtype="<f8")
        return cls(
            model_hash=_digest(model.to_dict()),
            kgrid_hash=hashlib.sha256(k.tobytes()).hexdigest(),
            j_max=int(j_max),
            policy_hash=_digest({"policy": policy.to_dict(), "settings": settings.to_dict()}),
        )

    @classmethod
    def for_table(cls, table: BandTable) -> "CacheKey":
        return cls.for_scan(table.model, table.k_nodes, table.j_max, table.policy, table.settings)

    @property
    def digest(self) -> str:
        return _digest(
            [self.model_hash, self.kgrid_hash, self.j_max, self.policy_hash, self.solver_version]
        )


def _payload(table: BandTable) -> bytes:
    parts = [table.k_nodes, table.values, table.velocity, table.error]
    return b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in parts)


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def store(table: BandTable, directory: Optional[os.PathLike | str] = None) -> CacheKey:
    """Write ``table`` to the cache and return its key.

    The payload is written before the manifest, so a reader that finds a
    manifest always finds the payload it describes (or a newer identical
    one).
    """
    root = cache_dir(directory)
    root.mkdir(parents=True, exist_ok=True)
    key = CacheKey.for_table(table)
    payload = _payload(table)
    manifest = {
        "key": {
            "model_hash": key.model_hash,
            "kgrid_hash": key.kgrid_hash,
            "j_max": key.j_max,
            "policy_hash": key.policy_hash,
            "solver_version": key.solver_version,
        },
        "model": table.model.to_dict(),
        "policy": table.policy.to_dict(),
        "settings": table.settings.to_dict(),
        "n_k": int(table.k_nodes.size),
        "j_max": int(table.j_max),
        "dtype": "<f8",
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    _atomic_write(root / f"{key.digest}.bin", payload)
    _atomic_write(root / f"{key.digest}.json", json.dumps(manifest, indent=1, sort_keys=True).encode())
    return key


def load(key: CacheKey, directory: Optional[os.PathLike | str] = None) -> Optional[BandTable]:
    """Return the cached table for ``key`` or ``None`` on a miss.

    Corrupted entries (unreadable manifest, size or hash mismatch, key
    mismatch) log a warning and count as misses.
    """
    root = cache_dir(directory)
    mpath = root / f"{key.digest}.json"
    bpath = root / f"{key.digest}.bin"
    if not mpath.exists() or not bpath.exists():
        return None
    try:
        manifest = json.loads(mpath.read_text())
        payload = bpath.read_bytes()
        if hashlib.sha256(payload).hexdigest() != manifest["sha256"]:
            raise ValueError("payload hash mismatch")
        stored = manifest["key"]
        if (
            stored["model_hash"] != key.model_hash
            or stored["kgrid_hash"] != key.kgrid_hash
            or stored["j_max"] != key.j_max
            or stored["policy_hash"] != key.policy_hash
            or stored["solver_version"] != key.solver_version
        ):
            raise ValueError("manifest key mismatch")
        n_k, j_max = int(manifest["n_k"]), int(manifest["j_max"])
        data = np.frombuffer(payload, dtype="<f8")
        if data.size != n_k * (1 + 3 * j_max):
            raise ValueError("payload size mismatch")
        k_nodes = data[:n_k].astype(float)
        block = n_k * j_max
        arrays = [data[n_k + i * block : n_k + (i + 1) * block].reshape(j_max, n_k).astype(float) for i in range(3)]
        return BandTable(
            FiberModel.from_dict(manifest["model"]),
            k_nodes,
            arrays[0],
            arrays[1],
            arrays[2],
            TruncationPolicy.from_dict(manifest["policy"]),
            SolverSettings.from_dict(manifest["settings"]),
        )
    except (OSError, ValueError, KeyError, TypeError) as exc:
        log.warning("ignoring corrupted cache entry %s: %s", key.digest, exc)
        return None


def purge(directory: Optional[os.PathLike | str] = None) -> int:
    """Delete every cache entry; returns the number of files removed."""
    root = cache_dir(directory)
    if not root.is_dir():
        return 0
    removed = 0
    for path in root.iterdir():
        if path.suffix in (".json", ".bin", ".tmp") and path.is_file():
            path.unlink()
            removed += 1
    return removed
