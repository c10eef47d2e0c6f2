"""On-disk formats: point-cloud CSV with JSON sidecar, binary ensembles, manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .evsys import Ensemble
from .phase import PhaseSpace, PointCloud

MAGIC = b"ATLENS01"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def write_cloud(path: Path, cloud: PointCloud) -> list[Path]:
    """``path`` gets the CSV; ``path.json`` next to it gets metric tag, space and provenance."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cloud.space.column_names())
        for row in cloud.points:
            w.writerow([repr(float(x)) for x in row])
    side = path.with_suffix(path.suffix + ".json")
    write_json(side, {"metric_tag": cloud.metric_tag, "space": cloud.space.to_dict(), "provenance": _jsonable(cloud.provenance), "points": len(cloud)})
    return [path, side]


def read_cloud(path: Path) -> PointCloud:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    space = PhaseSpace.from_dict(meta["space"])
    pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return PointCloud(space, pts.reshape(-1, space.coord_dim), meta["metric_tag"], meta.get("provenance", {}))


def write_ensemble(path: Path, ens: Ensemble, extra: dict | None = None) -> Path:
    """Magic, little-endian u64 header length, JSON header, then one f8 column per coordinate.

    Column ``c`` holds ``samples[:, :, c]`` in member-major order.
    """
    m, R, D = ens.samples.shape
    header = {
        "grid": {"t0": ens.t0, "dt": ens.dt, "members": m, "samples": R, "coords": D},
        "space": ens.space.to_dict(),
        "symbol_ids": list(ens.symbol_ids),
        "seed": ens.seed,
        "horizon": ens.horizon,
        "meta": _jsonable(ens.meta),
        "initial": ens.initial.points.tolist(),
        "layout": "columnar little-endian float64, column-major over (coordinate; member, sample)",
    }
    if extra:
        header["extra"] = _jsonable(extra)
    blob = json.dumps(header, sort_keys=True).encode()
    data = np.ascontiguousarray(np.transpose(ens.samples, (2, 0, 1))).astype("<f8")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(data.tobytes())
    return path


def read_ensemble(path: Path) -> Ensemble:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise ValueError(f"{path} is not an ensemble file")
    (n,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + n])
    g = header["grid"]
    data = np.frombuffer(raw[16 + n :], dtype="<f8").reshape(g["coords"], g["members"], g["samples"])
    space = PhaseSpace.from_dict(header["space"])
    init = np.asarray(header["initial"], float).reshape(-1, space.coord_dim)
    return Ensemble(
        space,
        g["t0"],
        g["dt"],
        np.ascontiguousarray(np.transpose(data, (1, 2, 0))),
        header["symbol_ids"],
        PointCloud(space, init),
        header["seed"],
        header["horizon"],
        header.get("meta", {}),
    )


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _jsonable(x):
    from .evsys import _plain

    return _plain(x)
